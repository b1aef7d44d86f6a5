#include <doctest.h>

#include <random>

#include "ahd/crc.hpp"

using namespace ahd;

namespace {

BitVec ascii_bits(const std::string& s) {
    BitVec bits;
    for (unsigned char ch : s)
        for (int b = 7; b >= 0; --b) bits.push_back(static_cast<Bit>((ch >> b) & 1));
    return bits;
}

std::uint64_t bits_to_uint(const BitVec& bits) {
    std::uint64_t v = 0;
    for (Bit b : bits) v = (v << 1) | b;
    return v;
}

// Independent byte-wise reference for CRC-16/CCITT-FALSE.
std::uint16_t reference_crc16(const std::string& s) {
    std::uint16_t reg = 0xFFFF;
    for (unsigned char ch : s) {
        reg ^= static_cast<std::uint16_t>(ch) << 8;
        for (int i = 0; i < 8; ++i)
            reg = (reg & 0x8000) ? static_cast<std::uint16_t>((reg << 1) ^ 0x1021)
                                 : static_cast<std::uint16_t>(reg << 1);
    }
    return reg;
}

} // namespace

TEST_CASE("crc16 check value over the standard test string") {
    const BitVec crc = crc_compute(ascii_bits("123456789"), crc16_ccitt_false());
    CHECK(crc.size() == 16);
    CHECK(bits_to_uint(crc) == 0x29B1);
    CHECK(reference_crc16("123456789") == 0x29B1);
}

TEST_CASE("appended crc divides to zero remainder") {
    std::mt19937_64 rng(42);
    const CrcSpec spec16 = crc16_ccitt_false();
    const CrcSpec spec24 = crc24_lte_a();
    for (int i = 0; i < 200; ++i) {
        const BitVec payload = random_bits(1 + rng() % 120, rng);
        const BitVec with16 = crc_append(payload, spec16);
        CHECK(with16.size() == payload.size() + 16);
        CHECK(crc_check(with16, spec16));
        CHECK(bits_to_uint(crc_compute(with16, spec16)) == 0);
        CHECK(crc_check(crc_append(payload, spec24), spec24));
    }
}

TEST_CASE("single bit flip breaks the crc") {
    std::mt19937_64 rng(7);
    const CrcSpec spec = crc16_ccitt_false();
    for (int i = 0; i < 50; ++i) {
        BitVec with_crc = crc_append(random_bits(64, rng), spec);
        with_crc[rng() % with_crc.size()] ^= 1;
        CHECK_FALSE(crc_check(with_crc, spec));
    }
}

TEST_CASE("empty payload leaves the init register") {
    const BitVec crc = crc_compute(BitVec{}, crc16_ccitt_false());
    CHECK(bits_to_uint(crc) == 0xFFFF);
}

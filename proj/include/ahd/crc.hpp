#ifndef AHD_CRC_HPP
#define AHD_CRC_HPP

#include <cstdint>
#include <string>

#include "ahd/bits.hpp"

namespace ahd {

/// Bitwise CRC over GF(2), MSB-first, no reflection, xorout 0.
/// With xorout 0, crc_compute(bits || crc) == 0 for any init.
struct CrcSpec {
    unsigned width = 16;
    std::uint64_t poly = 0x1021;   // without the leading x^width term
    std::uint64_t init = 0xFFFF;
    std::string name = "crc16-ccitt-false";
};

inline CrcSpec crc16_ccitt_false() { return CrcSpec{16, 0x1021, 0xFFFF, "crc16-ccitt-false"}; }
inline CrcSpec crc24_lte_a() { return CrcSpec{24, 0x864CFB, 0, "crc24-lte-a"}; }

BitVec crc_compute(const BitVec& bits, const CrcSpec& spec);
bool crc_check(const BitVec& bits_with_crc, const CrcSpec& spec);
BitVec crc_append(const BitVec& bits, const CrcSpec& spec);

} // namespace ahd

#endif

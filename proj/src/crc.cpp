#include "ahd/crc.hpp"

namespace ahd {

BitVec crc_compute(const BitVec& bits, const CrcSpec& spec) {
    const std::uint64_t top = 1ULL << (spec.width - 1);
    const std::uint64_t mask = (spec.width == 64) ? ~0ULL : ((1ULL << spec.width) - 1);
    std::uint64_t reg = spec.init & mask;
    for (Bit b : bits) {
        const bool feedback = ((reg & top) != 0) != (b != 0);
        reg = (reg << 1) & mask;
        if (feedback) reg ^= spec.poly;
    }
    BitVec out(spec.width);
    for (unsigned i = 0; i < spec.width; ++i)
        out[i] = static_cast<Bit>((reg >> (spec.width - 1 - i)) & 1);
    return out;
}

bool crc_check(const BitVec& bits_with_crc, const CrcSpec& spec) {
    if (bits_with_crc.size() < spec.width) return false;
    const BitVec rem = crc_compute(bits_with_crc, spec);
    for (Bit b : rem)
        if (b) return false;
    return true;
}

BitVec crc_append(const BitVec& bits, const CrcSpec& spec) {
    BitVec out = bits;
    const BitVec crc = crc_compute(bits, spec);
    out.insert(out.end(), crc.begin(), crc.end());
    return out;
}

} // namespace ahd

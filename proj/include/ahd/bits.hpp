#ifndef AHD_BITS_HPP
#define AHD_BITS_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace ahd {

using Bit = std::uint8_t;
using BitVec = std::vector<Bit>;

inline BitVec random_bits(std::size_t n, std::mt19937_64& rng) {
    BitVec out(n);
    for (auto& b : out) b = static_cast<Bit>(rng() & 1u);
    return out;
}

// Stable seed derivation for partitioned streams (seed || index).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace ahd

#endif

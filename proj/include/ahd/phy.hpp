#ifndef AHD_PHY_HPP
#define AHD_PHY_HPP

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "ahd/bits.hpp"
#include "ahd/crc.hpp"
#include "ahd/tanner.hpp"

namespace ahd::phy {

/// Operating point of the link: resource blocks, MCS, channel quality.
struct Context {
    std::size_t n_prb = 1;
    std::size_t mcs_index = 0;
    double snr_db = 0.0;
};

struct McsEntry {
    std::size_t modulation_order = 2;  // 2 (BPSK), 4 (QPSK), 16 (16QAM)
    double code_rate = 0.5;
};

struct McsTable {
    std::vector<McsEntry> entries;
    const McsEntry& lookup(std::size_t mcs_index) const;

    static McsTable desk_default();
    static McsTable load_csv(const std::string& path);
};

struct PhyConfig {
    McsTable mcs = McsTable::desk_default();
    CrcSpec tb_crc = crc16_ccitt_false();
    CrcSpec cb_crc = crc16_ccitt_false();
    double llr_sat = 20.0;
    std::size_t interleaver_depth = 4;
    std::size_t re_per_prb = 48;  // desk-scale resource elements per PRB
};

enum class Origin : std::uint8_t { Received, Punctured, Shortened };

/// Channel LLRs for one codeword, positive means bit 0.
struct LlrFrame {
    std::vector<double> values;
    std::vector<Origin> origin;

    std::size_t size() const { return values.size(); }
};

/// Ground truth + received soft values for one code block.
struct CodeBlockInstance {
    LlrFrame llrs;
    BitVec tx_codeword;
    std::size_t payload_bits = 0;            // chunk length before CB CRC
    std::vector<std::size_t> filler_positions;
};

/// One transport block through the chain, with everything a decoder
/// and a scorer need.
struct TbInstance {
    BitVec payload;                 // A bits, before TB CRC
    BitVec payload_with_crc;        // B = A + tb_crc bits
    std::vector<CodeBlockInstance> blocks;
    Context context;
};

/// Derived per-context layout shared by transmitter and receiver.
struct TbLayout {
    std::size_t payload_bits = 0;     // A
    std::size_t block_count = 0;      // C
    std::vector<std::size_t> chunk_bits;   // per CB payload share
    std::size_t channel_bits_per_block = 0;
    std::size_t modulation_order = 2;
    double code_rate = 0.0;
};

TbLayout plan_tb(const Context& ctx, const tanner::CodeSpec& code, const PhyConfig& cfg);

// --- scrambling -----------------------------------------------------------

/// Gold sequence from two 31-bit LFSRs; seed initializes the second register.
std::vector<Bit> gold_sequence(std::uint64_t seed, std::size_t length);
BitVec scramble_bits(const BitVec& bits, std::uint64_t seed);
std::vector<double> descramble_llrs(const std::vector<double>& llrs, std::uint64_t seed);

// --- rate matching --------------------------------------------------------

/// Circular-buffer read of target_len bits over the given positions
/// (puncture when shorter, repeat when longer).
BitVec rate_match(const BitVec& codeword, const std::vector<std::size_t>& tx_positions,
                  std::size_t target_len);
LlrFrame rate_dematch(const std::vector<double>& llrs,
                      const std::vector<std::size_t>& tx_positions, std::size_t n);

LlrFrame shortening_recover(LlrFrame frame, const std::vector<std::size_t>& filler_positions,
                            double llr_sat);

// --- interleaving ---------------------------------------------------------

std::vector<std::size_t> block_interleaver_map(std::size_t length, std::size_t depth);
template <typename T>
std::vector<T> apply_permutation(const std::vector<T>& in, const std::vector<std::size_t>& map) {
    std::vector<T> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[map[i]] = in[i];
    return out;
}
template <typename T>
std::vector<T> invert_permutation(const std::vector<T>& in, const std::vector<std::size_t>& map) {
    std::vector<T> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[map[i]];
    return out;
}

// --- modulation / channel -------------------------------------------------

std::vector<std::complex<double>> modulate(const BitVec& bits, std::size_t order);
std::vector<std::complex<double>> awgn(const std::vector<std::complex<double>>& symbols,
                                       double snr_db, std::uint64_t rng_seed);
std::vector<double> demap(const std::vector<std::complex<double>>& symbols, std::size_t order,
                          double noise_var);

/// Total noise variance (both dimensions) for unit symbol energy.
double noise_variance(double snr_db);

// --- end to end -----------------------------------------------------------

std::vector<TbInstance> run_link(const Context& ctx, std::size_t n_tbs, std::uint64_t seed,
                                 const tanner::TannerGraph& graph, const PhyConfig& cfg);

} // namespace ahd::phy

#endif

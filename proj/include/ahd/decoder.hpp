#ifndef AHD_DECODER_HPP
#define AHD_DECODER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ahd/kernels.hpp"
#include "ahd/phy.hpp"
#include "ahd/tanner.hpp"

namespace ahd::decoder {

/// Per-edge message state, aligned to the graph's canonical edge order.
struct EdgeMessages {
    std::vector<double> v2c;
    std::vector<double> c2v;
};

struct TbResult {
    bool decoded = false;
    std::size_t iterations_used = 0;
    std::size_t bit_errors = 0;
    std::size_t info_bits = 0;
};

struct DecodeReport {
    std::vector<TbResult> per_tb;
    std::uint64_t total_cnu_edge_ops = 0;

    std::size_t decoded_count() const;
    /// Mean iterations, optionally excluding TBs that never decoded.
    double mean_iterations(bool include_failed = true) const;
    double mean_ber() const;  // failed TBs contribute their final-iteration BER
    std::string to_json() const;
};

phy::LlrFrame clip_llrs(phy::LlrFrame frame, double clip);

/// posterior[v] = channel[v] + sum of c2v over v's edges;
/// v2c[e] = posterior[v] - c2v[e]; both clipped to +/- clip.
void vnu_step(const tanner::TannerGraph& graph, const std::vector<double>& channel_llrs,
              const std::vector<double>& c2v, std::vector<double>& v2c,
              std::vector<double>& posterior, double clip);

BitVec hard_decide(const std::vector<double>& posterior_llrs);

struct DecodeConfig {
    std::size_t max_iters = 50;
    double llr_clip = 16.0;
    CrcSpec tb_crc = crc16_ccitt_false();
    CrcSpec cb_crc = crc16_ccitt_false();
};

/// Flooding-schedule BP over a batch of transport blocks with CRC-based
/// early stopping. Decoded TBs stop consuming CNU/VNU work. Throws
/// KernelFault if the kernel itself faults (not a normal decode failure).
DecodeReport decode_batch(const tanner::TannerGraph& graph, const std::vector<phy::TbInstance>& tbs,
                          const kernels::CheckNodeKernel& kernel, const DecodeConfig& cfg);

} // namespace ahd::decoder

#endif

#include "ahd/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "ahd/errors.hpp"

namespace ahd::decoder {

std::size_t DecodeReport::decoded_count() const {
    std::size_t n = 0;
    for (const auto& tb : per_tb) n += tb.decoded ? 1 : 0;
    return n;
}

double DecodeReport::mean_iterations(bool include_failed) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& tb : per_tb) {
        if (!include_failed && !tb.decoded) continue;
        sum += static_cast<double>(tb.iterations_used);
        ++n;
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

double DecodeReport::mean_ber() const {
    if (per_tb.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& tb : per_tb)
        sum += tb.info_bits ? static_cast<double>(tb.bit_errors) / static_cast<double>(tb.info_bits)
                            : 0.0;
    return sum / static_cast<double>(per_tb.size());
}

std::string DecodeReport::to_json() const {
    nlohmann::json j;
    j["per_tb"] = nlohmann::json::array();
    for (const auto& tb : per_tb)
        j["per_tb"].push_back({{"decoded", tb.decoded},
                               {"iterations_used", tb.iterations_used},
                               {"bit_errors", tb.bit_errors},
                               {"info_bits", tb.info_bits}});
    j["batch"] = {{"total_cnu_edge_ops", total_cnu_edge_ops}};
    return j.dump();
}

phy::LlrFrame clip_llrs(phy::LlrFrame frame, double clip) {
    if (!(clip > 0)) throw NonPositiveClip("clip must be > 0");
    for (double& v : frame.values) v = std::clamp(v, -clip, clip);
    return frame;
}

void vnu_step(const tanner::TannerGraph& graph, const std::vector<double>& channel_llrs,
              const std::vector<double>& c2v, std::vector<double>& v2c,
              std::vector<double>& posterior, double clip) {
    if (channel_llrs.size() != graph.var_nodes || c2v.size() != graph.edge_count())
        throw LengthMismatch("vnu input sizes do not match graph");
    v2c.resize(graph.edge_count());
    posterior.resize(graph.var_nodes);
    for (std::size_t v = 0; v < graph.var_nodes; ++v) {
        double total = channel_llrs[v];
        for (std::uint32_t e : graph.var_edges[v]) total += c2v[e];
        posterior[v] = std::clamp(total, -clip, clip);
        for (std::uint32_t e : graph.var_edges[v])
            v2c[e] = std::clamp(total - c2v[e], -clip, clip);
    }
}

BitVec hard_decide(const std::vector<double>& posterior_llrs) {
    BitVec bits(posterior_llrs.size());
    for (std::size_t i = 0; i < posterior_llrs.size(); ++i) {
        if (!std::isfinite(posterior_llrs[i])) throw NonFiniteInput("non-finite posterior LLR");
        bits[i] = posterior_llrs[i] < 0.0 ? 1 : 0;  // ties decide bit 0
    }
    return bits;
}

namespace {

struct CbState {
    std::vector<double> channel;   // per variable, clipped
    std::vector<double> v2c, c2v;  // per edge
    std::vector<double> posterior;
    BitVec hard;
};

bool syndrome_clear(const tanner::TannerGraph& graph, const BitVec& bits) {
    const BitVec syn = tanner::syndrome(graph, bits);
    return std::all_of(syn.begin(), syn.end(), [](Bit b) { return b == 0; });
}

} // namespace

DecodeReport decode_batch(const tanner::TannerGraph& graph, const std::vector<phy::TbInstance>& tbs,
                          const kernels::CheckNodeKernel& kernel, const DecodeConfig& cfg) {
    if (cfg.max_iters < 1) throw Error("max_iters must be >= 1");
    kernel.begin_decode();

    DecodeReport report;
    report.per_tb.resize(tbs.size());

    std::vector<std::vector<CbState>> states(tbs.size());
    std::vector<bool> active(tbs.size(), true);

    for (std::size_t t = 0; t < tbs.size(); ++t) {
        report.per_tb[t].info_bits = tbs[t].payload_with_crc.size();
        for (const auto& block : tbs[t].blocks) {
            if (block.llrs.size() != graph.var_nodes)
                throw LengthMismatch("frame length does not match code");
            CbState st;
            st.channel = clip_llrs(block.llrs, cfg.llr_clip).values;
            st.c2v.assign(graph.edge_count(), 0.0);
            st.v2c.resize(graph.edge_count());
            // First-iteration v2c is the channel LLR of the edge's variable.
            for (std::size_t e = 0; e < graph.edge_count(); ++e)
                st.v2c[e] = st.channel[graph.edge_var[e]];
            states[t].push_back(std::move(st));
        }
    }

    auto reassemble = [&](std::size_t t) {
        BitVec out;
        for (const auto& block : tbs[t].blocks) {
            const CbState& st = states[t][&block - tbs[t].blocks.data()];
            out.insert(out.end(), st.hard.begin(),
                       st.hard.begin() + static_cast<long>(block.payload_bits));
        }
        return out;
    };

    auto count_errors = [&](std::size_t t) {
        const BitVec got = reassemble(t);
        const BitVec& want = tbs[t].payload_with_crc;
        std::size_t errs = 0;
        for (std::size_t i = 0; i < want.size(); ++i) errs += got[i] != want[i];
        return errs;
    };

    std::size_t remaining = tbs.size();
    for (std::size_t iter = 1; iter <= cfg.max_iters && remaining > 0; ++iter) {
        for (std::size_t t = 0; t < tbs.size(); ++t) {
            if (!active[t]) continue;
            bool tb_ok = true;
            for (CbState& st : states[t]) {
                // CNU across all check nodes.
                for (std::size_t m = 0; m < graph.check_nodes; ++m) {
                    const std::size_t lo = graph.check_offset[m];
                    const std::size_t hi = graph.check_offset[m + 1];
                    kernel.update(std::span<const double>(st.v2c.data() + lo, hi - lo),
                                  std::span<double>(st.c2v.data() + lo, hi - lo));
                }
                report.total_cnu_edge_ops += graph.edge_count();
                for (double& v : st.c2v) v = std::clamp(v, -cfg.llr_clip, cfg.llr_clip);

                vnu_step(graph, st.channel, st.c2v, st.v2c, st.posterior, cfg.llr_clip);
                st.hard = hard_decide(st.posterior);
            }

            // Per-CB syndrome + CRC, then the TB-level CRC.
            for (std::size_t b = 0; b < states[t].size() && tb_ok; ++b) {
                const CbState& st = states[t][b];
                if (!syndrome_clear(graph, st.hard)) {
                    tb_ok = false;
                    break;
                }
                const auto& block = tbs[t].blocks[b];
                BitVec cb_bits(st.hard.begin(),
                               st.hard.begin() +
                                   static_cast<long>(block.payload_bits + cfg.cb_crc.width));
                if (!crc_check(cb_bits, cfg.cb_crc)) tb_ok = false;
            }
            if (tb_ok && !crc_check(reassemble(t), cfg.tb_crc)) tb_ok = false;

            if (tb_ok) {
                active[t] = false;
                --remaining;
                report.per_tb[t].decoded = true;
                report.per_tb[t].iterations_used = iter;
                report.per_tb[t].bit_errors = count_errors(t);
            }
        }
    }

    for (std::size_t t = 0; t < tbs.size(); ++t) {
        if (report.per_tb[t].decoded) continue;
        report.per_tb[t].iterations_used = cfg.max_iters;
        report.per_tb[t].bit_errors = count_errors(t);
    }
    return report;
}

} // namespace ahd::decoder

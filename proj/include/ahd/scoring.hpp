#ifndef AHD_SCORING_HPP
#define AHD_SCORING_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ahd/decoder.hpp"
#include "ahd/kernels.hpp"
#include "ahd/kernelscript.hpp"
#include "ahd/phy.hpp"
#include "ahd/tanner.hpp"

namespace ahd::scoring {

/// Hierarchical penalty weights: catastrophic >> undecoded >> BER >> iterations.
constexpr double kWeightCatastrophic = 1e9;
constexpr double kWeightUndecoded = 1e7;
constexpr double kWeightBer = 1e6;
constexpr double kWeightIterations = 1.0;

struct ScoreRecord {
    double score = 0.0;  // higher is better (score = -penalty)
    int catastrophic = 0;
    std::size_t undecoded = 0;
    double mean_ber = 0.0;
    std::uint64_t total_iterations = 0;
    std::vector<std::size_t> context_ids;
    std::uint64_t tb_batch_seed = 0;
    std::string fault;  // diagnostic only, set when catastrophic

    static double compute(int catastrophic, std::size_t undecoded, double mean_ber,
                          std::uint64_t total_iterations);
    std::string to_json() const;
    static ScoreRecord from_json(const std::string& text);
};

/// Fixed evaluation protocol: every candidate sees the same TB batch.
struct EvalProtocol {
    std::vector<phy::Context> contexts = {phy::Context{}};
    std::size_t n_tbs = 30;
    std::uint64_t tb_batch_seed = 0;
    std::size_t max_iters = 50;
    double clip = 16.0;

    std::string hash(const tanner::CodeSpec& code) const;
};

/// Binds a protocol to a built code and runs candidates against it.
class Evaluator {
public:
    Evaluator(EvalProtocol protocol, tanner::CodeSpec code, phy::PhyConfig phy_cfg = {},
              kernelscript::EvalBudget budget = {});

    ScoreRecord score_kernel(const kernels::CheckNodeKernel& kernel) const;
    /// Parse + sandbox-execute a DSL candidate; any fault is a catastrophic score.
    ScoreRecord score_source(const std::string& source) const;

    const EvalProtocol& protocol() const { return protocol_; }
    const tanner::TannerGraph& graph() const { return graph_; }
    const phy::PhyConfig& phy_config() const { return phy_cfg_; }
    const kernelscript::EvalBudget& budget() const { return budget_; }
    std::string protocol_hash() const { return protocol_.hash(graph_.spec); }

private:
    EvalProtocol protocol_;
    tanner::TannerGraph graph_;
    phy::PhyConfig phy_cfg_;
    kernelscript::EvalBudget budget_;
};

struct GridPoint {
    phy::Context ctx;
    double success_fraction = 0.0;
    double mean_iterations = 0.0;
    double mean_ber = 0.0;
};

std::vector<GridPoint> sweep(const std::vector<phy::Context>& grid,
                             const tanner::TannerGraph& graph,
                             const kernels::CheckNodeKernel& kernel, std::size_t tbs_per_point,
                             std::uint64_t seed, const phy::PhyConfig& phy_cfg = {},
                             std::size_t max_iters = 50, double clip = 16.0);

/// Most iteration-hungry context with success fraction in [lo, hi].
/// Deterministic tie-break: snr_db asc, mcs desc, n_prb desc.
phy::Context pick_boundary_context(const std::vector<GridPoint>& grid_results, double lo = 0.3,
                                   double hi = 0.9);

struct ComparisonRow {
    std::string kernel;
    std::size_t context_id = 0;
    bool catastrophic = false;
    double decoded_mean = 0, decoded_std = 0;
    double ber_mean = 0, ber_std = 0;
    double iters_mean = 0, iters_std = 0;
};

/// Mean/std across independent trials (per-trial seed = base_seed || trial).
std::vector<ComparisonRow> compare_kernels(
    const std::vector<std::pair<std::string, kernels::KernelPtr>>& kernels,
    const Evaluator& evaluator, std::size_t trials);

} // namespace ahd::scoring

#endif

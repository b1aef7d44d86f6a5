#include "ahd/scoring.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "ahd/errors.hpp"

namespace ahd::scoring {

double ScoreRecord::compute(int catastrophic, std::size_t undecoded, double mean_ber,
                            std::uint64_t total_iterations) {
    return -(kWeightCatastrophic * catastrophic +
             kWeightUndecoded * static_cast<double>(undecoded) + kWeightBer * mean_ber +
             kWeightIterations * static_cast<double>(total_iterations));
}

std::string ScoreRecord::to_json() const {
    nlohmann::json j;
    j["score"] = score;
    j["penalty_breakdown"] = {{"catastrophic", catastrophic},
                              {"undecoded", undecoded},
                              {"mean_ber", mean_ber},
                              {"total_iterations", total_iterations}};
    j["context_ids"] = context_ids;
    j["tb_batch_seed"] = tb_batch_seed;
    if (!fault.empty()) j["fault"] = fault;
    return j.dump();
}

ScoreRecord ScoreRecord::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    ScoreRecord r;
    r.score = j.at("score").get<double>();
    const auto& b = j.at("penalty_breakdown");
    r.catastrophic = b.at("catastrophic").get<int>();
    r.undecoded = b.at("undecoded").get<std::size_t>();
    r.mean_ber = b.at("mean_ber").get<double>();
    r.total_iterations = b.at("total_iterations").get<std::uint64_t>();
    r.context_ids = j.value("context_ids", std::vector<std::size_t>{});
    r.tb_batch_seed = j.value("tb_batch_seed", std::uint64_t{0});
    r.fault = j.value("fault", std::string{});
    return r;
}

std::string EvalProtocol::hash(const tanner::CodeSpec& code) const {
    nlohmann::json j;
    j["contexts"] = nlohmann::json::array();
    for (const auto& c : contexts)
        j["contexts"].push_back({{"n_prb", c.n_prb}, {"mcs_index", c.mcs_index}, {"snr_db", c.snr_db}});
    j["n_tbs"] = n_tbs;
    j["tb_batch_seed"] = tb_batch_seed;
    j["max_iters"] = max_iters;
    j["clip"] = clip;
    j["code"] = tanner::serialize_spec(code);
    return kernelscript::sha256_hex(j.dump());
}

Evaluator::Evaluator(EvalProtocol protocol, tanner::CodeSpec code, phy::PhyConfig phy_cfg,
                     kernelscript::EvalBudget budget)
    : protocol_(std::move(protocol)),
      graph_(tanner::build_code(code)),
      phy_cfg_(std::move(phy_cfg)),
      budget_(budget) {
    if (protocol_.n_tbs < 1) throw Error("protocol needs n_tbs >= 1");
    if (protocol_.contexts.empty()) throw Error("protocol needs at least one context");
}

ScoreRecord Evaluator::score_kernel(const kernels::CheckNodeKernel& kernel) const {
    ScoreRecord rec;
    rec.tb_batch_seed = protocol_.tb_batch_seed;
    decoder::DecodeConfig dcfg;
    dcfg.max_iters = protocol_.max_iters;
    dcfg.llr_clip = protocol_.clip;
    dcfg.tb_crc = phy_cfg_.tb_crc;
    dcfg.cb_crc = phy_cfg_.cb_crc;

    double ber_sum = 0.0;
    std::size_t tb_total = 0;
    try {
        for (std::size_t ci = 0; ci < protocol_.contexts.size(); ++ci) {
            rec.context_ids.push_back(ci);
            const auto tbs =
                phy::run_link(protocol_.contexts[ci], protocol_.n_tbs,
                              derive_seed(protocol_.tb_batch_seed, ci), graph_, phy_cfg_);
            const auto report = decoder::decode_batch(graph_, tbs, kernel, dcfg);
            for (const auto& tb : report.per_tb) {
                if (!tb.decoded) ++rec.undecoded;
                ber_sum += tb.info_bits ? static_cast<double>(tb.bit_errors) /
                                              static_cast<double>(tb.info_bits)
                                        : 0.0;
                rec.total_iterations += tb.iterations_used;
                ++tb_total;
            }
        }
        rec.mean_ber = tb_total ? ber_sum / static_cast<double>(tb_total) : 0.0;
    } catch (const KernelFault& e) {
        rec = ScoreRecord{};
        rec.tb_batch_seed = protocol_.tb_batch_seed;
        rec.catastrophic = 1;
        rec.fault = e.what();
    }
    rec.score = ScoreRecord::compute(rec.catastrophic, rec.undecoded, rec.mean_ber,
                                     rec.total_iterations);
    return rec;
}

ScoreRecord Evaluator::score_source(const std::string& source) const {
    try {
        const kernelscript::KernelProgram prog = kernelscript::parse(source);
        const kernelscript::ScriptKernel kernel(prog, budget_);
        kernel.arm_deadline();  // the whole candidate evaluation shares one wall clock
        return score_kernel(kernel);
    } catch (const kernelscript::SyntaxError& e) {
        ScoreRecord rec;
        rec.tb_batch_seed = protocol_.tb_batch_seed;
        rec.catastrophic = 1;
        rec.fault = e.what();
        rec.score = ScoreRecord::compute(1, 0, 0.0, 0);
        return rec;
    } catch (const kernelscript::ValidationError& e) {
        ScoreRecord rec;
        rec.tb_batch_seed = protocol_.tb_batch_seed;
        rec.catastrophic = 1;
        rec.fault = e.what();
        rec.score = ScoreRecord::compute(1, 0, 0.0, 0);
        return rec;
    }
}

std::vector<GridPoint> sweep(const std::vector<phy::Context>& grid,
                             const tanner::TannerGraph& graph,
                             const kernels::CheckNodeKernel& kernel, std::size_t tbs_per_point,
                             std::uint64_t seed, const phy::PhyConfig& phy_cfg,
                             std::size_t max_iters, double clip) {
    decoder::DecodeConfig dcfg;
    dcfg.max_iters = max_iters;
    dcfg.llr_clip = clip;
    dcfg.tb_crc = phy_cfg.tb_crc;
    dcfg.cb_crc = phy_cfg.cb_crc;

    std::vector<GridPoint> out;
    out.reserve(grid.size());
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        const auto tbs = phy::run_link(grid[gi], tbs_per_point, derive_seed(seed, gi), graph, phy_cfg);
        const auto report = decoder::decode_batch(graph, tbs, kernel, dcfg);
        GridPoint p;
        p.ctx = grid[gi];
        p.success_fraction = static_cast<double>(report.decoded_count()) /
                             static_cast<double>(report.per_tb.size());
        p.mean_iterations = report.mean_iterations(true);
        p.mean_ber = report.mean_ber();
        out.push_back(p);
    }
    return out;
}

phy::Context pick_boundary_context(const std::vector<GridPoint>& grid_results, double lo,
                                   double hi) {
    const GridPoint* best = nullptr;
    for (const auto& p : grid_results) {
        if (p.success_fraction < lo || p.success_fraction > hi) continue;
        if (!best || p.mean_iterations > best->mean_iterations) {
            best = &p;
        } else if (p.mean_iterations == best->mean_iterations) {
            const auto key = [](const GridPoint& g) {
                return std::make_tuple(g.ctx.snr_db, -static_cast<long>(g.ctx.mcs_index),
                                       -static_cast<long>(g.ctx.n_prb));
            };
            if (key(p) < key(*best)) best = &p;
        }
    }
    if (!best)
        throw NoIntermediateZone("no context with success fraction in band; widen the band");
    return best->ctx;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return {mean, 0.0};
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size() - 1);
    return {mean, std::sqrt(var)};
}

} // namespace

std::vector<ComparisonRow> compare_kernels(
    const std::vector<std::pair<std::string, kernels::KernelPtr>>& kernel_list,
    const Evaluator& evaluator, std::size_t trials) {
    if (trials < 1) throw Error("trials must be >= 1");
    const EvalProtocol& proto = evaluator.protocol();
    decoder::DecodeConfig dcfg;
    dcfg.max_iters = proto.max_iters;
    dcfg.llr_clip = proto.clip;
    dcfg.tb_crc = evaluator.phy_config().tb_crc;
    dcfg.cb_crc = evaluator.phy_config().cb_crc;

    std::vector<ComparisonRow> rows;
    for (const auto& [name, kernel] : kernel_list) {
        for (std::size_t ci = 0; ci < proto.contexts.size(); ++ci) {
            ComparisonRow row;
            row.kernel = name;
            row.context_id = ci;
            std::vector<double> decoded, bers, iters;
            try {
                for (std::size_t trial = 0; trial < trials; ++trial) {
                    const std::uint64_t trial_seed =
                        derive_seed(derive_seed(proto.tb_batch_seed, ci), trial);
                    const auto tbs = phy::run_link(proto.contexts[ci], proto.n_tbs, trial_seed,
                                                   evaluator.graph(), evaluator.phy_config());
                    const auto report =
                        decoder::decode_batch(evaluator.graph(), tbs, *kernel, dcfg);
                    decoded.push_back(static_cast<double>(report.decoded_count()));
                    bers.push_back(report.mean_ber());
                    iters.push_back(report.mean_iterations(true));
                }
                std::tie(row.decoded_mean, row.decoded_std) = mean_std(decoded);
                std::tie(row.ber_mean, row.ber_std) = mean_std(bers);
                std::tie(row.iters_mean, row.iters_std) = mean_std(iters);
            } catch (const KernelFault&) {
                row.catastrophic = true;
            }
            rows.push_back(row);
        }
    }
    return rows;
}

} // namespace ahd::scoring

#ifndef AHD_RUN_HPP
#define AHD_RUN_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ahd/evolution.hpp"
#include "ahd/scoring.hpp"
#include "ahd/services.hpp"

namespace ahd::run {

/// Full configuration of one evolution run, loadable from a JSON file.
struct RunConfig {
    tanner::CodeSpec code;
    scoring::EvalProtocol protocol;
    phy::PhyConfig phy_cfg;
    kernelscript::EvalBudget eval_budget;
    std::size_t islands = 4;
    std::string seed_program;  // DSL source seeding every island
    services::MutatorConfig mutator;
    evolution::SamplingParams sampling;
    evolution::ResetPolicy reset;
    std::size_t budget_candidates = 500;
    std::uint64_t seed = 0;
    std::string db_addr;                 // distributed mode
    std::vector<std::string> eval_addrs; // distributed mode

    static RunConfig load_file(const std::string& path);
    static RunConfig from_json_text(const std::string& text);
    std::string to_json() const;
};

struct RunOutputs {
    std::string event_log_path;
    std::string trace_csv_path;
    std::string best_program_path;
    std::string snapshot_path;
    std::string manifest_path;
    double best_score = 0.0;
    std::string best_hash;
    std::size_t candidates_evaluated = 0;
};

/// Deterministic in-process evolution: one logical sampler + evaluator
/// against the island database, mock or llm mutator. When the out_dir
/// already holds an event log, the run resumes from it.
RunOutputs run_local_evolve(const RunConfig& config, const std::string& out_dir);

struct ReportSummary {
    std::uint64_t generated = 0;
    std::uint64_t accepted = 0;
    std::uint64_t catastrophic = 0;
    std::uint64_t skipped = 0;  // generated - accepted - catastrophic (duplicates)
    double best_score = 0.0;
    std::string best_source;
    std::string best_hash;
};

/// Digest an event log into totals + score-vs-candidate and per-island CSVs.
ReportSummary report_from_log(const std::string& event_log_path, const std::string& out_dir);

} // namespace ahd::run

#endif

#include "ahd/run.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ahd/errors.hpp"
#include "ahd/kernelscript.hpp"

namespace ahd::run {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::uint64_t env_seed_default() {
    if (const char* s = std::getenv("AHD_SEED")) {
        try {
            return std::stoull(s);
        } catch (const std::exception&) {
        }
    }
    return 0;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    const json j = json::parse(text);
    RunConfig cfg;

    if (j.contains("code") && j["code"].contains("file"))
        cfg.code = tanner::load_spec_file(j["code"]["file"].get<std::string>());
    else
        cfg.code = tanner::default_desk_spec(j.value("code", json::object()).value("lift", 16));

    if (j.contains("protocol")) {
        const auto& p = j["protocol"];
        cfg.protocol.contexts.clear();
        for (const auto& c : p.value("contexts", json::array()))
            cfg.protocol.contexts.push_back({c.value("n_prb", std::size_t{1}),
                                             c.value("mcs_index", std::size_t{0}),
                                             c.value("snr_db", 0.0)});
        if (cfg.protocol.contexts.empty())
            cfg.protocol.contexts.push_back(phy::Context{1, 0, 3.0});
        cfg.protocol.n_tbs = p.value("n_tbs", std::size_t{30});
        cfg.protocol.tb_batch_seed = p.value("tb_batch_seed", std::uint64_t{0});
        cfg.protocol.max_iters = p.value("max_iters", std::size_t{50});
        cfg.protocol.clip = p.value("clip", 16.0);
    }

    if (j.contains("phy")) {
        const auto& p = j["phy"];
        cfg.phy_cfg.llr_sat = p.value("llr_sat", cfg.phy_cfg.llr_sat);
        cfg.phy_cfg.interleaver_depth = p.value("interleaver_depth", cfg.phy_cfg.interleaver_depth);
        cfg.phy_cfg.re_per_prb = p.value("re_per_prb", cfg.phy_cfg.re_per_prb);
        if (p.contains("mcs_table_file"))
            cfg.phy_cfg.mcs = phy::McsTable::load_csv(p["mcs_table_file"].get<std::string>());
    }

    if (j.contains("eval_budget")) {
        cfg.eval_budget.max_scalar_ops =
            j["eval_budget"].value("max_scalar_ops", cfg.eval_budget.max_scalar_ops);
        cfg.eval_budget.wall_clock_ms =
            j["eval_budget"].value("wall_clock_ms", cfg.eval_budget.wall_clock_ms);
    }

    cfg.islands = j.value("islands", std::size_t{4});
    if (j.contains("seed_program_file"))
        cfg.seed_program = read_file(j["seed_program_file"].get<std::string>());
    else
        cfg.seed_program = j.value("seed_program", kernelscript::boxplus_source());

    if (j.contains("mutator")) {
        const auto& m = j["mutator"];
        cfg.mutator.mode = m.value("mode", "mock") == "llm" ? services::MutatorConfig::Mode::Llm
                                                            : services::MutatorConfig::Mode::Mock;
        cfg.mutator.endpoint = m.value("endpoint", "");
        cfg.mutator.model = m.value("model", "");
        cfg.mutator.prompt_template_path = m.value("prompt_template", "");
        cfg.mutator.examples_per_prompt = m.value("examples_per_prompt", std::size_t{2});
        cfg.mutator.timeout_ms = m.value("timeout_ms", std::uint64_t{30000});
        if (cfg.mutator.endpoint.empty())
            if (const char* e = std::getenv("AHD_LLM_ENDPOINT")) cfg.mutator.endpoint = e;
        if (const char* k = std::getenv("AHD_LLM_API_KEY")) cfg.mutator.api_key = k;
        if (cfg.mutator.mode == services::MutatorConfig::Mode::Llm && cfg.mutator.endpoint.empty())
            throw Error("mutator mode llm requires an endpoint");
    }

    if (j.contains("sampling")) {
        cfg.sampling.t0 = j["sampling"].value("t0", cfg.sampling.t0);
        cfg.sampling.period = j["sampling"].value("period", cfg.sampling.period);
        cfg.sampling.length_lambda = j["sampling"].value("length_lambda", cfg.sampling.length_lambda);
    }
    if (j.contains("reset")) {
        cfg.reset.period = j["reset"].value("period", cfg.reset.period);
        cfg.reset.fraction = j["reset"].value("fraction", cfg.reset.fraction);
    }

    cfg.budget_candidates = j.value("budget_candidates", std::size_t{500});
    cfg.seed = j.value("seed", env_seed_default());
    cfg.db_addr = j.value("db_addr", "");
    cfg.eval_addrs = j.value("eval_addrs", std::vector<std::string>{});
    return cfg;
}

RunConfig RunConfig::load_file(const std::string& path) {
    return from_json_text(read_file(path));
}

std::string RunConfig::to_json() const {
    json j;
    j["code"] = {{"spec", tanner::serialize_spec(code)}};
    j["protocol"] = json::object();
    j["protocol"]["contexts"] = json::array();
    for (const auto& c : protocol.contexts)
        j["protocol"]["contexts"].push_back(
            {{"n_prb", c.n_prb}, {"mcs_index", c.mcs_index}, {"snr_db", c.snr_db}});
    j["protocol"]["n_tbs"] = protocol.n_tbs;
    j["protocol"]["tb_batch_seed"] = protocol.tb_batch_seed;
    j["protocol"]["max_iters"] = protocol.max_iters;
    j["protocol"]["clip"] = protocol.clip;
    j["islands"] = islands;
    j["seed_program"] = seed_program;
    j["mutator"] = {{"mode", mutator.mode == services::MutatorConfig::Mode::Llm ? "llm" : "mock"},
                    {"examples_per_prompt", mutator.examples_per_prompt}};
    j["sampling"] = {{"t0", sampling.t0},
                     {"period", sampling.period},
                     {"length_lambda", sampling.length_lambda}};
    j["reset"] = {{"period", reset.period}, {"fraction", reset.fraction}};
    j["budget_candidates"] = budget_candidates;
    j["seed"] = seed;
    return j.dump(2);
}

RunOutputs run_local_evolve(const RunConfig& config, const std::string& out_dir) {
    fs::create_directories(out_dir);
    RunOutputs out;
    out.event_log_path = (fs::path(out_dir) / "events.jsonl").string();
    out.trace_csv_path = (fs::path(out_dir) / "trace.csv").string();
    out.best_program_path = (fs::path(out_dir) / "best_program.txt").string();
    out.snapshot_path = (fs::path(out_dir) / "snapshot.json").string();
    out.manifest_path = (fs::path(out_dir) / "manifest.json").string();

    const scoring::Evaluator evaluator(config.protocol, config.code, config.phy_cfg,
                                       config.eval_budget);
    const std::string phash = evaluator.protocol_hash();
    // The run identity ignores the candidate budget so a run interrupted and
    // resumed with a larger budget keeps the same id.
    RunConfig id_cfg = config;
    id_cfg.budget_candidates = 0;
    const std::string run_id = kernelscript::sha256_hex(id_cfg.to_json()).substr(0, 16);

    const bool resume = fs::exists(out.event_log_path) && fs::file_size(out.event_log_path) > 0;
    evolution::Database db(config.islands, phash, config.seed, config.sampling, config.reset);
    if (resume) db.replay_file(out.event_log_path);
    db.attach_event_log(out.event_log_path);

    if (!resume) {
        const scoring::ScoreRecord seed_rec = evaluator.score_source(config.seed_program);
        for (std::size_t i = 0; i < config.islands; ++i)
            db.register_program(i, config.seed_program, seed_rec, phash);
        std::ofstream trace(out.trace_csv_path);
        trace << "# run_id=" << run_id << " seed=" << config.seed << " protocol=" << phash << '\n';
        trace << "candidate_index,score,best_so_far\n";
    }

    double best_so_far = -1e300;
    if (const auto s = db.stats(); s.global_best) best_so_far = s.global_best->score;

    // Candidate numbering is derived from register totals so a resumed run
    // continues the same deterministic (seed, index) stream.
    const std::size_t done = db.stats().total_evaluated - config.islands;
    std::ofstream trace(out.trace_csv_path, std::ios::app);

    for (std::size_t i = done + 1; i <= config.budget_candidates; ++i) {
        const std::size_t island = (i - 1) % config.islands;
        const auto sampled =
            db.sample(island, config.mutator.examples_per_prompt, derive_seed(config.seed, 3 * i));

        std::string candidate;
        if (config.mutator.mode == services::MutatorConfig::Mode::Mock) {
            candidate = services::mock_mutate(sampled, derive_seed(config.seed, 3 * i + 1));
        } else {
            const std::string prompt = services::render_prompt(
                config.mutator.prompt_template_path.empty()
                    ? "Improve the following check-node update heuristics.\n{{EXAMPLES}}"
                    : read_file(config.mutator.prompt_template_path),
                sampled);
            try {
                candidate = services::llm_mutate(config.mutator, prompt);
            } catch (const services::LlmTimeout&) {
                continue;  // skipped round
            } catch (const services::LlmBadResponse&) {
                continue;
            }
        }

        const scoring::ScoreRecord record = evaluator.score_source(candidate);
        db.register_program(island, candidate, record, phash);
        best_so_far = std::max(best_so_far, record.score);
        trace << i << ',' << record.score << ',' << best_so_far << '\n';
    }
    trace.flush();

    const auto s = db.stats();
    out.candidates_evaluated = s.total_evaluated - config.islands;
    if (s.global_best) {
        out.best_score = s.global_best->score;
        out.best_hash = s.global_best->content_hash;
        std::ofstream best(out.best_program_path);
        best << s.global_best->source;
    }
    db.write_snapshot_file(out.snapshot_path);

    json manifest;
    manifest["run_id"] = run_id;
    manifest["config"] = json::parse(config.to_json());
    manifest["code_spec_hash"] = kernelscript::sha256_hex(tanner::serialize_spec(config.code));
    manifest["protocol_hash"] = phash;
    manifest["seed"] = config.seed;
    manifest["out_dir"] = out_dir;
    manifest["end_time"] = std::chrono::duration_cast<std::chrono::seconds>(
                               std::chrono::system_clock::now().time_since_epoch())
                               .count();
    std::ofstream mf(out.manifest_path);
    mf << manifest.dump(2) << '\n';
    return out;
}

ReportSummary report_from_log(const std::string& event_log_path, const std::string& out_dir) {
    std::ifstream f(event_log_path);
    if (!f) throw CorruptLog("cannot open event log: " + event_log_path);
    fs::create_directories(out_dir);
    std::ofstream score_csv((fs::path(out_dir) / "score_trace.csv").string());
    std::ofstream island_csv((fs::path(out_dir) / "island_history.csv").string());
    score_csv << "candidate_index,score,best_so_far\n";
    island_csv << "event_index,island,score,accepted\n";

    ReportSummary sum;
    sum.best_score = -1e300;
    std::string line;
    std::size_t line_no = 0;
    std::size_t candidate_index = 0;
    double best_so_far = -1e300;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw CorruptLog("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (j.value("event", "") != "register") continue;
        ++candidate_index;
        ++sum.generated;
        const auto rec = scoring::ScoreRecord::from_json(j.at("record").dump());
        const bool accepted = j.value("accepted", false);
        if (accepted) ++sum.accepted;
        if (rec.catastrophic) ++sum.catastrophic;
        best_so_far = std::max(best_so_far, rec.score);
        score_csv << candidate_index << ',' << rec.score << ',' << best_so_far << '\n';
        island_csv << candidate_index << ',' << j.value("island", 0) << ',' << rec.score << ','
                   << (accepted ? 1 : 0) << '\n';
        if (accepted && rec.score > sum.best_score) {
            sum.best_score = rec.score;
            sum.best_source = j.value("source", "");
        }
    }
    sum.skipped = sum.generated - sum.accepted - sum.catastrophic;
    if (!sum.best_source.empty())
        sum.best_hash = kernelscript::sha256_hex(kernelscript::normalize(sum.best_source));
    return sum;
}

} // namespace ahd::run

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "ahd/errors.hpp"
#include "ahd/kernels.hpp"
#include "ahd/kernelscript.hpp"
#include "ahd/run.hpp"
#include "ahd/scoring.hpp"
#include "ahd/services.hpp"
#include "ahd/tanner.hpp"

namespace fs = std::filesystem;
using namespace ahd;

namespace {

std::uint64_t default_seed() {
    if (const char* s = std::getenv("AHD_SEED")) {
        try {
            return std::stoull(s);
        } catch (const std::exception&) {
        }
    }
    return 0;
}

std::vector<phy::Context> load_grid_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open grid file: " + path);
    std::vector<phy::Context> grid;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line.find("n_prb") != std::string::npos) continue;  // header
        std::istringstream ss(line);
        phy::Context c;
        char comma;
        if (ss >> c.n_prb >> comma >> c.mcs_index >> comma >> c.snr_db)
            grid.push_back(c);
        else
            throw Error("bad grid row: " + line);
    }
    if (grid.empty()) throw Error("grid file holds no contexts: " + path);
    return grid;
}

tanner::CodeSpec resolve_code(const std::string& code_file, std::size_t lift) {
    return code_file.empty() ? tanner::default_desk_spec(lift) : tanner::load_spec_file(code_file);
}

void write_manifest(const std::string& out_dir, const std::string& run_id,
                    const std::string& command, std::uint64_t seed, const nlohmann::json& extra) {
    nlohmann::json m;
    m["run_id"] = run_id;
    m["command"] = command;
    m["seed"] = seed;
    m["out_dir"] = out_dir;
    m["extra"] = extra;
    m["time"] = std::chrono::duration_cast<std::chrono::seconds>(
                    std::chrono::system_clock::now().time_since_epoch())
                    .count();
    std::ofstream f((fs::path(out_dir) / "manifest.json").string());
    f << m.dump(2) << '\n';
}

std::string make_run_id(const std::string& command, std::uint64_t seed,
                        const std::string& detail) {
    return kernelscript::sha256_hex(command + "|" + std::to_string(seed) + "|" + detail)
        .substr(0, 16);
}

int cmd_codegen(const std::string& out_dir, std::size_t lift, const std::string& code_file,
                std::uint64_t seed) {
    const tanner::CodeSpec spec = resolve_code(code_file, lift);
    const tanner::TannerGraph graph = tanner::build_code(spec);
    fs::create_directories(out_dir);
    const std::string run_id = make_run_id("codegen", seed, tanner::serialize_spec(spec));

    std::ofstream f((fs::path(out_dir) / "code.spec").string());
    f << tanner::serialize_spec(spec);
    const std::size_t rank = tanner::gf2_rank(tanner::expand_dense(spec));
    std::cout << "code: n=" << spec.n() << " k=" << spec.k() << " m=" << spec.m()
              << " Z=" << spec.lift << " edges=" << graph.edge_count() << " rank(H)=" << rank
              << '\n'
              << "wrote " << (fs::path(out_dir) / "code.spec").string() << '\n';
    write_manifest(out_dir, run_id, "codegen", seed,
                   {{"lift", spec.lift}, {"edges", graph.edge_count()}, {"rank", rank}});
    return 0;
}

int cmd_sweep(const std::string& out_dir, const std::string& grid_file,
              const std::string& code_file, std::size_t lift, const std::string& kernel_name,
              std::size_t tbs, std::uint64_t seed) {
    const auto grid = load_grid_csv(grid_file);
    const tanner::CodeSpec spec = resolve_code(code_file, lift);
    const tanner::TannerGraph graph = tanner::build_code(spec);
    const kernels::KernelPtr kernel = kernels::by_name(kernel_name);
    const auto results = scoring::sweep(grid, graph, *kernel, tbs, seed);

    fs::create_directories(out_dir);
    const std::string run_id = make_run_id("sweep", seed, grid_file + "|" + kernel_name);
    const std::string csv_path = (fs::path(out_dir) / "sweep.csv").string();
    std::ofstream csv(csv_path);
    csv << "# run_id=" << run_id << " seed=" << seed << " kernel=" << kernel_name
        << " tbs_per_point=" << tbs << '\n';
    csv << "n_prb,mcs_index,snr_db,success_fraction,mean_iterations,mean_ber\n";
    for (const auto& p : results)
        csv << p.ctx.n_prb << ',' << p.ctx.mcs_index << ',' << p.ctx.snr_db << ','
            << p.success_fraction << ',' << p.mean_iterations << ',' << p.mean_ber << '\n';
    std::cout << "wrote " << csv_path << " (" << results.size() << " contexts)\n";
    write_manifest(out_dir, run_id, "sweep", seed,
                   {{"kernel", kernel_name}, {"tbs_per_point", tbs}, {"points", results.size()}});
    return 0;
}

int cmd_bench(const std::string& out_dir, const std::vector<std::string>& kernel_names,
              std::size_t n_prb, std::size_t mcs, double snr, std::size_t trials, std::size_t tbs,
              const std::string& code_file, std::size_t lift, std::uint64_t seed) {
    const tanner::CodeSpec spec = resolve_code(code_file, lift);
    scoring::EvalProtocol protocol;
    protocol.contexts = {phy::Context{n_prb, mcs, snr}};
    protocol.n_tbs = tbs;
    protocol.tb_batch_seed = seed;
    const scoring::Evaluator evaluator(protocol, spec);

    std::vector<std::pair<std::string, kernels::KernelPtr>> ks;
    for (const auto& name : kernel_names) ks.emplace_back(name, kernels::by_name(name));
    const auto rows = scoring::compare_kernels(ks, evaluator, trials);

    fs::create_directories(out_dir);
    std::string joined;
    for (const auto& n : kernel_names) joined += n + ";";
    const std::string run_id = make_run_id("bench", seed, joined);
    const std::string csv_path = (fs::path(out_dir) / "bench.csv").string();
    std::ofstream csv(csv_path);
    csv << "# run_id=" << run_id << " seed=" << seed << " trials=" << trials << " tbs=" << tbs
        << '\n';
    csv << "kernel,context_id,catastrophic,decoded_mean,decoded_std,ber_mean,ber_std,"
           "iters_mean,iters_std\n";
    for (const auto& r : rows)
        csv << r.kernel << ',' << r.context_id << ',' << (r.catastrophic ? 1 : 0) << ','
            << r.decoded_mean << ',' << r.decoded_std << ',' << r.ber_mean << ',' << r.ber_std
            << ',' << r.iters_mean << ',' << r.iters_std << '\n';

    std::cout << "kernel                 decoded (mean±std)   ber (mean±std)      iters (mean±std)\n";
    for (const auto& r : rows) {
        std::ostringstream line;
        line.setf(std::ios::fixed);
        line.precision(4);
        line << r.kernel;
        for (std::size_t i = r.kernel.size(); i < 22; ++i) line << ' ';
        if (r.catastrophic)
            line << "catastrophic";
        else
            line << r.decoded_mean << " ± " << r.decoded_std << "   " << r.ber_mean << " ± "
                 << r.ber_std << "   " << r.iters_mean << " ± " << r.iters_std;
        std::cout << line.str() << '\n';
    }
    std::cout << "wrote " << csv_path << '\n';
    write_manifest(out_dir, run_id, "bench", seed,
                   {{"kernels", kernel_names}, {"trials", trials}, {"tbs", tbs}});
    return 0;
}

int cmd_evolve(const std::string& out_dir, const std::string& config_file, const std::string& mode,
               std::size_t budget, std::uint64_t seed, bool seed_given, bool budget_given) {
    run::RunConfig cfg =
        config_file.empty() ? run::RunConfig{} : run::RunConfig::load_file(config_file);
    if (config_file.empty()) {
        cfg.code = tanner::default_desk_spec(16);
        cfg.seed_program = kernelscript::offset_min_sum_source(3.0);
        cfg.protocol.contexts = {phy::Context{1, 0, 3.0}};
    }
    if (seed_given) cfg.seed = seed;
    if (budget_given) cfg.budget_candidates = budget;

    if (mode == "local") {
        const auto out = run::run_local_evolve(cfg, out_dir);
        std::cout << "evaluated " << out.candidates_evaluated << " candidates\n"
                  << "best score " << out.best_score << " (" << out.best_hash.substr(0, 12)
                  << ")\n"
                  << "event log  " << out.event_log_path << '\n'
                  << "trace      " << out.trace_csv_path << '\n'
                  << "best       " << out.best_program_path << '\n';
        return 0;
    }

    // Distributed: drive sampler loops against the database and evaluator
    // services named in the config until the candidate budget is reached.
    if (cfg.db_addr.empty() || cfg.eval_addrs.empty())
        throw Error("distributed mode needs db_addr and eval_addrs in the config");
    std::atomic<bool> stop{false};
    std::vector<std::thread> workers;
    std::vector<services::SamplerStats> stats(cfg.eval_addrs.size());
    for (std::size_t i = 0; i < cfg.eval_addrs.size(); ++i)
        workers.emplace_back([&, i] {
            services::sampler_loop(cfg.mutator, cfg.db_addr, cfg.eval_addrs[i], cfg.islands,
                                   derive_seed(cfg.seed, i), stop, stats[i]);
        });

    httplib::Client db(cfg.db_addr);
    std::uint64_t total = 0;
    while (total < cfg.budget_candidates + cfg.islands) {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
        auto res = db.Get("/v1/stats");
        if (!res || res->status != 200) continue;
        const auto env = services::WireEnvelope::parse(res->body);
        total = nlohmann::json::parse(env.payload).value("total_evaluated", std::uint64_t{0});
    }
    stop = true;
    for (auto& w : workers) w.join();
    std::cout << "budget reached: " << total << " registrations at " << cfg.db_addr << '\n';
    return 0;
}

int cmd_report(const std::string& out_dir, const std::string& log_path) {
    const auto sum = run::report_from_log(log_path, out_dir);
    std::cout << "generated    " << sum.generated << '\n'
              << "accepted     " << sum.accepted << '\n'
              << "catastrophic " << sum.catastrophic << '\n'
              << "skipped      " << sum.skipped << '\n';
    if (!sum.best_source.empty()) {
        std::cout << "best score   " << sum.best_score << " (" << sum.best_hash.substr(0, 12)
                  << ")\n"
                  << "--- best program ---\n"
                  << sum.best_source;
        std::ofstream best((fs::path(out_dir) / "best_program.txt").string());
        best << sum.best_source;
    }
    std::cout << "wrote " << (fs::path(out_dir) / "score_trace.csv").string() << ", "
              << (fs::path(out_dir) / "island_history.csv").string() << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"QC-LDPC link simulator and check-node heuristic evolution"};
    app.require_subcommand(1);

    std::uint64_t seed = default_seed();
    std::string config_file;
    std::string out_dir = "out";
    app.add_option("--seed", seed, "global RNG seed (default: AHD_SEED or 0)");
    app.add_option("--config", config_file, "run config JSON file");
    app.add_option("--out-dir", out_dir, "output directory");

    auto* codegen = app.add_subcommand("codegen", "build a code and emit its spec file");
    std::size_t lift = 16;
    std::string code_file;
    codegen->add_option("--lift", lift, "lifting size Z for the built-in base matrix");
    codegen->add_option("--code", code_file, "existing code spec file to validate instead");

    auto* sweep = app.add_subcommand("sweep", "success/iteration heatmap over a context grid");
    std::string grid_file, kernel_name = "boxplus";
    std::size_t tbs = 200;
    sweep->add_option("--grid", grid_file, "context grid CSV: n_prb,mcs_index,snr_db")->required();
    sweep->add_option("--code", code_file, "code spec file (default: built-in rate-1/2)");
    sweep->add_option("--lift", lift, "lifting size when using the built-in code");
    sweep->add_option("--kernel", kernel_name, "check-node kernel name");
    sweep->add_option("--tbs", tbs, "transport blocks per grid point");

    auto* bench = app.add_subcommand("bench", "compare kernels at one context across trials");
    std::vector<std::string> kernel_names{"boxplus", "min-sum", "offset-min-sum", "discovered"};
    std::size_t n_prb = 1, mcs = 1, trials = 10, bench_tbs = 30;
    double snr = 2.0;
    bench->add_option("--kernels", kernel_names, "kernel names")->delimiter(',');
    bench->add_option("--n-prb", n_prb, "context: PRB count");
    bench->add_option("--mcs", mcs, "context: MCS index");
    bench->add_option("--snr", snr, "context: SNR in dB");
    bench->add_option("--trials", trials, "independent trials");
    bench->add_option("--tbs", bench_tbs, "transport blocks per trial");
    bench->add_option("--code", code_file, "code spec file");
    bench->add_option("--lift", lift, "lifting size when using the built-in code");

    auto* evolve = app.add_subcommand("evolve", "run the heuristic evolution loop");
    std::string mode = "local";
    std::size_t budget = 500;
    evolve->add_option("--mode", mode, "local or distributed")
        ->check(CLI::IsMember({"local", "distributed"}));
    auto* budget_opt = evolve->add_option("--budget", budget, "candidate budget");

    auto* report = app.add_subcommand("report", "digest an evolution event log");
    std::string log_path;
    report->add_option("--log", log_path, "event log (JSON lines)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (codegen->parsed()) return cmd_codegen(out_dir, lift, code_file, seed);
        if (sweep->parsed())
            return cmd_sweep(out_dir, grid_file, code_file, lift, kernel_name, tbs, seed);
        if (bench->parsed())
            return cmd_bench(out_dir, kernel_names, n_prb, mcs, snr, trials, bench_tbs, code_file,
                             lift, seed);
        if (evolve->parsed())
            return cmd_evolve(out_dir, config_file, mode, budget, seed,
                              app.count("--seed") > 0 || std::getenv("AHD_SEED") != nullptr,
                              budget_opt->count() > 0);
        if (report->parsed()) return cmd_report(out_dir, log_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}

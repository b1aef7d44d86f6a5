#include "ahd/services.hpp"

#include <chrono>
#include <deque>
#include <condition_variable>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "ahd/kernelscript.hpp"

namespace ahd::services {

using nlohmann::json;

// --- envelope -----------------------------------------------------------------

namespace {

const std::vector<std::string> kKnownKinds = {
    "sample_request",       "sample_response", "candidate_submission",
    "score_report",         "reset_command",   "stats_response",
    "register_response",    "health",          "error",
};

} // namespace

std::string WireEnvelope::to_json() const {
    json j;
    j["protocol_version"] = kProtocolVersion;
    j["kind"] = kind;
    j["payload"] = json::parse(payload.empty() ? "{}" : payload);
    if (!idempotency_key.empty()) j["idempotency_key"] = idempotency_key;
    return j.dump();
}

WireEnvelope WireEnvelope::parse(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("malformed envelope: ") + e.what());
    }
    if (j.value("protocol_version", "") != kProtocolVersion)
        throw Error("unsupported protocol version");
    WireEnvelope env;
    env.kind = j.value("kind", "");
    if (std::find(kKnownKinds.begin(), kKnownKinds.end(), env.kind) == kKnownKinds.end())
        throw Error("unknown envelope kind: " + env.kind);
    env.payload = j.value("payload", json::object()).dump();
    env.idempotency_key = j.value("idempotency_key", "");
    return env;
}

// --- mutators -----------------------------------------------------------------

std::string render_prompt(const std::string& template_text,
                          const std::vector<evolution::StoredProgram>& examples) {
    std::ostringstream ex;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        ex << "# candidate " << i << " (score " << examples[i].score << ")\n"
           << examples[i].source << '\n';
    }
    std::string out = template_text;
    const std::string marker = "{{EXAMPLES}}";
    const auto pos = out.find(marker);
    if (pos != std::string::npos)
        out.replace(pos, marker.size(), ex.str());
    else
        out += "\n" + ex.str();
    return out;
}

std::string llm_mutate(const MutatorConfig& config, const std::string& prompt) {
    // endpoint form: http://host:port/path
    const auto scheme_end = config.endpoint.find("://");
    if (scheme_end == std::string::npos) throw LlmBadResponse("bad endpoint URL");
    const auto path_start = config.endpoint.find('/', scheme_end + 3);
    const std::string base = config.endpoint.substr(0, path_start);
    const std::string path =
        path_start == std::string::npos ? "/v1/chat/completions" : config.endpoint.substr(path_start);

    httplib::Client client(base);
    client.set_connection_timeout(std::chrono::milliseconds(config.timeout_ms));
    client.set_read_timeout(std::chrono::milliseconds(config.timeout_ms));
    httplib::Headers headers;
    if (!config.api_key.empty()) headers.emplace("Authorization", "Bearer " + config.api_key);

    json body;
    body["model"] = config.model;
    body["messages"] = json::array({{{"role", "user"}, {"content", prompt}}});
    const auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) throw LlmTimeout("no response from LLM endpoint");
    if (res->status != 200)
        throw LlmBadResponse("LLM endpoint returned HTTP " + std::to_string(res->status));
    try {
        const json j = json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw LlmBadResponse(std::string("unparseable LLM response: ") + e.what());
    }
}

std::string mock_mutate(const std::vector<evolution::StoredProgram>& sampled, std::uint64_t seed) {
    if (sampled.empty()) throw Error("mock mutator needs at least one sampled program");
    const kernelscript::KernelProgram best = kernelscript::parse(sampled.back().source);
    kernelscript::MutatePolicy policy;
    if (sampled.size() > 1) policy.donor = kernelscript::parse(sampled.front().source);
    return kernelscript::mutate(best, seed, policy).source;
}

// --- database service -----------------------------------------------------------

struct DbService::Impl {
    httplib::Server server;
    std::thread thread;
    std::atomic<bool> resetting{false};
};

DbService::DbService(evolution::Database& db, std::string bind_host, int port)
    : impl_(std::make_unique<Impl>()), db_(db), host_(std::move(bind_host)), port_(port) {}

DbService::~DbService() { stop(); }

std::string DbService::address() const { return "http://" + host_ + ":" + std::to_string(port_); }

void DbService::start() {
    auto& server = impl_->server;

    server.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
        WireEnvelope env{"health", R"({"status":"ok"})", ""};
        res.set_content(env.to_json(), "application/json");
    });

    server.Get("/v1/sample", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            const std::size_t island = std::stoul(req.get_param_value("island"));
            const std::size_t count = std::stoul(req.get_param_value("count"));
            const std::uint64_t seed = std::stoull(req.get_param_value("seed"));
            const auto programs = db_.sample(island, count, seed);
            json payload;
            payload["programs"] = json::array();
            for (const auto& p : programs)
                payload["programs"].push_back(
                    {{"source", p.source}, {"hash", p.content_hash}, {"score", p.score}});
            WireEnvelope env{"sample_response", payload.dump(), ""};
            res.set_content(env.to_json(), "application/json");
        } catch (const UnknownIsland& e) {
            res.status = 404;
            res.set_content(WireEnvelope{"error", json{{"error", e.what()}}.dump(), ""}.to_json(),
                            "application/json");
        } catch (const EmptyIsland& e) {
            res.status = 404;
            res.set_content(WireEnvelope{"error", json{{"error", e.what()}}.dump(), ""}.to_json(),
                            "application/json");
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(WireEnvelope{"error", json{{"error", e.what()}}.dump(), ""}.to_json(),
                            "application/json");
        }
    });

    server.Post("/v1/register", [this](const httplib::Request& req, httplib::Response& res) {
        if (impl_->resetting.load()) {
            res.status = 503;
            return;
        }
        try {
            const WireEnvelope env = WireEnvelope::parse(req.body);
            if (env.kind != "score_report") throw Error("expected score_report envelope");
            const json payload = json::parse(env.payload);
            const auto record = scoring::ScoreRecord::from_json(payload.at("record").dump());
            const bool accepted = db_.register_program(
                payload.at("island").get<std::size_t>(), payload.at("source").get<std::string>(),
                record, payload.value("protocol_hash", ""));
            WireEnvelope out{"register_response", json{{"accepted", accepted}}.dump(),
                             env.idempotency_key};
            res.set_content(out.to_json(), "application/json");
        } catch (const UnknownIsland& e) {
            res.status = 404;
            res.set_content(WireEnvelope{"error", json{{"error", e.what()}}.dump(), ""}.to_json(),
                            "application/json");
        } catch (const ProtocolMismatch& e) {
            res.status = 409;
            res.set_content(WireEnvelope{"error", json{{"error", e.what()}}.dump(), ""}.to_json(),
                            "application/json");
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(WireEnvelope{"error", json{{"error", e.what()}}.dump(), ""}.to_json(),
                            "application/json");
        }
    });

    server.Post("/v1/reset", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            impl_->resetting = true;
            std::uint64_t seed = 0;
            if (!req.body.empty()) {
                const WireEnvelope env = WireEnvelope::parse(req.body);
                seed = json::parse(env.payload).value("seed", 0ULL);
            }
            const auto entries = db_.genetic_reset(seed);
            impl_->resetting = false;
            json payload;
            payload["entries"] = json::array();
            for (const auto& e : entries)
                payload["entries"].push_back({{"reset_island", e.reset_island},
                                              {"donor_island", e.donor_island},
                                              {"seed_hash", e.seed_hash}});
            WireEnvelope out{"stats_response", payload.dump(), ""};
            res.set_content(out.to_json(), "application/json");
        } catch (const std::exception& e) {
            impl_->resetting = false;
            res.status = 400;
            res.set_content(WireEnvelope{"error", json{{"error", e.what()}}.dump(), ""}.to_json(),
                            "application/json");
        }
    });

    server.Get("/v1/stats", [this](const httplib::Request&, httplib::Response& res) {
        const auto s = db_.stats();
        json payload;
        payload["total_evaluated"] = s.total_evaluated;
        payload["catastrophic"] = s.catastrophic_count;
        payload["accepted"] = s.accepted_count;
        payload["islands"] = json::array();
        for (const auto& isl : s.islands)
            payload["islands"].push_back({{"id", isl.id},
                                          {"program_count", isl.program_count},
                                          {"best_score", isl.best_score},
                                          {"cluster_count", isl.cluster_count}});
        if (s.global_best)
            payload["global_best"] = {{"hash", s.global_best->content_hash},
                                      {"score", s.global_best->score},
                                      {"source", s.global_best->source}};
        WireEnvelope env{"stats_response", payload.dump(), ""};
        res.set_content(env.to_json(), "application/json");
    });

    if (port_ == 0) {
        port_ = server.bind_to_any_port(host_);
        impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    } else {
        impl_->thread = std::thread([this] { impl_->server.listen(host_, port_); });
    }
    server.wait_until_ready();
}

void DbService::stop() {
    if (impl_->thread.joinable()) {
        impl_->server.stop();
        impl_->thread.join();
    }
}

// --- evaluator service -------------------------------------------------------------

struct EvaluatorService::Impl {
    const scoring::Evaluator& evaluator;
    std::string db_addr;
    std::string host;
    int port;
    httplib::Server server;
    std::thread listen_thread;
    std::thread work_thread;
    std::deque<json> queue;
    std::mutex mu;
    std::condition_variable cv;
    std::atomic<bool> stopping{false};
    std::atomic<std::uint64_t> evaluated{0};

    Impl(const scoring::Evaluator& ev, std::string db, std::string h, int p)
        : evaluator(ev), db_addr(std::move(db)), host(std::move(h)), port(p) {}

    void post_score(const json& submission, const scoring::ScoreRecord& record) {
        json payload;
        payload["island"] = submission.value("island", 0);
        payload["source"] = submission.value("source", "");
        payload["record"] = json::parse(record.to_json());
        payload["protocol_hash"] = evaluator.protocol_hash();
        WireEnvelope env{"score_report", payload.dump(),
                         kernelscript::sha256_hex(payload.value("source", ""))};
        // Retry with backoff: idempotent register makes duplicates safe.
        int delay_ms = 50;
        for (int attempt = 0; attempt < 8 && !stopping; ++attempt) {
            httplib::Client client(db_addr);
            client.set_connection_timeout(std::chrono::seconds(5));
            const auto res = client.Post("/v1/register", env.to_json(), "application/json");
            if (res && (res->status == 200 || res->status == 404 || res->status == 409)) return;
            std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
            delay_ms = std::min(delay_ms * 2, 2000);
        }
    }

    void work() {
        while (true) {
            json submission;
            {
                std::unique_lock lock(mu);
                cv.wait(lock, [this] { return stopping || !queue.empty(); });
                if (stopping && queue.empty()) return;
                submission = std::move(queue.front());
                queue.pop_front();
            }
            const scoring::ScoreRecord record =
                evaluator.score_source(submission.value("source", ""));
            post_score(submission, record);
            ++evaluated;
        }
    }
};

EvaluatorService::EvaluatorService(const scoring::Evaluator& evaluator, std::string db_addr,
                                   std::string bind_host, int port)
    : impl_(std::make_unique<Impl>(evaluator, std::move(db_addr), std::move(bind_host), port)) {}

EvaluatorService::~EvaluatorService() { stop(); }

std::string EvaluatorService::address() const {
    return "http://" + impl_->host + ":" + std::to_string(impl_->port);
}

std::uint64_t EvaluatorService::evaluated_count() const { return impl_->evaluated.load(); }

int EvaluatorService::port() const { return impl_->port; }

void EvaluatorService::start() {
    auto& server = impl_->server;
    server.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(WireEnvelope{"health", R"({"status":"ok"})", ""}.to_json(),
                        "application/json");
    });
    server.Post("/v1/candidate", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            const WireEnvelope env = WireEnvelope::parse(req.body);
            if (env.kind != "candidate_submission") throw Error("expected candidate_submission");
            {
                std::lock_guard lock(impl_->mu);
                impl_->queue.push_back(json::parse(env.payload));
            }
            impl_->cv.notify_one();
            res.set_content(WireEnvelope{"health", R"({"status":"queued"})", ""}.to_json(),
                            "application/json");
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(WireEnvelope{"error", json{{"error", e.what()}}.dump(), ""}.to_json(),
                            "application/json");
        }
    });

    if (impl_->port == 0) {
        impl_->port = server.bind_to_any_port(impl_->host);
        impl_->listen_thread = std::thread([this] { impl_->server.listen_after_bind(); });
    } else {
        impl_->listen_thread = std::thread([this] { impl_->server.listen(impl_->host, impl_->port); });
    }
    server.wait_until_ready();
    impl_->work_thread = std::thread([this] { impl_->work(); });
}

void EvaluatorService::stop() {
    if (impl_->listen_thread.joinable()) {
        impl_->server.stop();
        impl_->listen_thread.join();
    }
    if (impl_->work_thread.joinable()) {
        impl_->stopping = true;
        impl_->cv.notify_all();
        impl_->work_thread.join();
    }
}

// --- sampler -------------------------------------------------------------------

bool sampler_round(const MutatorConfig& config, const std::string& db_addr,
                   const std::string& eval_addr, std::size_t island, std::uint64_t round_seed,
                   SamplerStats& stats) {
    ++stats.rounds;
    httplib::Client db(db_addr);
    db.set_connection_timeout(std::chrono::seconds(5));
    const auto res = db.Get("/v1/sample?island=" + std::to_string(island) +
                            "&count=" + std::to_string(config.examples_per_prompt) +
                            "&seed=" + std::to_string(round_seed));
    if (!res || res->status != 200) {
        ++stats.transport_failures;
        return false;
    }

    std::vector<evolution::StoredProgram> sampled;
    try {
        const WireEnvelope env = WireEnvelope::parse(res->body);
        const json payload = json::parse(env.payload);
        for (const auto& p : payload.at("programs")) {
            evolution::StoredProgram sp;
            sp.source = p.at("source").get<std::string>();
            sp.content_hash = p.value("hash", "");
            sp.score = p.value("score", 0.0);
            sampled.push_back(std::move(sp));
        }
    } catch (const std::exception&) {
        ++stats.transport_failures;
        return false;
    }
    if (sampled.empty()) return false;

    std::string candidate;
    if (config.mode == MutatorConfig::Mode::Mock) {
        try {
            candidate = mock_mutate(sampled, round_seed);
        } catch (const Error&) {
            candidate = sampled.back().source;  // degraded round, resubmit best
        }
    } else {
        std::string template_text = "Improve the following check-node update heuristics.\n{{EXAMPLES}}";
        if (!config.prompt_template_path.empty()) {
            std::ifstream f(config.prompt_template_path);
            if (f) {
                std::ostringstream ss;
                ss << f.rdbuf();
                template_text = ss.str();
            }
        }
        try {
            candidate = llm_mutate(config, render_prompt(template_text, sampled));
        } catch (const LlmTimeout&) {
            ++stats.llm_failures;
            return false;
        } catch (const LlmBadResponse&) {
            ++stats.llm_failures;
            return false;
        }
    }

    // Unparseable candidates are submitted as-is: the evaluator records
    // them catastrophic, keeping throughput accounting honest.
    json payload;
    payload["island"] = island;
    payload["source"] = candidate;
    WireEnvelope env{"candidate_submission", payload.dump(), kernelscript::sha256_hex(candidate)};
    httplib::Client eval(eval_addr);
    eval.set_connection_timeout(std::chrono::seconds(5));
    const auto sub = eval.Post("/v1/candidate", env.to_json(), "application/json");
    if (!sub || sub->status != 200) {
        ++stats.transport_failures;
        return false;
    }
    return true;
}

void sampler_loop(const MutatorConfig& config, const std::string& db_addr,
                  const std::string& eval_addr, std::size_t island_count, std::uint64_t seed,
                  const std::atomic<bool>& stop, SamplerStats& stats) {
    std::uint64_t round = 0;
    int backoff_ms = 50;
    while (!stop) {
        const std::size_t island = round % std::max<std::size_t>(island_count, 1);
        const bool ok =
            sampler_round(config, db_addr, eval_addr, island, derive_seed(seed, round), stats);
        ++round;
        if (ok) {
            backoff_ms = 50;
        } else {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms = std::min(backoff_ms * 2, 5000);
        }
    }
}

} // namespace ahd::services

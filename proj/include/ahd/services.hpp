#ifndef AHD_SERVICES_HPP
#define AHD_SERVICES_HPP

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "ahd/evolution.hpp"
#include "ahd/scoring.hpp"

namespace ahd::services {

constexpr const char* kProtocolVersion = "1";

/// Versioned JSON envelope carried by every HTTP message.
struct WireEnvelope {
    std::string kind;            // sample_request, sample_response, candidate_submission,
                                 // score_report, reset_command, stats_response
    std::string payload;         // kind-specific JSON object (serialized)
    std::string idempotency_key; // content hash where applicable

    std::string to_json() const;
    static WireEnvelope parse(const std::string& text);  // throws Error on bad version/kind
};

struct MutatorConfig {
    enum class Mode { Llm, Mock };
    Mode mode = Mode::Mock;
    std::string endpoint;           // chat-completions style URL, llm mode
    std::string model;
    std::string prompt_template_path;
    std::size_t examples_per_prompt = 2;
    std::uint64_t timeout_ms = 30'000;
    std::string api_key;            // bearer token, optional
};

struct LlmTimeout : Error { using Error::Error; };
struct LlmBadResponse : Error { using Error::Error; };

/// Chat-completions POST; returns the first choice's message content.
std::string llm_mutate(const MutatorConfig& config, const std::string& prompt);

/// Deterministic stand-in: mutate the best (last) sampled program.
std::string mock_mutate(const std::vector<evolution::StoredProgram>& sampled, std::uint64_t seed);

std::string render_prompt(const std::string& template_text,
                          const std::vector<evolution::StoredProgram>& examples);

/// Database master HTTP service over an evolution::Database.
class DbService {
public:
    DbService(evolution::Database& db, std::string bind_host, int port);
    ~DbService();

    void start();  // serves on a background thread until stop()
    void stop();
    int port() const { return port_; }
    std::string address() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    evolution::Database& db_;
    std::string host_;
    int port_;
};

/// Evaluator worker: accepts candidate submissions over HTTP, scores them
/// under the sandbox budget, POSTs score reports to the database.
class EvaluatorService {
public:
    EvaluatorService(const scoring::Evaluator& evaluator, std::string db_addr,
                     std::string bind_host, int port);
    ~EvaluatorService();

    void start();
    void stop();
    int port() const;
    std::string address() const;
    std::uint64_t evaluated_count() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct SamplerStats {
    std::uint64_t rounds = 0;
    std::uint64_t llm_failures = 0;
    std::uint64_t transport_failures = 0;
};

/// One sampler round: sample -> prompt -> mutate -> submit. Returns false
/// when nothing could be submitted (caller backs off).
bool sampler_round(const MutatorConfig& config, const std::string& db_addr,
                   const std::string& eval_addr, std::size_t island, std::uint64_t round_seed,
                   SamplerStats& stats);

/// Continuous worker loop with exponential backoff on transport errors.
void sampler_loop(const MutatorConfig& config, const std::string& db_addr,
                  const std::string& eval_addr, std::size_t island_count, std::uint64_t seed,
                  const std::atomic<bool>& stop, SamplerStats& stats);

} // namespace ahd::services

#endif

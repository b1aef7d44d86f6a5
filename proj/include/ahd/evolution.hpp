#ifndef AHD_EVOLUTION_HPP
#define AHD_EVOLUTION_HPP

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ahd/scoring.hpp"

namespace ahd::evolution {

struct SamplingParams {
    double t0 = 1.0;              // initial softmax temperature
    std::size_t period = 1000;    // temperature schedule period P
    double length_lambda = 200.0; // within-cluster length bias
};

struct ResetPolicy {
    std::size_t period = 5000;  // registrations between genetic resets
    double fraction = 0.5;      // share of islands re-seeded
};

struct StoredProgram {
    std::string source;        // normalized
    std::string content_hash;
    double score = 0.0;
    scoring::ScoreRecord record;
};

struct Cluster {
    double score = 0.0;
    std::vector<StoredProgram> programs;  // deduplicated by content_hash
};

struct ResetEntry {
    std::size_t reset_island = 0;
    std::size_t donor_island = 0;
    std::string seed_hash;
};

struct Snapshot {
    struct IslandInfo {
        std::size_t id = 0;
        std::size_t program_count = 0;
        double best_score = 0.0;
        std::size_t cluster_count = 0;
    };
    std::vector<IslandInfo> islands;
    std::optional<StoredProgram> global_best;
    std::uint64_t total_evaluated = 0;
    std::uint64_t catastrophic_count = 0;
    std::uint64_t accepted_count = 0;
};

/// Island-model program database. Writers (register / reset) are
/// serialized; readers see consistent snapshots.
class Database {
public:
    Database(std::size_t island_count, std::string protocol_hash, std::uint64_t seed,
             SamplingParams sampling = {}, ResetPolicy reset = {});

    /// Returns accepted (false for duplicates and catastrophic records).
    /// Auto-triggers a genetic reset every reset.period registrations.
    bool register_program(std::size_t island_id, const std::string& source,
                          const scoring::ScoreRecord& record, const std::string& protocol_hash);

    /// Temperature-controlled cluster sampling, ascending score order
    /// (best exemplar last, for best-shot prompting).
    std::vector<StoredProgram> sample(std::size_t island_id, std::size_t k,
                                      std::uint64_t rng_seed) const;

    std::vector<ResetEntry> genetic_reset(std::uint64_t rng_seed);

    Snapshot stats() const;
    std::size_t island_count() const { return islands_.size(); }
    const std::string& protocol_hash() const { return protocol_hash_; }
    const std::vector<ResetEntry>& reset_history() const { return reset_history_; }

    /// Append-only JSON-lines event log; replay rebuilds identical state.
    void attach_event_log(const std::string& path);
    /// Rebuild state from an event log. Call on a freshly constructed
    /// database, before attaching a log for writing.
    void replay_file(const std::string& event_log_path);

    void write_snapshot_file(const std::string& path) const;

private:
    struct Island {
        std::map<long long, Cluster> clusters;  // key: score rounded to 6 decimals
        std::set<std::string> hashes;
        std::size_t program_count = 0;
    };

    static long long score_key(double score);
    bool register_locked(std::size_t island_id, const std::string& source,
                         const scoring::ScoreRecord& record, const std::string& protocol_hash);
    std::vector<ResetEntry> reset_locked(std::uint64_t rng_seed);
    void log_event(const std::string& line);

    mutable std::mutex mu_;
    std::vector<Island> islands_;
    std::string protocol_hash_;
    std::uint64_t seed_;
    SamplingParams sampling_;
    ResetPolicy reset_;
    std::uint64_t total_evaluated_ = 0;
    std::uint64_t catastrophic_ = 0;
    std::uint64_t accepted_ = 0;
    std::vector<ResetEntry> reset_history_;
    std::string event_log_path_;
    bool replaying_ = false;
};

} // namespace ahd::evolution

#endif

#include "ahd/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "ahd/errors.hpp"
#include "ahd/kernelscript.hpp"

namespace ahd::evolution {

Database::Database(std::size_t island_count, std::string protocol_hash, std::uint64_t seed,
                   SamplingParams sampling, ResetPolicy reset)
    : islands_(island_count),
      protocol_hash_(std::move(protocol_hash)),
      seed_(seed),
      sampling_(sampling),
      reset_(reset) {
    if (island_count == 0) throw Error("need at least one island");
}

long long Database::score_key(double score) {
    return static_cast<long long>(std::llround(score * 1e6));
}

bool Database::register_program(std::size_t island_id, const std::string& source,
                                const scoring::ScoreRecord& record,
                                const std::string& protocol_hash) {
    std::lock_guard lock(mu_);
    return register_locked(island_id, source, record, protocol_hash);
}

bool Database::register_locked(std::size_t island_id, const std::string& source,
                               const scoring::ScoreRecord& record,
                               const std::string& protocol_hash) {
    if (island_id >= islands_.size()) throw UnknownIsland("island " + std::to_string(island_id));
    if (!protocol_hash.empty() && protocol_hash != protocol_hash_)
        throw ProtocolMismatch("score produced under a different protocol");

    ++total_evaluated_;
    bool accepted = false;
    std::string normalized, hash;
    if (record.catastrophic) {
        ++catastrophic_;
    } else {
        // Normalize defensively; unparseable non-catastrophic records are a
        // caller bug and rejected as catastrophic accounting.
        try {
            normalized = kernelscript::normalize(source);
            hash = kernelscript::sha256_hex(normalized);
        } catch (const Error&) {
            ++catastrophic_;
            normalized.clear();
        }
        if (!normalized.empty()) {
            Island& isl = islands_[island_id];
            if (!isl.hashes.contains(hash)) {
                StoredProgram p{normalized, hash, record.score, record};
                isl.clusters[score_key(record.score)].score = record.score;
                isl.clusters[score_key(record.score)].programs.push_back(std::move(p));
                isl.hashes.insert(hash);
                ++isl.program_count;
                ++accepted_;
                accepted = true;
            }
        }
    }

    if (!replaying_ && !event_log_path_.empty()) {
        nlohmann::json j;
        j["event"] = "register";
        j["island"] = island_id;
        j["source"] = source;
        j["record"] = nlohmann::json::parse(record.to_json());
        j["accepted"] = accepted;
        log_event(j.dump());
    }

    if (reset_.period > 0 && total_evaluated_ % reset_.period == 0 && islands_.size() >= 2)
        reset_locked(derive_seed(seed_, total_evaluated_));
    return accepted;
}

std::vector<StoredProgram> Database::sample(std::size_t island_id, std::size_t k,
                                            std::uint64_t rng_seed) const {
    std::lock_guard lock(mu_);
    if (island_id >= islands_.size()) throw UnknownIsland("island " + std::to_string(island_id));
    const Island& isl = islands_[island_id];
    if (isl.program_count == 0) throw EmptyIsland("island " + std::to_string(island_id));

    std::mt19937_64 rng(rng_seed);
    const double n = static_cast<double>(isl.program_count);
    const double t = sampling_.t0 *
                     (1.0 - std::fmod(n, static_cast<double>(sampling_.period)) /
                                static_cast<double>(sampling_.period));

    // Standardize scores by the island max before the softmax.
    double max_score = -1e300;
    for (const auto& [key, c] : isl.clusters) max_score = std::max(max_score, c.score);

    std::set<const StoredProgram*> drawn;
    std::vector<StoredProgram> out;
    for (std::size_t draw = 0; draw < k; ++draw) {
        // Cluster choice: softmax over standardized scores.
        std::vector<const Cluster*> clusters;
        std::vector<double> weights;
        for (const auto& [key, c] : isl.clusters) {
            clusters.push_back(&c);
            weights.push_back(t > 1e-12 ? std::exp((c.score - max_score) / t)
                                        : (c.score == max_score ? 1.0 : 0.0));
        }
        std::discrete_distribution<std::size_t> cluster_dist(weights.begin(), weights.end());
        const Cluster& cluster = *clusters[cluster_dist(rng)];

        // Within the cluster: favor shorter sources, avoid repeats while possible.
        std::vector<const StoredProgram*> pool;
        std::vector<double> pw;
        for (const auto& p : cluster.programs) {
            if (drawn.contains(&p) && drawn.size() < isl.program_count) continue;
            pool.push_back(&p);
            pw.push_back(std::exp(-static_cast<double>(p.source.size()) / sampling_.length_lambda));
        }
        if (pool.empty()) {
            for (const auto& p : cluster.programs) {
                pool.push_back(&p);
                pw.push_back(
                    std::exp(-static_cast<double>(p.source.size()) / sampling_.length_lambda));
            }
        }
        std::discrete_distribution<std::size_t> prog_dist(pw.begin(), pw.end());
        const StoredProgram* chosen = pool[prog_dist(rng)];
        drawn.insert(chosen);
        out.push_back(*chosen);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const StoredProgram& a, const StoredProgram& b) { return a.score < b.score; });
    return out;
}

std::vector<ResetEntry> Database::genetic_reset(std::uint64_t rng_seed) {
    std::lock_guard lock(mu_);
    return reset_locked(rng_seed);
}

std::vector<ResetEntry> Database::reset_locked(std::uint64_t rng_seed) {
    if (islands_.size() < 2) return {};

    // Rank islands by best score; empty islands rank worst. Ties break by id.
    std::vector<std::size_t> order(islands_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto best_of = [&](std::size_t i) {
        const Island& isl = islands_[i];
        return isl.clusters.empty() ? -1e300 : isl.clusters.rbegin()->second.score;
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (best_of(a) != best_of(b)) return best_of(a) > best_of(b);
        return a < b;
    });

    const std::size_t reset_count =
        static_cast<std::size_t>(std::floor(reset_.fraction * static_cast<double>(islands_.size())));
    if (reset_count == 0 || reset_count >= islands_.size()) return {};

    const std::size_t survivors = islands_.size() - reset_count;
    std::mt19937_64 rng(rng_seed);
    std::vector<ResetEntry> entries;
    for (std::size_t r = 0; r < reset_count; ++r) {
        const std::size_t victim = order[survivors + r];
        const std::size_t donor = order[rng() % survivors];
        const Island& from = islands_[donor];
        if (from.clusters.empty()) continue;  // donor empty: nothing to seed with

        // Donor's best program: top score cluster, tie-break shortest source.
        const Cluster& top = from.clusters.rbegin()->second;
        const StoredProgram* seed_prog = &top.programs.front();
        for (const auto& p : top.programs)
            if (p.source.size() < seed_prog->source.size() ||
                (p.source.size() == seed_prog->source.size() &&
                 p.content_hash < seed_prog->content_hash))
                seed_prog = &p;

        Island fresh;
        fresh.clusters[score_key(seed_prog->score)].score = seed_prog->score;
        fresh.clusters[score_key(seed_prog->score)].programs.push_back(*seed_prog);
        fresh.hashes.insert(seed_prog->content_hash);
        fresh.program_count = 1;
        islands_[victim] = std::move(fresh);
        entries.push_back({victim, donor, seed_prog->content_hash});
    }

    reset_history_.insert(reset_history_.end(), entries.begin(), entries.end());
    if (!replaying_ && !event_log_path_.empty() && !entries.empty()) {
        nlohmann::json j;
        j["event"] = "reset";
        j["entries"] = nlohmann::json::array();
        for (const auto& e : entries)
            j["entries"].push_back(
                {{"reset_island", e.reset_island}, {"donor_island", e.donor_island}, {"seed_hash", e.seed_hash}});
        log_event(j.dump());
    }
    return entries;
}

Snapshot Database::stats() const {
    std::lock_guard lock(mu_);
    Snapshot s;
    s.total_evaluated = total_evaluated_;
    s.catastrophic_count = catastrophic_;
    s.accepted_count = accepted_;
    for (std::size_t i = 0; i < islands_.size(); ++i) {
        const Island& isl = islands_[i];
        Snapshot::IslandInfo info;
        info.id = i;
        info.program_count = isl.program_count;
        info.cluster_count = isl.clusters.size();
        info.best_score = isl.clusters.empty() ? 0.0 : isl.clusters.rbegin()->second.score;
        s.islands.push_back(info);
        for (const auto& [key, c] : isl.clusters)
            for (const auto& p : c.programs)
                if (!s.global_best || p.score > s.global_best->score ||
                    (p.score == s.global_best->score &&
                     p.source.size() < s.global_best->source.size()))
                    s.global_best = p;
    }
    return s;
}

void Database::attach_event_log(const std::string& path) {
    std::lock_guard lock(mu_);
    event_log_path_ = path;
}

void Database::log_event(const std::string& line) {
    std::ofstream f(event_log_path_, std::ios::app);
    f << line << '\n';
}

void Database::replay_file(const std::string& event_log_path) {
    std::lock_guard lock(mu_);
    if (total_evaluated_ != 0) throw Error("replay requires an empty database");
    replaying_ = true;
    std::ifstream f(event_log_path);
    if (!f) throw CorruptLog("cannot open event log: " + event_log_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw CorruptLog("line " + std::to_string(line_no) + ": " + e.what());
        }
        const std::string event = j.value("event", "");
        if (event == "register") {
            const auto rec = scoring::ScoreRecord::from_json(j.at("record").dump());
            register_locked(j.at("island").get<std::size_t>(), j.at("source").get<std::string>(),
                            rec, protocol_hash_);
        } else if (event == "reset" || event == "run") {
            // Resets replay deterministically from register cadence; run
            // headers carry no state.
        } else {
            throw CorruptLog("line " + std::to_string(line_no) + ": unknown event " + event);
        }
    }
    replaying_ = false;
}

void Database::write_snapshot_file(const std::string& path) const {
    const Snapshot s = stats();
    nlohmann::json j;
    j["total_evaluated"] = s.total_evaluated;
    j["catastrophic"] = s.catastrophic_count;
    j["accepted"] = s.accepted_count;
    j["islands"] = nlohmann::json::array();
    for (const auto& isl : s.islands)
        j["islands"].push_back({{"id", isl.id},
                                {"program_count", isl.program_count},
                                {"best_score", isl.best_score},
                                {"cluster_count", isl.cluster_count}});
    if (s.global_best)
        j["global_best"] = {{"hash", s.global_best->content_hash},
                            {"score", s.global_best->score},
                            {"source", s.global_best->source}};
    std::ofstream f(path);
    f << j.dump(2) << '\n';
}

} // namespace ahd::evolution

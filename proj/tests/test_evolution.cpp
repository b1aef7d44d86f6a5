#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ahd/errors.hpp"
#include "ahd/evolution.hpp"
#include "ahd/kernelscript.hpp"

using namespace ahd;
using namespace ahd::evolution;

namespace {

scoring::ScoreRecord record_with_score(double score) {
    scoring::ScoreRecord r;
    r.score = score;
    return r;
}

scoring::ScoreRecord catastrophic_record() {
    scoring::ScoreRecord r;
    r.catastrophic = 1;
    r.score = -1e9;
    return r;
}

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("registration, deduplication, and rejection") {
    Database db(2, "proto", 1);
    const std::string prog = "m = L\nreturn m";

    CHECK(db.register_program(0, prog, record_with_score(-50), "proto"));
    auto s = db.stats();
    CHECK(s.islands[0].program_count == 1);
    CHECK(s.islands[0].cluster_count == 1);
    CHECK(s.islands[0].best_score == -50);

    // Duplicate (even with different whitespace) is a no-op.
    CHECK_FALSE(db.register_program(0, "m=L\nreturn m", record_with_score(-50), "proto"));
    CHECK(db.stats().islands[0].program_count == 1);

    // Catastrophic is discarded but still counted as evaluated.
    CHECK_FALSE(db.register_program(0, "x = L / 0\nreturn x", catastrophic_record(), "proto"));
    s = db.stats();
    CHECK(s.islands[0].program_count == 1);
    CHECK(s.total_evaluated == 3);
    CHECK(s.catastrophic_count == 1);
    CHECK(s.accepted_count == 1);

    CHECK_THROWS_AS(db.register_program(9, prog, record_with_score(-1), "proto"), UnknownIsland);
    CHECK_THROWS_AS(db.register_program(0, prog, record_with_score(-1), "other"),
                    ProtocolMismatch);
}

TEST_CASE("sampling is biased, ordered, and replayable") {
    Database db(1, "proto", 2);
    db.register_program(0, "a = L + 1\nreturn a", record_with_score(-100), "proto");
    db.register_program(0, "b = L + 2\nreturn b", record_with_score(-10), "proto");
    db.register_program(0, "c = L + 3\nreturn c", record_with_score(-10), "proto");

    // Softmax gap e^90: the -10 cluster wins essentially always.
    int best_cluster = 0;
    for (std::uint64_t s = 0; s < 200; ++s)
        if (db.sample(0, 1, s)[0].score == -10) ++best_cluster;
    CHECK(best_cluster == 200);

    // Ascending score order, best exemplar last.
    const auto pair = db.sample(0, 2, 7);
    REQUIRE(pair.size() == 2);
    CHECK(pair.front().score <= pair.back().score);

    // Fixed seed replays the identical draw.
    const auto a = db.sample(0, 3, 99);
    const auto b = db.sample(0, 3, 99);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].content_hash == b[i].content_hash);

    Database empty(1, "proto", 3);
    CHECK_THROWS_AS(empty.sample(0, 1, 0), EmptyIsland);
}

TEST_CASE("single-cluster islands always sample that cluster") {
    Database db(1, "proto", 4);
    db.register_program(0, "m = L\nreturn m", record_with_score(-42), "proto");
    for (std::uint64_t s = 0; s < 20; ++s) CHECK(db.sample(0, 1, s)[0].score == -42);
}

TEST_CASE("genetic reset reseeds the weak half from survivors") {
    Database db(4, "proto", 5);
    // Island ranks: 2 (best), 0, 3, 1 (worst).
    db.register_program(2, "a = L + 1\nreturn a", record_with_score(-5), "proto");
    db.register_program(2, "aa = L + 9\nreturn aa", record_with_score(-25), "proto");
    db.register_program(0, "b = L + 2\nreturn b", record_with_score(-20), "proto");
    db.register_program(3, "c = L + 3\nreturn c", record_with_score(-60), "proto");
    db.register_program(1, "d = L + 4\nreturn d", record_with_score(-90), "proto");

    const auto entries = db.genetic_reset(123);
    REQUIRE(entries.size() == 2);
    for (const auto& e : entries) {
        CHECK((e.reset_island == 3 || e.reset_island == 1));
        CHECK((e.donor_island == 2 || e.donor_island == 0));
    }

    const auto s = db.stats();
    for (const auto& e : entries) {
        CHECK(s.islands[e.reset_island].program_count == 1);
        const double donor_best = s.islands[e.donor_island].best_score;
        CHECK(s.islands[e.reset_island].best_score == donor_best);
    }
    // Global best survives any reset.
    REQUIRE(s.global_best.has_value());
    CHECK(s.global_best->score == -5);
}

TEST_CASE("stats snapshots are internally consistent") {
    Database empty(2, "proto", 6);
    const auto s0 = empty.stats();
    CHECK(s0.total_evaluated == 0);
    CHECK_FALSE(s0.global_best.has_value());

    Database db(2, "proto", 7);
    db.register_program(0, "a = L + 1\nreturn a", record_with_score(-50), "proto");
    db.register_program(1, "b = L + 2\nreturn b", record_with_score(-30), "proto");
    const auto s = db.stats();
    REQUIRE(s.global_best.has_value());
    CHECK(s.global_best->score == -30);
    std::size_t total = 0;
    for (const auto& isl : s.islands) total += isl.program_count;
    CHECK(total == s.accepted_count);
}

TEST_CASE("global best is monotone across registrations and auto-resets") {
    ResetPolicy quick;
    quick.period = 10;
    Database db(4, "proto", 8, SamplingParams{}, quick);
    double best = -1e300;
    for (int i = 0; i < 60; ++i) {
        const double score = -1000 + 13.7 * (i % 17);
        db.register_program(i % 4, "v" + std::to_string(i) + " = L + 1\nreturn v" + std::to_string(i),
                            record_with_score(score), "proto");
        const auto s = db.stats();
        REQUIRE(s.global_best.has_value());
        CHECK(s.global_best->score >= best);
        best = s.global_best->score;
    }
    CHECK_FALSE(db.reset_history().empty());
}

TEST_CASE("event log replay rebuilds identical state") {
    const std::string log = tmp_path("ahd_test_replay.jsonl");
    std::remove(log.c_str());

    ResetPolicy quick;
    quick.period = 7;
    Database db(3, "proto", 9, SamplingParams{}, quick);
    db.attach_event_log(log);
    for (int i = 0; i < 25; ++i) {
        scoring::ScoreRecord r =
            (i % 5 == 4) ? catastrophic_record() : record_with_score(-500 + 11.0 * i);
        db.register_program(i % 3, "w" + std::to_string(i % 8) + " = L + 2\nreturn w" + std::to_string(i % 8),
                            r, "proto");
    }

    Database re(3, "proto", 9, SamplingParams{}, quick);
    re.replay_file(log);

    const std::string snap_a = tmp_path("ahd_snap_a.json");
    const std::string snap_b = tmp_path("ahd_snap_b.json");
    db.write_snapshot_file(snap_a);
    re.write_snapshot_file(snap_b);
    std::ifstream fa(snap_a), fb(snap_b);
    const std::string a((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::string b((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(a == b);
    CHECK(re.reset_history().size() == db.reset_history().size());
    std::remove(log.c_str());
    std::remove(snap_a.c_str());
    std::remove(snap_b.c_str());
}

TEST_CASE("corrupt logs name the offending line") {
    const std::string log = tmp_path("ahd_test_corrupt.jsonl");
    {
        std::ofstream f(log);
        f << R"({"event":"register","island":0,"source":"m = L\nreturn m","record":)"
          << record_with_score(-5).to_json() << R"(,"accepted":true})" << '\n';
        f << "this is not json\n";
    }
    Database db(1, "proto", 10);
    try {
        db.replay_file(log);
        FAIL("expected CorruptLog");
    } catch (const CorruptLog& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    std::remove(log.c_str());
}

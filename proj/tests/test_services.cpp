#include <doctest.h>

#include <chrono>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "ahd/errors.hpp"
#include "ahd/evolution.hpp"
#include "ahd/kernelscript.hpp"
#include "ahd/scoring.hpp"
#include "ahd/services.hpp"

using namespace ahd;
using namespace ahd::services;
using nlohmann::json;

namespace {

scoring::EvalProtocol tiny_protocol() {
    scoring::EvalProtocol p;
    p.contexts = {phy::Context{1, 0, 3.0}};
    p.n_tbs = 3;
    p.tb_batch_seed = 505;
    return p;
}

WireEnvelope register_envelope(std::size_t island, const std::string& source, double score,
                               const std::string& phash) {
    scoring::ScoreRecord r;
    r.score = score;
    json payload;
    payload["island"] = island;
    payload["source"] = source;
    payload["record"] = json::parse(r.to_json());
    payload["protocol_hash"] = phash;
    return WireEnvelope{"score_report", payload.dump(),
                        kernelscript::sha256_hex(kernelscript::normalize(source))};
}

} // namespace

TEST_CASE("wire envelopes validate version and kind") {
    const WireEnvelope env{"sample_request", R"({"island":0})", "abc"};
    const WireEnvelope back = WireEnvelope::parse(env.to_json());
    CHECK(back.kind == "sample_request");
    CHECK(back.payload == env.payload);
    CHECK(back.idempotency_key == "abc");

    json bad_version = json::parse(env.to_json());
    bad_version["protocol_version"] = "2";
    CHECK_THROWS_AS(WireEnvelope::parse(bad_version.dump()), Error);

    json bad_kind = json::parse(env.to_json());
    bad_kind["kind"] = "mystery";
    CHECK_THROWS_AS(WireEnvelope::parse(bad_kind.dump()), Error);

    CHECK_THROWS_AS(WireEnvelope::parse("not json"), Error);
}

TEST_CASE("database service round-trips programs over http") {
    evolution::Database db(2, "proto", 1);
    DbService svc(db, "127.0.0.1", 0);
    svc.start();
    httplib::Client client("127.0.0.1", svc.port());

    // Health first.
    auto health = client.Get("/v1/health");
    REQUIRE(health);
    CHECK(health->status == 200);

    // Register, then sample the same program back.
    const std::string src = "m = L\nreturn m";
    auto reg = client.Post("/v1/register", register_envelope(0, src, -40, "proto").to_json(),
                           "application/json");
    REQUIRE(reg);
    CHECK(reg->status == 200);
    CHECK(json::parse(WireEnvelope::parse(reg->body).payload)["accepted"] == true);

    auto dup = client.Post("/v1/register", register_envelope(0, src, -40, "proto").to_json(),
                           "application/json");
    REQUIRE(dup);
    CHECK(dup->status == 200);
    CHECK(json::parse(WireEnvelope::parse(dup->body).payload)["accepted"] == false);

    auto sample = client.Get("/v1/sample?island=0&count=1&seed=5");
    REQUIRE(sample);
    CHECK(sample->status == 200);
    const json programs = json::parse(WireEnvelope::parse(sample->body).payload)["programs"];
    REQUIRE(programs.size() == 1);
    CHECK(programs[0]["source"] == kernelscript::normalize(src));

    auto stats = client.Get("/v1/stats");
    REQUIRE(stats);
    const json s = json::parse(WireEnvelope::parse(stats->body).payload);
    CHECK(s["accepted"] == 1);
    CHECK(s["total_evaluated"] == 2);

    // Error mapping.
    CHECK(client.Get("/v1/sample?island=7&count=1&seed=1")->status == 404);
    CHECK(client.Post("/v1/register", register_envelope(0, src, -40, "other").to_json(),
                      "application/json")
              ->status == 409);
    CHECK(client.Post("/v1/register", "garbage", "application/json")->status == 400);

    auto reset = client.Post("/v1/reset", WireEnvelope{"reset_command", "{}", ""}.to_json(),
                             "application/json");
    REQUIRE(reset);
    CHECK(reset->status == 200);
    svc.stop();
}

TEST_CASE("evaluator service scores submissions and reports back") {
    const scoring::Evaluator evaluator(tiny_protocol(), tanner::default_desk_spec(8));
    evolution::Database db(1, evaluator.protocol_hash(), 2);

    DbService dbs(db, "127.0.0.1", 0);
    dbs.start();
    EvaluatorService ev(evaluator, "http://127.0.0.1:" + std::to_string(dbs.port()), "127.0.0.1",
                        0);
    ev.start();

    httplib::Client client("127.0.0.1", ev.port());
    json payload;
    payload["island"] = 0;
    payload["source"] = kernelscript::boxplus_source();
    auto res = client.Post("/v1/candidate",
                           WireEnvelope{"candidate_submission", payload.dump(), ""}.to_json(),
                           "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);

    for (int i = 0; i < 100 && db.stats().total_evaluated == 0; ++i)
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    const auto s = db.stats();
    REQUIRE(s.total_evaluated == 1);
    REQUIRE(s.global_best.has_value());
    CHECK(s.global_best->score ==
          evaluator.score_source(kernelscript::boxplus_source()).score);
    ev.stop();
    dbs.stop();
}

TEST_CASE("mock mutator is deterministic and prompts order examples") {
    evolution::StoredProgram weak{kernelscript::normalize(kernelscript::min_sum_source()), "h1",
                                  -100, {}};
    evolution::StoredProgram strong{kernelscript::normalize(kernelscript::boxplus_source()), "h2",
                                    -10, {}};
    const std::vector<evolution::StoredProgram> sampled = {weak, strong};

    CHECK(mock_mutate(sampled, 7) == mock_mutate(sampled, 7));
    const std::string child = mock_mutate(sampled, 7);
    CHECK_NOTHROW(kernelscript::parse(child));

    const std::string prompt = render_prompt("Improve these:\n{{EXAMPLES}}\nEnd.", sampled);
    const auto weak_pos = prompt.find(weak.source);
    const auto strong_pos = prompt.find(strong.source);
    REQUIRE(weak_pos != std::string::npos);
    REQUIRE(strong_pos != std::string::npos);
    CHECK(weak_pos < strong_pos);  // best exemplar last
}

TEST_CASE("sampler round drives the full mock loop") {
    const scoring::Evaluator evaluator(tiny_protocol(), tanner::default_desk_spec(8));
    evolution::Database db(1, evaluator.protocol_hash(), 3);
    db.register_program(0, kernelscript::boxplus_source(),
                        evaluator.score_source(kernelscript::boxplus_source()),
                        evaluator.protocol_hash());

    DbService dbs(db, "127.0.0.1", 0);
    dbs.start();
    EvaluatorService ev(evaluator, "http://127.0.0.1:" + std::to_string(dbs.port()), "127.0.0.1",
                        0);
    ev.start();

    MutatorConfig cfg;
    cfg.mode = MutatorConfig::Mode::Mock;
    SamplerStats stats;
    const bool ok = sampler_round(cfg, "http://127.0.0.1:" + std::to_string(dbs.port()),
                                  "http://127.0.0.1:" + std::to_string(ev.port()), 0, 42, stats);
    CHECK(ok);
    for (int i = 0; i < 100 && db.stats().total_evaluated < 2; ++i)
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    CHECK(db.stats().total_evaluated == 2);
    ev.stop();
    dbs.stop();
}

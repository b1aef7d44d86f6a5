#include <doctest.h>

#include <cmath>

#include "ahd/errors.hpp"
#include "ahd/kernelscript.hpp"
#include "ahd/scoring.hpp"

using namespace ahd;
using namespace ahd::scoring;

namespace {

EvalProtocol small_protocol() {
    EvalProtocol p;
    p.contexts = {phy::Context{1, 0, 3.0}};
    p.n_tbs = 6;
    p.tb_batch_seed = 404;
    return p;
}

} // namespace

TEST_CASE("score arithmetic follows the weight ladder") {
    CHECK(ScoreRecord::compute(0, 2, 0.01, 50) == doctest::Approx(-20010050.0));
    CHECK(ScoreRecord::compute(0, 0, 0.0, 30) == doctest::Approx(-30.0));
    CHECK(ScoreRecord::compute(1, 0, 0.0, 0) <= -1e9);
}

TEST_CASE("score record json round-trips and stays self-consistent") {
    ScoreRecord r;
    r.catastrophic = 0;
    r.undecoded = 3;
    r.mean_ber = 0.125;
    r.total_iterations = 271;
    r.score = ScoreRecord::compute(0, 3, 0.125, 271);
    r.context_ids = {0, 1};
    r.tb_batch_seed = 99;

    const ScoreRecord back = ScoreRecord::from_json(r.to_json());
    CHECK(back.score == doctest::Approx(r.score));
    CHECK(back.undecoded == 3);
    CHECK(back.mean_ber == doctest::Approx(0.125));
    CHECK(back.total_iterations == 271);
    CHECK(back.context_ids == r.context_ids);
    CHECK(ScoreRecord::compute(back.catastrophic, back.undecoded, back.mean_ber,
                               back.total_iterations) == doctest::Approx(back.score));
}

TEST_CASE("evaluator scores kernels deterministically") {
    const Evaluator ev(small_protocol(), tanner::default_desk_spec(16));
    const ScoreRecord a = ev.score_kernel(*kernels::make_boxplus());
    const ScoreRecord b = ev.score_kernel(*kernels::make_boxplus());
    CHECK(a.score == b.score);
    CHECK(a.catastrophic == 0);
    CHECK(a.undecoded <= small_protocol().n_tbs);
    CHECK(a.mean_ber >= 0.0);
    CHECK(a.mean_ber <= 1.0);
}

TEST_CASE("faulting sources become catastrophic scores, never exceptions") {
    const Evaluator ev(small_protocol(), tanner::default_desk_spec(16));
    for (const char* src : {"m = L / 0\nreturn m", "x = foo(L)\nreturn x", "not even close",
                            "x = 1 +\nreturn x"}) {
        const ScoreRecord r = ev.score_source(src);
        CHECK(r.catastrophic == 1);
        CHECK(r.score <= -1e9);
        CHECK_FALSE(r.fault.empty());
    }
    const ScoreRecord good = ev.score_source(kernelscript::boxplus_source());
    CHECK(good.catastrophic == 0);
    CHECK(good.score == ev.score_kernel(*kernels::make_boxplus()).score);
}

TEST_CASE("protocol hash pins every knob") {
    const tanner::CodeSpec code = tanner::default_desk_spec(16);
    EvalProtocol a = small_protocol();
    EvalProtocol b = a;
    CHECK(a.hash(code) == b.hash(code));
    b.n_tbs = 7;
    CHECK(a.hash(code) != b.hash(code));
    b = a;
    b.tb_batch_seed ^= 1;
    CHECK(a.hash(code) != b.hash(code));
    CHECK(a.hash(code) != a.hash(tanner::default_desk_spec(8)));
}

TEST_CASE("boundary context selection") {
    auto point = [](double snr, double succ, double iters) {
        GridPoint p;
        p.ctx = {1, 1, snr};
        p.success_fraction = succ;
        p.mean_iterations = iters;
        return p;
    };

    SUBCASE("single in-band context wins") {
        const auto ctx = pick_boundary_context({point(0, 1.0, 3), point(2, 0.6, 40), point(4, 0.0, 50)});
        CHECK(ctx.snr_db == 2);
    }
    SUBCASE("no intermediate zone throws") {
        CHECK_THROWS_AS(pick_boundary_context({point(0, 1.0, 3), point(2, 1.0, 2)}),
                        NoIntermediateZone);
    }
    SUBCASE("ties break toward lower snr") {
        const auto ctx = pick_boundary_context({point(5, 0.5, 40), point(1, 0.5, 40)});
        CHECK(ctx.snr_db == 1);
    }
    SUBCASE("iteration-hungriest in-band context wins") {
        const auto ctx = pick_boundary_context({point(1, 0.5, 20), point(2, 0.4, 45), point(3, 0.8, 10)});
        CHECK(ctx.snr_db == 2);
    }
}

TEST_CASE("sweep rows are deterministic and well-formed") {
    const tanner::TannerGraph graph = tanner::build_code(tanner::default_desk_spec(16));
    const std::vector<phy::Context> grid = {{1, 1, 0.0}, {1, 1, 6.0}};
    const auto a = sweep(grid, graph, *kernels::make_boxplus(), 20, 5);
    const auto b = sweep(grid, graph, *kernels::make_boxplus(), 20, 5);
    REQUIRE(a.size() == 2);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].success_fraction == b[i].success_fraction);
        CHECK(a[i].mean_iterations == b[i].mean_iterations);
        CHECK(a[i].success_fraction >= 0.0);
        CHECK(a[i].success_fraction <= 1.0);
    }
    CHECK(a[1].success_fraction >= a[0].success_fraction);
}

TEST_CASE("kernel comparison emits identical rows for identical kernels") {
    const Evaluator ev(small_protocol(), tanner::default_desk_spec(16));
    const auto rows = compare_kernels(
        {{"boxplus", kernels::make_boxplus()}, {"boxplus", kernels::make_boxplus()}}, ev, 3);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].decoded_mean == rows[1].decoded_mean);
    CHECK(rows[0].decoded_std == rows[1].decoded_std);
    CHECK(rows[0].iters_mean == rows[1].iters_mean);

    const auto single = compare_kernels({{"boxplus", kernels::make_boxplus()}}, ev, 1);
    CHECK(single[0].decoded_std == 0.0);
    CHECK(single[0].ber_std == 0.0);
}

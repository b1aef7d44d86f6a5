#include <doctest.h>

#include <cmath>
#include <random>

#include "ahd/kernels.hpp"
#include "ahd/kernelscript.hpp"

using namespace ahd;
using namespace ahd::kernelscript;

namespace {

std::vector<std::vector<double>> random_rows(std::mt19937_64& rng, int count, double lo, double hi) {
    std::uniform_int_distribution<std::size_t> deg(3, 8);
    std::uniform_real_distribution<double> mag(lo, hi);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < count; ++i) {
        std::vector<double> row(deg(rng));
        for (auto& v : row) v = (rng() & 1 ? 1.0 : -1.0) * mag(rng);
        rows.push_back(std::move(row));
    }
    return rows;
}

double max_diff_vs_native(const std::string& source, const kernels::CheckNodeKernel& native,
                          std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto rows = random_rows(rng, 200, 1e-2, 10.0);
    const KernelProgram prog = parse(source);
    const auto got = interpret(prog, rows, EvalBudget{});
    double max_diff = 0.0;
    native.begin_decode();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::vector<double> want(rows[r].size());
        native.update(rows[r], want);
        for (std::size_t j = 0; j < want.size(); ++j)
            max_diff = std::max(max_diff, std::abs(got[r][j] - want[j]));
    }
    return max_diff;
}

} // namespace

TEST_CASE("the boxplus seed parses to three statements") {
    const KernelProgram p = parse(
        "t = tanh(L / 2)\np = prod_excl(t)\nm = 2 * atanh(clamp(p, -0.9999999, 0.9999999))\n"
        "return m");
    CHECK(p.ast.stmts.size() == 3);
    CHECK(p.ast.return_ident == "m");
    CHECK(p.content_hash.size() == 64);
}

TEST_CASE("identity program and whitelist enforcement") {
    CHECK(parse("return L").ast.stmts.empty());
    CHECK_THROWS_AS(parse("x = foo(L)\nreturn x"), ValidationError);
    CHECK_THROWS_AS(parse("x = y + 1\nreturn x"), ValidationError);  // use before define
    CHECK_THROWS_AS(parse("x = 1 +\nreturn x"), SyntaxError);
    CHECK_THROWS_AS(parse("x = 1\nreturn z"), ValidationError);
}

TEST_CASE("statement budget is enforced") {
    std::string big;
    for (int i = 0; i <= 64; ++i) big += "v" + std::to_string(i) + " = L\n";
    big += "return v0";
    CHECK_THROWS_AS(parse(big), ValidationError);
}

TEST_CASE("normalization canonicalizes whitespace and literals") {
    CHECK(normalize("m=L\nreturn m") == "m = L\nreturn m");
    CHECK(normalize("x = 0.50 * L\nreturn x") == "x = 0.5 * L\nreturn x");
    CHECK(normalize("# comment\nx = min( L , 2 )\nreturn x") == "x = min(L, 2)\nreturn x");
}

TEST_CASE("parse-serialize round trip is stable") {
    const std::vector<std::string> corpus = {
        boxplus_source(), boxplus_phi_source(), min_sum_source(), offset_min_sum_source(0.5),
        discovered_source(),
        "a = -0.9999999\nb = clamp(L, a, 0.9999999)\nreturn b",
        "a = (L + 1) * 2\nb = L + 1 * 2\nc = a - (b - 1)\nreturn c",
        "a = L / 2 / 4\nb = L - 1 - 2\nreturn b",
    };
    for (const auto& src : corpus) {
        const std::string norm = normalize(src);
        CHECK(normalize(norm) == norm);
        CHECK(parse(norm).content_hash == parse(src).content_hash);
    }
    // Distinct programs hash differently.
    CHECK(parse("return L").content_hash != parse("x = L\nreturn x").content_hash);
}

TEST_CASE("interpreter matches the native kernels") {
    CHECK(max_diff_vs_native(boxplus_source(), *kernels::make_boxplus(), 1) < 1e-12);
    CHECK(max_diff_vs_native(boxplus_phi_source(), *kernels::make_boxplus_phi(), 2) < 1e-9);
    CHECK(max_diff_vs_native(min_sum_source(), *kernels::make_min_sum(), 3) < 1e-9);
    CHECK(max_diff_vs_native(offset_min_sum_source(0.5), *kernels::make_offset_min_sum(0.5), 4) <
          1e-9);
    CHECK(max_diff_vs_native(discovered_source(), *kernels::make_discovered(), 5) < 1e-9);
}

TEST_CASE("non-finite final outputs fault, repaired intermediates do not") {
    const KernelProgram bad = parse("m = L / 0\nreturn m");
    CHECK_THROWS_AS(interpret(bad, {{1.0, 2.0, 3.0}}, EvalBudget{}), SandboxFault);

    // An infinite intermediate repaired by a clamp is allowed.
    const KernelProgram repaired = parse("m = L / 0\nc = clamp(m, -1, 1)\nreturn c");
    const auto out = interpret(repaired, {{1.0, -2.0, 3.0}}, EvalBudget{});
    for (double v : out[0]) CHECK(std::isfinite(v));
}

TEST_CASE("op budget exhaustion raises a sandbox fault") {
    EvalBudget tiny;
    tiny.max_scalar_ops = 4;
    const KernelProgram p = parse(boxplus_source());
    CHECK_THROWS_AS(interpret(p, {{1.0, 2.0, 3.0, 4.0}}, tiny), SandboxFault);
}

TEST_CASE("interpretation is deterministic") {
    std::mt19937_64 rng(8);
    const auto rows = random_rows(rng, 50, 0.1, 12.0);
    const KernelProgram p = parse(discovered_source());
    CHECK(interpret(p, rows, EvalBudget{}) == interpret(p, rows, EvalBudget{}));
}

TEST_CASE("mutation is deterministic and always yields valid programs") {
    const KernelProgram seed = parse(boxplus_source());
    const KernelProgram a = mutate(seed, 42);
    const KernelProgram b = mutate(seed, 42);
    CHECK(a.source == b.source);
    CHECK(a.parent_hashes == std::vector<std::string>{seed.content_hash});
    CHECK(a.generation == seed.generation + 1);

    MutatePolicy donor_policy;
    donor_policy.donor = parse(min_sum_source());
    KernelProgram current = seed;
    for (std::uint64_t s = 0; s < 500; ++s) {
        const KernelProgram child =
            mutate(current, s, (s % 3 == 0) ? donor_policy : MutatePolicy{});
        const KernelProgram re = parse(child.source);
        CHECK(re.content_hash == child.content_hash);
        if (s % 7 == 0) current = child;
        if (current.ast.stmts.size() > 32) current = seed;
    }
}

TEST_CASE("perturbing the offset literal moves the output") {
    const KernelProgram base = parse(offset_min_sum_source(0.5));
    bool changed = false;
    for (std::uint64_t s = 0; s < 64 && !changed; ++s) {
        const KernelProgram child = mutate(base, s);
        const auto a = interpret(base, {{2.0, -3.0, 1.5}}, EvalBudget{});
        try {
            const auto b = interpret(child, {{2.0, -3.0, 1.5}}, EvalBudget{});
            changed = a != b;
        } catch (const SandboxFault&) {
            changed = true;  // a fault is also an observable behavior change
        }
    }
    CHECK(changed);
}

TEST_CASE("script kernel adapter names itself by hash") {
    ScriptKernel k(parse(boxplus_source()), EvalBudget{});
    k.arm_deadline();
    k.begin_decode();
    CHECK(k.name().rfind("script:", 0) == 0);
    std::vector<double> out(3);
    k.update(std::vector<double>{1.0, 2.0, 3.0}, out);
    CHECK(std::isfinite(out[0]));
}

#ifndef AHD_KERNELSCRIPT_HPP
#define AHD_KERNELSCRIPT_HPP

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ahd/errors.hpp"
#include "ahd/kernels.hpp"

namespace ahd::kernelscript {

struct SyntaxError : Error {
    SyntaxError(std::size_t line, const std::string& msg)
        : Error("syntax error at line " + std::to_string(line) + ": " + msg), line(line) {}
    std::size_t line;
};

struct ValidationError : Error { using Error::Error; };

struct SandboxFault : KernelFault {
    enum class Kind { Timeout, OpBudget, NumericFault };
    SandboxFault(Kind k, const std::string& msg) : KernelFault(msg), kind(k) {}
    Kind kind;
};

// --- AST --------------------------------------------------------------------

enum class UnOp { Tanh, Atanh, Log, Exp, Abs, Sgn, Neg };
enum class BinOp { Add, Sub, Mul, Div, Min, Max };
enum class RedOp { SumExcl, ProdExcl, MinExcl, SignProdExcl, SumAll, ProdAll, MinAll, SignProdAll };

struct Expr;
using ExprPtr = std::shared_ptr<Expr>;

struct Expr {
    enum class Kind { Literal, Ident, Unary, Binary, Clamp, Reduce };
    Kind kind = Kind::Literal;
    double literal = 0.0;
    std::string ident;
    UnOp un = UnOp::Tanh;
    BinOp bin = BinOp::Add;
    RedOp red = RedOp::SumExcl;
    std::vector<ExprPtr> args;
};

struct Stmt {
    std::string name;
    ExprPtr expr;
};

struct Ast {
    std::vector<Stmt> stmts;
    std::string return_ident;
};

/// A candidate CNU heuristic in the sandboxed language.
struct KernelProgram {
    std::string source;        // normalized
    Ast ast;
    std::string content_hash;  // sha-256 hex of normalized source
    std::vector<std::string> parent_hashes;
    std::size_t generation = 0;
};

struct EvalBudget {
    std::uint64_t max_scalar_ops = 10'000'000;  // per decode call
    std::uint64_t wall_clock_ms = 5'000;        // per candidate evaluation
};

constexpr std::size_t kMaxStatements = 64;

// --- operations ---------------------------------------------------------------

KernelProgram parse(const std::string& source);
std::string serialize(const Ast& ast);
std::string normalize(const std::string& source);
std::string sha256_hex(const std::string& text);

/// Evaluate one check-node row. Throws SandboxFault; never touches the host.
std::vector<double> interpret_row(const KernelProgram& program, std::span<const double> row,
                                  const EvalBudget& budget, std::uint64_t& ops_used,
                                  std::chrono::steady_clock::time_point deadline);

/// Batch evaluation with a fresh budget, mostly for tests and one-shot scoring.
std::vector<std::vector<double>> interpret(const KernelProgram& program,
                                           const std::vector<std::vector<double>>& rows,
                                           const EvalBudget& budget);

struct MutatePolicy {
    std::optional<KernelProgram> donor;  // splice source, when present
};

KernelProgram mutate(const KernelProgram& program, std::uint64_t rng_seed,
                     const MutatePolicy& policy = {});

/// Adapter so evolved programs run inside the standard decoder loop.
/// The op budget resets on begin_decode(); wall-clock deadline is armed
/// by arm_deadline() at the evaluation-call boundary.
class ScriptKernel final : public kernels::CheckNodeKernel {
public:
    ScriptKernel(KernelProgram program, EvalBudget budget);

    void update(std::span<const double> in, std::span<double> out) const override;
    void begin_decode() const override;
    std::string name() const override;

    void arm_deadline() const;
    const KernelProgram& program() const { return program_; }

private:
    KernelProgram program_;
    EvalBudget budget_;
    mutable std::uint64_t ops_used_ = 0;
    mutable std::chrono::steady_clock::time_point deadline_;
};

/// Script forms of the baseline kernels (expressiveness floor).
std::string boxplus_source();
std::string boxplus_phi_source();
std::string min_sum_source();
std::string offset_min_sum_source(double beta);
std::string discovered_source();

} // namespace ahd::kernelscript

#endif

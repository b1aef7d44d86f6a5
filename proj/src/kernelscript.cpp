#include "ahd/kernelscript.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <random>
#include <sstream>

namespace ahd::kernelscript {

// --- tokenizer ----------------------------------------------------------------

namespace {

struct Token {
    enum class Kind { Ident, Number, Symbol, End };
    Kind kind = Kind::End;
    std::string text;
    double number = 0.0;
};

std::vector<Token> tokenize_line(const std::string& line, std::size_t line_no) {
    std::vector<Token> toks;
    std::size_t i = 0;
    while (i < line.size()) {
        const char c = line[i];
        if (c == ' ' || c == '\t' || c == '\r') {
            ++i;
            continue;
        }
        if (c == '#') break;  // comment to end of line
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < line.size() &&
                   (std::isalnum(static_cast<unsigned char>(line[j])) || line[j] == '_'))
                ++j;
            toks.push_back({Token::Kind::Ident, line.substr(i, j - i), 0.0});
            i = j;
        } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                   (c == '.' && i + 1 < line.size() &&
                    std::isdigit(static_cast<unsigned char>(line[i + 1])))) {
            std::size_t j = i;
            while (j < line.size() &&
                   (std::isdigit(static_cast<unsigned char>(line[j])) || line[j] == '.'))
                ++j;
            if (j < line.size() && (line[j] == 'e' || line[j] == 'E')) {
                ++j;
                if (j < line.size() && (line[j] == '+' || line[j] == '-')) ++j;
                while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
            }
            const std::string text = line.substr(i, j - i);
            double v = 0.0;
            const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
            if (res.ec != std::errc() || res.ptr != text.data() + text.size())
                throw SyntaxError(line_no, "bad number literal: " + text);
            toks.push_back({Token::Kind::Number, text, v});
            i = j;
        } else if (std::strchr("=(),+-*/", c)) {
            toks.push_back({Token::Kind::Symbol, std::string(1, c), 0.0});
            ++i;
        } else {
            throw SyntaxError(line_no, std::string("unexpected character '") + c + "'");
        }
    }
    return toks;
}

// --- recursive-descent parser ---------------------------------------------------

const std::map<std::string, UnOp> kUnaryOps = {
    {"tanh", UnOp::Tanh}, {"atanh", UnOp::Atanh}, {"log", UnOp::Log}, {"exp", UnOp::Exp},
    {"abs", UnOp::Abs},   {"sgn", UnOp::Sgn},     {"neg", UnOp::Neg},
};
const std::map<std::string, RedOp> kReduceOps = {
    {"sum_excl", RedOp::SumExcl},   {"prod_excl", RedOp::ProdExcl},
    {"min_excl", RedOp::MinExcl},   {"signprod_excl", RedOp::SignProdExcl},
    {"sum_all", RedOp::SumAll},     {"prod_all", RedOp::ProdAll},
    {"min_all", RedOp::MinAll},     {"signprod_all", RedOp::SignProdAll},
};

struct LineParser {
    const std::vector<Token>& toks;
    std::size_t pos = 0;
    std::size_t line_no;

    const Token& peek() const {
        static const Token end{Token::Kind::End, "", 0.0};
        return pos < toks.size() ? toks[pos] : end;
    }
    Token take() {
        Token t = peek();
        if (t.kind != Token::Kind::End) ++pos;
        return t;
    }
    bool take_symbol(const char* s) {
        if (peek().kind == Token::Kind::Symbol && peek().text == s) {
            ++pos;
            return true;
        }
        return false;
    }
    void expect_symbol(const char* s) {
        if (!take_symbol(s))
            throw SyntaxError(line_no, std::string("expected '") + s + "', got '" + peek().text + "'");
    }

    ExprPtr parse_expr() { return parse_add(); }

    ExprPtr parse_add() {
        ExprPtr left = parse_mul();
        while (peek().kind == Token::Kind::Symbol && (peek().text == "+" || peek().text == "-")) {
            const bool add = take().text == "+";
            auto node = std::make_shared<Expr>();
            node->kind = Expr::Kind::Binary;
            node->bin = add ? BinOp::Add : BinOp::Sub;
            node->args = {left, parse_mul()};
            left = node;
        }
        return left;
    }

    ExprPtr parse_mul() {
        ExprPtr left = parse_unary();
        while (peek().kind == Token::Kind::Symbol && (peek().text == "*" || peek().text == "/")) {
            const bool mul = take().text == "*";
            auto node = std::make_shared<Expr>();
            node->kind = Expr::Kind::Binary;
            node->bin = mul ? BinOp::Mul : BinOp::Div;
            node->args = {left, parse_unary()};
            left = node;
        }
        return left;
    }

    ExprPtr parse_unary() {
        if (take_symbol("-")) {
            if (peek().kind == Token::Kind::Number) {
                Token t = take();
                auto node = std::make_shared<Expr>();
                node->kind = Expr::Kind::Literal;
                node->literal = -t.number;
                return node;
            }
            auto node = std::make_shared<Expr>();
            node->kind = Expr::Kind::Unary;
            node->un = UnOp::Neg;
            node->args = {parse_unary()};
            return node;
        }
        return parse_primary();
    }

    ExprPtr parse_primary() {
        const Token t = take();
        if (t.kind == Token::Kind::Number) {
            auto node = std::make_shared<Expr>();
            node->kind = Expr::Kind::Literal;
            node->literal = t.number;
            return node;
        }
        if (t.kind == Token::Kind::Symbol && t.text == "(") {
            ExprPtr inner = parse_expr();
            expect_symbol(")");
            return inner;
        }
        if (t.kind == Token::Kind::Ident) {
            if (take_symbol("(")) return parse_call(t.text);
            auto node = std::make_shared<Expr>();
            node->kind = Expr::Kind::Ident;
            node->ident = t.text;
            return node;
        }
        throw SyntaxError(line_no, "expected expression, got '" + t.text + "'");
    }

    ExprPtr parse_call(const std::string& fn) {
        std::vector<ExprPtr> args;
        if (!take_symbol(")")) {
            args.push_back(parse_expr());
            while (take_symbol(",")) args.push_back(parse_expr());
            expect_symbol(")");
        }
        auto node = std::make_shared<Expr>();
        if (auto it = kUnaryOps.find(fn); it != kUnaryOps.end()) {
            if (args.size() != 1) throw SyntaxError(line_no, fn + " takes 1 argument");
            node->kind = Expr::Kind::Unary;
            node->un = it->second;
        } else if (auto rt = kReduceOps.find(fn); rt != kReduceOps.end()) {
            if (args.size() != 1) throw SyntaxError(line_no, fn + " takes 1 argument");
            node->kind = Expr::Kind::Reduce;
            node->red = rt->second;
        } else if (fn == "min" || fn == "max") {
            if (args.size() != 2) throw SyntaxError(line_no, fn + " takes 2 arguments");
            node->kind = Expr::Kind::Binary;
            node->bin = fn == "min" ? BinOp::Min : BinOp::Max;
        } else if (fn == "clamp") {
            if (args.size() != 3) throw SyntaxError(line_no, "clamp takes 3 arguments");
            node->kind = Expr::Kind::Clamp;
        } else {
            throw ValidationError("unknown operation " + fn);
        }
        node->args = std::move(args);
        return node;
    }
};

void validate_expr(const Expr& e, const std::vector<std::string>& defined) {
    if (e.kind == Expr::Kind::Ident) {
        if (e.ident == "L") return;
        if (std::find(defined.begin(), defined.end(), e.ident) == defined.end())
            throw ValidationError("use of undefined identifier " + e.ident);
    }
    for (const auto& a : e.args) validate_expr(*a, defined);
}

} // namespace

KernelProgram parse(const std::string& source) {
    Ast ast;
    std::istringstream is(source);
    std::string line;
    std::size_t line_no = 0;
    bool returned = false;
    std::vector<std::string> defined;

    while (std::getline(is, line)) {
        ++line_no;
        const std::vector<Token> toks = tokenize_line(line, line_no);
        if (toks.empty()) continue;
        if (returned) throw SyntaxError(line_no, "statement after return");

        LineParser p{toks, 0, line_no};
        const Token head = p.take();
        if (head.kind != Token::Kind::Ident)
            throw SyntaxError(line_no, "expected identifier or return");

        if (head.text == "return") {
            const Token ident = p.take();
            if (ident.kind != Token::Kind::Ident)
                throw SyntaxError(line_no, "return takes a single identifier");
            if (p.peek().kind != Token::Kind::End)
                throw SyntaxError(line_no, "trailing tokens after return");
            if (ident.text != "L" &&
                std::find(defined.begin(), defined.end(), ident.text) == defined.end())
                throw ValidationError("return of undefined identifier " + ident.text);
            ast.return_ident = ident.text;
            returned = true;
            continue;
        }

        if (head.text == "L") throw ValidationError("cannot assign to input L");
        p.expect_symbol("=");
        Stmt stmt;
        stmt.name = head.text;
        stmt.expr = p.parse_expr();
        if (p.peek().kind != Token::Kind::End)
            throw SyntaxError(line_no, "trailing tokens after expression");
        validate_expr(*stmt.expr, defined);
        ast.stmts.push_back(std::move(stmt));
        defined.push_back(head.text);
        if (ast.stmts.size() > kMaxStatements)
            throw ValidationError("program exceeds 64 statements");
    }
    if (!returned) throw SyntaxError(line_no, "missing return statement");

    KernelProgram prog;
    prog.ast = std::move(ast);
    prog.source = serialize(prog.ast);
    prog.content_hash = sha256_hex(prog.source);
    return prog;
}

// --- serializer -----------------------------------------------------------------

namespace {

std::string format_literal(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

int precedence(const Expr& e) {
    if (e.kind == Expr::Kind::Binary) {
        if (e.bin == BinOp::Add || e.bin == BinOp::Sub) return 1;
        if (e.bin == BinOp::Mul || e.bin == BinOp::Div) return 2;
    }
    return 3;  // literals, idents, calls
}

const char* unop_name(UnOp op) {
    switch (op) {
        case UnOp::Tanh: return "tanh";
        case UnOp::Atanh: return "atanh";
        case UnOp::Log: return "log";
        case UnOp::Exp: return "exp";
        case UnOp::Abs: return "abs";
        case UnOp::Sgn: return "sgn";
        case UnOp::Neg: return "neg";
    }
    return "?";
}

const char* redop_name(RedOp op) {
    switch (op) {
        case RedOp::SumExcl: return "sum_excl";
        case RedOp::ProdExcl: return "prod_excl";
        case RedOp::MinExcl: return "min_excl";
        case RedOp::SignProdExcl: return "signprod_excl";
        case RedOp::SumAll: return "sum_all";
        case RedOp::ProdAll: return "prod_all";
        case RedOp::MinAll: return "min_all";
        case RedOp::SignProdAll: return "signprod_all";
    }
    return "?";
}

void print_expr(const Expr& e, std::ostream& os);

void print_child(const Expr& child, int parent_prec, bool right_side, std::ostream& os) {
    const int cp = precedence(child);
    const bool parens = cp < parent_prec || (right_side && cp == parent_prec);
    if (parens) os << '(';
    print_expr(child, os);
    if (parens) os << ')';
}

void print_expr(const Expr& e, std::ostream& os) {
    switch (e.kind) {
        case Expr::Kind::Literal:
            os << format_literal(e.literal);
            break;
        case Expr::Kind::Ident:
            os << e.ident;
            break;
        case Expr::Kind::Unary:
            os << unop_name(e.un) << '(';
            print_expr(*e.args[0], os);
            os << ')';
            break;
        case Expr::Kind::Binary: {
            if (e.bin == BinOp::Min || e.bin == BinOp::Max) {
                os << (e.bin == BinOp::Min ? "min" : "max") << '(';
                print_expr(*e.args[0], os);
                os << ", ";
                print_expr(*e.args[1], os);
                os << ')';
                break;
            }
            const int prec = precedence(e);
            print_child(*e.args[0], prec, false, os);
            switch (e.bin) {
                case BinOp::Add: os << " + "; break;
                case BinOp::Sub: os << " - "; break;
                case BinOp::Mul: os << " * "; break;
                case BinOp::Div: os << " / "; break;
                default: break;
            }
            print_child(*e.args[1], prec, true, os);
            break;
        }
        case Expr::Kind::Clamp:
            os << "clamp(";
            print_expr(*e.args[0], os);
            os << ", ";
            print_expr(*e.args[1], os);
            os << ", ";
            print_expr(*e.args[2], os);
            os << ')';
            break;
        case Expr::Kind::Reduce:
            os << redop_name(e.red) << '(';
            print_expr(*e.args[0], os);
            os << ')';
            break;
    }
}

} // namespace

std::string serialize(const Ast& ast) {
    std::ostringstream os;
    for (const auto& s : ast.stmts) {
        os << s.name << " = ";
        print_expr(*s.expr, os);
        os << '\n';
    }
    os << "return " << ast.return_ident;
    return os.str();
}

std::string normalize(const std::string& source) { return parse(source).source; }

std::string sha256_hex(const std::string& text) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

// --- interpreter -----------------------------------------------------------------

namespace {

using Value = std::vector<double>;

double sgn_of(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

struct RowEval {
    std::size_t d;
    const EvalBudget& budget;
    std::uint64_t& ops;

    void charge(std::uint64_t n) {
        ops += n;
        if (ops > budget.max_scalar_ops)
            throw SandboxFault(SandboxFault::Kind::OpBudget, "scalar op budget exhausted");
    }

    Value eval(const Expr& e, const std::vector<Value>& env,
               const std::map<std::string, std::size_t>& names, std::span<const double> row) {
        switch (e.kind) {
            case Expr::Kind::Literal:
                return Value(d, e.literal);
            case Expr::Kind::Ident: {
                if (e.ident == "L") return Value(row.begin(), row.end());
                return env[names.at(e.ident)];
            }
            case Expr::Kind::Unary: {
                Value v = eval(*e.args[0], env, names, row);
                charge(d);
                for (double& x : v) {
                    switch (e.un) {
                        case UnOp::Tanh: x = std::tanh(x); break;
                        case UnOp::Atanh: x = std::atanh(x); break;
                        case UnOp::Log: x = std::log(x); break;
                        case UnOp::Exp: x = std::exp(x); break;
                        case UnOp::Abs: x = std::abs(x); break;
                        case UnOp::Sgn: x = sgn_of(x); break;
                        case UnOp::Neg: x = -x; break;
                    }
                }
                return v;
            }
            case Expr::Kind::Binary: {
                Value a = eval(*e.args[0], env, names, row);
                const Value b = eval(*e.args[1], env, names, row);
                charge(d);
                for (std::size_t i = 0; i < d; ++i) {
                    switch (e.bin) {
                        case BinOp::Add: a[i] += b[i]; break;
                        case BinOp::Sub: a[i] -= b[i]; break;
                        case BinOp::Mul: a[i] *= b[i]; break;
                        case BinOp::Div: a[i] /= b[i]; break;
                        case BinOp::Min: a[i] = std::min(a[i], b[i]); break;
                        case BinOp::Max: a[i] = std::max(a[i], b[i]); break;
                    }
                }
                return a;
            }
            case Expr::Kind::Clamp: {
                Value x = eval(*e.args[0], env, names, row);
                const Value lo = eval(*e.args[1], env, names, row);
                const Value hi = eval(*e.args[2], env, names, row);
                charge(2 * d);
                for (std::size_t i = 0; i < d; ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
                return x;
            }
            case Expr::Kind::Reduce: {
                const Value v = eval(*e.args[0], env, names, row);
                charge(2 * d);
                Value out(d);
                switch (e.red) {
                    case RedOp::SumExcl:
                    case RedOp::SumAll: {
                        double total = 0.0;
                        for (double x : v) total += x;
                        for (std::size_t j = 0; j < d; ++j)
                            out[j] = (e.red == RedOp::SumAll) ? total : total - v[j];
                        break;
                    }
                    case RedOp::ProdExcl: {
                        charge(d * d);
                        for (std::size_t j = 0; j < d; ++j) {
                            double p = 1.0;
                            for (std::size_t i = 0; i < d; ++i)
                                if (i != j) p *= v[i];
                            out[j] = p;
                        }
                        break;
                    }
                    case RedOp::ProdAll: {
                        double p = 1.0;
                        for (double x : v) p *= x;
                        std::fill(out.begin(), out.end(), p);
                        break;
                    }
                    case RedOp::MinExcl: {
                        charge(d * d);
                        for (std::size_t j = 0; j < d; ++j) {
                            double m = std::numeric_limits<double>::infinity();
                            for (std::size_t i = 0; i < d; ++i)
                                if (i != j) m = std::min(m, v[i]);
                            out[j] = m;
                        }
                        break;
                    }
                    case RedOp::MinAll: {
                        double m = std::numeric_limits<double>::infinity();
                        for (double x : v) m = std::min(m, x);
                        std::fill(out.begin(), out.end(), m);
                        break;
                    }
                    case RedOp::SignProdExcl: {
                        charge(d * d);
                        for (std::size_t j = 0; j < d; ++j) {
                            double p = 1.0;
                            for (std::size_t i = 0; i < d; ++i)
                                if (i != j) p *= sgn_of(v[i]);
                            out[j] = p;
                        }
                        break;
                    }
                    case RedOp::SignProdAll: {
                        double p = 1.0;
                        for (double x : v) p *= sgn_of(x);
                        std::fill(out.begin(), out.end(), p);
                        break;
                    }
                }
                return out;
            }
        }
        return Value(d, 0.0);
    }
};

} // namespace

std::vector<double> interpret_row(const KernelProgram& program, std::span<const double> row,
                                  const EvalBudget& budget, std::uint64_t& ops_used,
                                  std::chrono::steady_clock::time_point deadline) {
    if (std::chrono::steady_clock::now() > deadline)
        throw SandboxFault(SandboxFault::Kind::Timeout, "wall-clock budget exhausted");

    RowEval ev{row.size(), budget, ops_used};
    std::map<std::string, std::size_t> names;
    std::vector<Value> env;
    env.reserve(program.ast.stmts.size());
    for (const auto& stmt : program.ast.stmts) {
        Value v = ev.eval(*stmt.expr, env, names, row);
        names[stmt.name] = env.size();
        env.push_back(std::move(v));
    }
    Value out = program.ast.return_ident == "L"
                    ? Value(row.begin(), row.end())
                    : env[names.at(program.ast.return_ident)];
    for (double x : out)
        if (!std::isfinite(x))
            throw SandboxFault(SandboxFault::Kind::NumericFault, "non-finite final output");
    return out;
}

std::vector<std::vector<double>> interpret(const KernelProgram& program,
                                           const std::vector<std::vector<double>>& rows,
                                           const EvalBudget& budget) {
    std::uint64_t ops = 0;
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(budget.wall_clock_ms);
    std::vector<std::vector<double>> out;
    out.reserve(rows.size());
    for (const auto& row : rows) out.push_back(interpret_row(program, row, budget, ops, deadline));
    return out;
}

// --- mutation -------------------------------------------------------------------

namespace {

ExprPtr clone_expr(const Expr& e) {
    auto c = std::make_shared<Expr>(e);
    c->args.clear();
    for (const auto& a : e.args) c->args.push_back(clone_expr(*a));
    return c;
}

void collect(Expr& e, Expr::Kind kind, std::vector<Expr*>& out) {
    if (e.kind == kind) out.push_back(&e);
    for (auto& a : e.args) collect(*a, kind, out);
}

std::string fresh_ident(const Ast& ast) {
    std::vector<std::string> used;
    for (const auto& s : ast.stmts) used.push_back(s.name);
    for (std::size_t i = 0;; ++i) {
        std::string name = "v" + std::to_string(i);
        if (std::find(used.begin(), used.end(), name) == used.end()) return name;
    }
}

void remap_unknown_idents(Expr& e, const std::vector<std::string>& defined) {
    if (e.kind == Expr::Kind::Ident && e.ident != "L" &&
        std::find(defined.begin(), defined.end(), e.ident) == defined.end())
        e.ident = "L";
    for (auto& a : e.args) remap_unknown_idents(*a, defined);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return rng() % n; }

} // namespace

KernelProgram mutate(const KernelProgram& program, std::uint64_t rng_seed,
                     const MutatePolicy& policy) {
    std::mt19937_64 rng(rng_seed);

    Ast ast;
    ast.return_ident = program.ast.return_ident;
    for (const auto& s : program.ast.stmts) ast.stmts.push_back({s.name, clone_expr(*s.expr)});

    std::vector<Expr*> literals, binaries, reduces;
    for (auto& s : ast.stmts) {
        collect(*s.expr, Expr::Kind::Literal, literals);
        collect(*s.expr, Expr::Kind::Binary, binaries);
        collect(*s.expr, Expr::Kind::Reduce, reduces);
    }

    enum Kind { PerturbLiteral, SwapOp, WrapClamp, SiblingReduce, Splice };
    std::vector<Kind> applicable = {WrapClamp};
    if (!literals.empty()) applicable.push_back(PerturbLiteral);
    if (!binaries.empty()) applicable.push_back(SwapOp);
    if (!reduces.empty()) applicable.push_back(SiblingReduce);
    if (policy.donor && !policy.donor->ast.stmts.empty() && ast.stmts.size() < kMaxStatements)
        applicable.push_back(Splice);

    Kind kind = applicable[pick(rng, applicable.size())];
    bool spliced = false;

    switch (kind) {
        case PerturbLiteral: {
            Expr* lit = literals[pick(rng, literals.size())];
            if (rng() & 1)
                lit->literal *= uniform(rng, 0.5, 2.0);
            else
                lit->literal += (rng() & 1 ? 1.0 : -1.0) * uniform(rng, 0.0, 1.0);
            if (!std::isfinite(lit->literal)) lit->literal = 0.0;
            break;
        }
        case SwapOp: {
            Expr* b = binaries[pick(rng, binaries.size())];
            switch (b->bin) {
                case BinOp::Add: b->bin = BinOp::Sub; break;
                case BinOp::Sub: b->bin = BinOp::Add; break;
                case BinOp::Mul: b->bin = BinOp::Div; break;
                case BinOp::Div: b->bin = BinOp::Mul; break;
                case BinOp::Min: b->bin = BinOp::Max; break;
                case BinOp::Max: b->bin = BinOp::Min; break;
            }
            break;
        }
        case WrapClamp: {
            const double bound = uniform(rng, 1.0, 20.0);
            auto lo = std::make_shared<Expr>();
            lo->kind = Expr::Kind::Literal;
            lo->literal = -bound;
            auto hi = std::make_shared<Expr>();
            hi->kind = Expr::Kind::Literal;
            hi->literal = bound;
            auto wrap = std::make_shared<Expr>();
            wrap->kind = Expr::Kind::Clamp;
            if (ast.stmts.empty()) {
                auto ret = std::make_shared<Expr>();
                ret->kind = Expr::Kind::Ident;
                ret->ident = ast.return_ident;
                wrap->args = {ret, lo, hi};
                const std::string name = fresh_ident(ast);
                ast.stmts.push_back({name, wrap});
                ast.return_ident = name;
            } else {
                Stmt& s = ast.stmts[pick(rng, ast.stmts.size())];
                wrap->args = {s.expr, lo, hi};
                s.expr = wrap;
            }
            break;
        }
        case SiblingReduce: {
            Expr* r = reduces[pick(rng, reduces.size())];
            switch (r->red) {
                case RedOp::SumExcl: r->red = RedOp::SumAll; break;
                case RedOp::SumAll: r->red = RedOp::SumExcl; break;
                case RedOp::ProdExcl: r->red = RedOp::ProdAll; break;
                case RedOp::ProdAll: r->red = RedOp::ProdExcl; break;
                case RedOp::MinExcl: r->red = RedOp::MinAll; break;
                case RedOp::MinAll: r->red = RedOp::MinExcl; break;
                case RedOp::SignProdExcl: r->red = RedOp::SignProdAll; break;
                case RedOp::SignProdAll: r->red = RedOp::SignProdExcl; break;
            }
            break;
        }
        case Splice: {
            const auto& donor = policy.donor->ast;
            const Stmt& src = donor.stmts[pick(rng, donor.stmts.size())];
            Stmt copy{fresh_ident(ast), clone_expr(*src.expr)};
            const std::size_t at = pick(rng, ast.stmts.size() + 1);
            std::vector<std::string> defined;
            for (std::size_t i = 0; i < at; ++i) defined.push_back(ast.stmts[i].name);
            remap_unknown_idents(*copy.expr, defined);
            ast.stmts.insert(ast.stmts.begin() + static_cast<long>(at), std::move(copy));
            spliced = true;
            break;
        }
    }

    // Re-parse the serialized child so every mutation path revalidates.
    KernelProgram child = parse(serialize(ast));
    child.parent_hashes = {program.content_hash};
    if (spliced) child.parent_hashes.push_back(policy.donor->content_hash);
    child.generation = program.generation + 1;
    return child;
}

// --- decoder adapter --------------------------------------------------------------

ScriptKernel::ScriptKernel(KernelProgram program, EvalBudget budget)
    : program_(std::move(program)), budget_(budget) {
    arm_deadline();
}

void ScriptKernel::arm_deadline() const {
    deadline_ = std::chrono::steady_clock::now() + std::chrono::milliseconds(budget_.wall_clock_ms);
}

void ScriptKernel::begin_decode() const { ops_used_ = 0; }

void ScriptKernel::update(std::span<const double> in, std::span<double> out) const {
    const std::vector<double> result = interpret_row(program_, in, budget_, ops_used_, deadline_);
    std::copy(result.begin(), result.end(), out.begin());
}

std::string ScriptKernel::name() const { return "script:" + program_.content_hash.substr(0, 12); }

// --- baseline sources --------------------------------------------------------------

std::string boxplus_source() {
    return "t = tanh(L / 2)\n"
           "p = prod_excl(t)\n"
           "m = 2 * atanh(clamp(p, -0.9999999, 0.9999999))\n"
           "return m\n";
}

std::string boxplus_phi_source() {
    return "s = signprod_excl(L)\n"
           "a = clamp(abs(L), 0.000000085, 16.6)\n"
           "f = neg(log(tanh(a / 2)))\n"
           "g = sum_excl(f)\n"
           "h = clamp(g, 0.000000085, 16.6)\n"
           "m = neg(log(tanh(h / 2)))\n"
           "r = s * m\n"
           "return r\n";
}

std::string min_sum_source() {
    return "s = signprod_excl(L)\n"
           "a = abs(L)\n"
           "m = min_excl(a)\n"
           "r = s * m\n"
           "return r\n";
}

std::string offset_min_sum_source(double beta) {
    return "s = signprod_excl(L)\n"
           "a = abs(L)\n"
           "m = min_excl(a)\n"
           "o = max(m - " + format_literal(beta) + ", 0)\n"
           "r = s * o\n"
           "return r\n";
}

std::string discovered_source() {
    return "t = tanh(L / 2)\n"
           "s = sgn(t)\n"
           "g = log(abs(t) + 1e-12)\n"
           "gs = sum_all(g)\n"
           "m = exp(gs - g)\n"
           "sp = signprod_all(t)\n"
           "x = clamp(sp * s * m, -0.9999999, 0.9999999)\n"
           "r = 2 * atanh(x)\n"
           "return r\n";
}

} // namespace ahd::kernelscript

#include "ahd/tanner.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ahd/errors.hpp"

namespace ahd::tanner {

void CodeSpec::validate() const {
    if (base_rows == 0 || base_cols == 0 || lift == 0)
        throw InvalidSpec("empty base matrix or zero lift");
    if (info_cols == 0 || info_cols >= base_cols)
        throw InvalidSpec("info_cols must be in (0, base_cols)");
    if (base_cols - info_cols != base_rows)
        throw InvalidSpec("parity part must be square (base_cols - info_cols == base_rows)");
    if (shifts.size() != base_rows * base_cols)
        throw InvalidSpec("shift matrix size mismatch");
    for (int s : shifts)
        if (s != kNullShift && (s < 0 || static_cast<std::size_t>(s) >= lift))
            throw InvalidSpec("shift out of [0, Z)");
    for (std::size_t r = 0; r < base_rows; ++r) {
        std::size_t deg = 0;
        for (std::size_t c = 0; c < base_cols; ++c)
            if (shift_at(r, c) != kNullShift) ++deg;
        if (deg < 2) throw InvalidSpec("check row with degree < 2");
    }
}

TannerGraph build_code(const CodeSpec& spec) {
    spec.validate();
    TannerGraph g;
    g.spec = spec;
    g.var_nodes = spec.n();
    g.check_nodes = spec.m();
    g.check_offset.assign(g.check_nodes + 1, 0);
    g.var_edges.assign(g.var_nodes, {});

    const std::size_t z = spec.lift;
    for (std::size_t r = 0; r < spec.base_rows; ++r) {
        for (std::size_t zi = 0; zi < z; ++zi) {
            const std::uint32_t check = static_cast<std::uint32_t>(r * z + zi);
            for (std::size_t c = 0; c < spec.base_cols; ++c) {
                const int s = spec.shift_at(r, c);
                if (s == kNullShift) continue;
                const std::uint32_t var =
                    static_cast<std::uint32_t>(c * z + (zi + static_cast<std::size_t>(s)) % z);
                g.edge_check.push_back(check);
                g.edge_var.push_back(var);
            }
            g.check_offset[check + 1] = static_cast<std::uint32_t>(g.edge_var.size());
        }
    }
    for (std::size_t e = 0; e < g.edge_var.size(); ++e)
        g.var_edges[g.edge_var[e]].push_back(static_cast<std::uint32_t>(e));

    // Prove the parity part is solvable up front so encode() cannot
    // surprise the caller later.
    BitVec probe(spec.k());
    for (std::size_t i = 0; i < probe.size(); ++i) probe[i] = static_cast<Bit>(i & 1);
    encode(g, probe);
    return g;
}

std::string TannerGraph::adjacency_serialization() const {
    std::ostringstream os;
    for (std::size_t m = 0; m < check_nodes; ++m) {
        os << m << ':';
        for (std::uint32_t e = check_offset[m]; e < check_offset[m + 1]; ++e)
            os << ' ' << edge_var[e];
        os << '\n';
    }
    return os.str();
}

std::vector<BitVec> expand_dense(const CodeSpec& spec) {
    std::vector<BitVec> h(spec.m(), BitVec(spec.n(), 0));
    const std::size_t z = spec.lift;
    for (std::size_t r = 0; r < spec.base_rows; ++r)
        for (std::size_t c = 0; c < spec.base_cols; ++c) {
            const int s = spec.shift_at(r, c);
            if (s == kNullShift) continue;
            for (std::size_t zi = 0; zi < z; ++zi)
                h[r * z + zi][c * z + (zi + static_cast<std::size_t>(s)) % z] = 1;
        }
    return h;
}

std::size_t gf2_rank(std::vector<BitVec> rows) {
    if (rows.empty()) return 0;
    const std::size_t cols = rows[0].size();
    std::size_t rank = 0;
    for (std::size_t c = 0; c < cols && rank < rows.size(); ++c) {
        std::size_t pivot = rank;
        while (pivot < rows.size() && rows[pivot][c] == 0) ++pivot;
        if (pivot == rows.size()) continue;
        std::swap(rows[rank], rows[pivot]);
        for (std::size_t r = 0; r < rows.size(); ++r)
            if (r != rank && rows[r][c])
                for (std::size_t j = c; j < cols; ++j) rows[r][j] ^= rows[rank][j];
        ++rank;
    }
    return rank;
}

namespace {

// Parity base part is back-substitutable when each row r has a shift-0
// block on its diagonal parity column and nothing to the right of it.
bool back_substitutable(const CodeSpec& spec) {
    for (std::size_t r = 0; r < spec.base_rows; ++r) {
        if (spec.shift_at(r, spec.info_cols + r) != 0) return false;
        for (std::size_t c = r + 1; c < spec.base_rows; ++c)
            if (spec.shift_at(r, spec.info_cols + c) != kNullShift) return false;
    }
    return true;
}

// Accumulate circulant(s) * block into acc, both length Z.
void xor_circulant(const BitVec& block, int s, std::size_t z, BitVec& acc) {
    for (std::size_t zi = 0; zi < z; ++zi)
        acc[zi] ^= block[(zi + static_cast<std::size_t>(s)) % z];
}

BitVec solve_parity_gauss(const CodeSpec& spec, const BitVec& rhs) {
    // Dense solve of P * p = rhs where P is the expanded parity part.
    const std::size_t m = spec.m();
    const std::size_t z = spec.lift;
    std::vector<BitVec> a(m, BitVec(m + 1, 0));
    for (std::size_t r = 0; r < spec.base_rows; ++r)
        for (std::size_t c = 0; c < spec.base_rows; ++c) {
            const int s = spec.shift_at(r, spec.info_cols + c);
            if (s == kNullShift) continue;
            for (std::size_t zi = 0; zi < z; ++zi)
                a[r * z + zi][c * z + (zi + static_cast<std::size_t>(s)) % z] = 1;
        }
    for (std::size_t r = 0; r < m; ++r) a[r][m] = rhs[r];

    std::size_t rank = 0;
    std::vector<std::size_t> pivot_col(m, 0);
    for (std::size_t c = 0; c < m && rank < m; ++c) {
        std::size_t pr = rank;
        while (pr < m && a[pr][c] == 0) ++pr;
        if (pr == m) continue;
        std::swap(a[rank], a[pr]);
        for (std::size_t r = 0; r < m; ++r)
            if (r != rank && a[r][c])
                for (std::size_t j = c; j <= m; ++j) a[r][j] ^= a[rank][j];
        pivot_col[rank] = c;
        ++rank;
    }
    if (rank < m) {
        // Consistent systems are still encodable; inconsistent ones are not.
        for (std::size_t r = rank; r < m; ++r)
            if (a[r][m]) throw EncodeSingular("parity part not solvable for this syndrome");
    }
    BitVec p(m, 0);
    for (std::size_t r = 0; r < rank; ++r) p[pivot_col[r]] = a[r][m];
    return p;
}

} // namespace

BitVec encode(const TannerGraph& graph, const BitVec& info_bits) {
    const CodeSpec& spec = graph.spec;
    if (info_bits.size() != spec.k())
        throw LengthMismatch("info bit count != K");

    const std::size_t z = spec.lift;
    // rhs[m] = XOR of info contributions at check m.
    BitVec rhs(spec.m(), 0);
    for (std::size_t r = 0; r < spec.base_rows; ++r) {
        BitVec acc(z, 0);
        for (std::size_t c = 0; c < spec.info_cols; ++c) {
            const int s = spec.shift_at(r, c);
            if (s == kNullShift) continue;
            BitVec block(info_bits.begin() + static_cast<long>(c * z),
                         info_bits.begin() + static_cast<long>((c + 1) * z));
            xor_circulant(block, s, z, acc);
        }
        std::copy(acc.begin(), acc.end(), rhs.begin() + static_cast<long>(r * z));
    }

    BitVec parity;
    if (back_substitutable(spec)) {
        parity.assign(spec.m(), 0);
        for (std::size_t r = 0; r < spec.base_rows; ++r) {
            BitVec acc(rhs.begin() + static_cast<long>(r * z),
                       rhs.begin() + static_cast<long>((r + 1) * z));
            for (std::size_t c = 0; c < r; ++c) {
                const int s = spec.shift_at(r, spec.info_cols + c);
                if (s == kNullShift) continue;
                BitVec block(parity.begin() + static_cast<long>(c * z),
                             parity.begin() + static_cast<long>((c + 1) * z));
                xor_circulant(block, s, z, acc);
            }
            std::copy(acc.begin(), acc.end(), parity.begin() + static_cast<long>(r * z));
        }
    } else {
        parity = solve_parity_gauss(spec, rhs);
    }

    BitVec codeword = info_bits;
    codeword.insert(codeword.end(), parity.begin(), parity.end());

    const BitVec syn = syndrome(graph, codeword);
    for (Bit b : syn)
        if (b) throw EncodeSingular("back-substitution left a non-zero syndrome");
    return codeword;
}

BitVec syndrome(const TannerGraph& graph, const BitVec& hard_bits) {
    if (hard_bits.size() != graph.var_nodes)
        throw LengthMismatch("bit count != N");
    BitVec syn(graph.check_nodes, 0);
    for (std::size_t e = 0; e < graph.edge_count(); ++e)
        syn[graph.edge_check[e]] ^= hard_bits[graph.edge_var[e]];
    return syn;
}

CodeSpec parse_spec(const std::string& text) {
    std::istringstream is(text);
    std::string tag;
    CodeSpec spec;
    if (!(is >> tag) || tag != "qcldpc")
        throw InvalidSpec("expected 'qcldpc' header");
    if (!(is >> spec.base_rows >> spec.base_cols >> spec.lift >> spec.info_cols))
        throw InvalidSpec("malformed header");
    spec.shifts.reserve(spec.base_rows * spec.base_cols);
    std::string tok;
    for (std::size_t i = 0; i < spec.base_rows * spec.base_cols; ++i) {
        if (!(is >> tok)) throw InvalidSpec("truncated shift matrix");
        if (tok == "-") {
            spec.shifts.push_back(kNullShift);
        } else {
            try {
                spec.shifts.push_back(std::stoi(tok));
            } catch (const std::exception&) {
                throw InvalidSpec("bad shift token: " + tok);
            }
        }
    }
    spec.validate();
    return spec;
}

std::string serialize_spec(const CodeSpec& spec) {
    std::ostringstream os;
    os << "qcldpc " << spec.base_rows << ' ' << spec.base_cols << ' ' << spec.lift << ' '
       << spec.info_cols << '\n';
    for (std::size_t r = 0; r < spec.base_rows; ++r) {
        for (std::size_t c = 0; c < spec.base_cols; ++c) {
            if (c) os << ' ';
            const int s = spec.shift_at(r, c);
            if (s == kNullShift)
                os << '-';
            else
                os << s;
        }
        os << '\n';
    }
    return os.str();
}

CodeSpec load_spec_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InvalidSpec("cannot open code spec file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_spec(ss.str());
}

CodeSpec default_desk_spec(std::size_t lift) {
    CodeSpec spec;
    spec.base_rows = 4;
    spec.base_cols = 8;
    spec.lift = lift;
    spec.info_cols = 4;
    const int X = kNullShift;
    // Info columns have degree 3, parity part is dual-diagonal.
    const int base[4][8] = {
        {1, 4, 7, X, 0, X, X, X},
        {6, 9, X, 3, 0, 0, X, X},
        {11, X, 2, 8, X, 0, 0, X},
        {X, 14, 13, 5, X, X, 0, 0},
    };
    spec.shifts.resize(32);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 8; ++c) {
            int s = base[r][c];
            spec.shifts[r * 8 + c] = (s == X) ? X : s % static_cast<int>(lift);
        }
    spec.validate();
    return spec;
}

} // namespace ahd::tanner

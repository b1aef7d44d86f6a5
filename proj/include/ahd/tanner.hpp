#ifndef AHD_TANNER_HPP
#define AHD_TANNER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ahd/bits.hpp"

namespace ahd::tanner {

constexpr int kNullShift = -1;

/// Quasi-cyclic parity-check description: a base matrix of circulant
/// shifts (kNullShift marks an absent block) lifted by Z.
struct CodeSpec {
    std::size_t base_rows = 0;
    std::size_t base_cols = 0;
    std::size_t lift = 1;            // Z
    std::size_t info_cols = 0;
    std::vector<int> shifts;         // base_rows * base_cols, row-major

    int shift_at(std::size_t r, std::size_t c) const { return shifts[r * base_cols + c]; }
    std::size_t n() const { return base_cols * lift; }
    std::size_t m() const { return base_rows * lift; }
    std::size_t k() const { return info_cols * lift; }

    void validate() const;           // throws InvalidSpec
};

/// Bipartite message-passing graph expanded from a CodeSpec.
/// Edges are in canonical order: row-major over the base matrix, then
/// lift index, grouped per check node.
struct TannerGraph {
    std::size_t var_nodes = 0;
    std::size_t check_nodes = 0;
    std::vector<std::uint32_t> edge_var;     // per edge, variable index
    std::vector<std::uint32_t> edge_check;   // per edge, check index
    std::vector<std::uint32_t> check_offset; // check_nodes + 1, edges of check m are [off[m], off[m+1])
    std::vector<std::vector<std::uint32_t>> var_edges; // per variable, incident edge ids
    CodeSpec spec;

    std::size_t edge_count() const { return edge_var.size(); }
    std::string adjacency_serialization() const;
};

TannerGraph build_code(const CodeSpec& spec);

/// Systematic encoding: codeword = [info | parity], H*c = 0 over GF(2).
/// Uses dual-diagonal back-substitution when the parity part allows it,
/// otherwise Gaussian elimination on the parity submatrix.
BitVec encode(const TannerGraph& graph, const BitVec& info_bits);

BitVec syndrome(const TannerGraph& graph, const BitVec& hard_bits);

/// Dense expansion of H, mostly for oracles and rank checks.
std::vector<BitVec> expand_dense(const CodeSpec& spec);
std::size_t gf2_rank(std::vector<BitVec> rows);

// Spec file format: header "qcldpc <rows> <cols> <Z> <info_cols>", then
// base_rows lines of base_cols shifts, '-' for null.
CodeSpec parse_spec(const std::string& text);
std::string serialize_spec(const CodeSpec& spec);
CodeSpec load_spec_file(const std::string& path);

/// Desk-scale default: 4x8 base (rate 1/2), dual-diagonal parity part.
CodeSpec default_desk_spec(std::size_t lift);

} // namespace ahd::tanner

#endif

#pragma once

#include <cmath>
#include <vector>

#include "ethladder/basis.hpp"
#include "ethladder/sparse.hpp"

namespace ethladder {

// Asymmetric two-leg ladder: a long leg of n_left = 2*n_right - 1 spins and
// a short leg of n_right spins, exchange J = 1 along the legs, rung
// exchange kappa. Site list: left leg sites first (bits 0..n_left-1),
// then right leg (bits n_left..n-1). Rung i couples bit i-1 to bit
// n_left+i-1 for i = 1..n_right, so the ladder portion sits at the
// bit-0 end of the long leg.
struct LadderParams {
    int n_right = 1;
    double delta = 0.1;
    double kappa = 0.0;

    int n_left() const { return 2 * n_right - 1; }
    int n_sites() const { return 3 * n_right - 1; }

    void validate() const {
        if (n_right < 1)
            throw config_error("LadderParams: n_right must be positive");
        if (!std::isfinite(delta) || !std::isfinite(kappa))
            throw config_error("LadderParams: delta and kappa must be finite");
        if (kappa < 0.0)
            throw config_error("LadderParams: kappa must be nonnegative");
    }
};

// One XXZ exchange bond between two sites (bit positions).
struct Bond {
    int a = 0;
    int b = 0;
};

namespace detail {

// H_bond = Sx Sx + Sy Sy + delta Sz Sz summed over `bonds`, scaled by
// `scale`, restricted to the sector. The flip-flop part has matrix
// element 1/2 between configurations differing on an anti-aligned bond;
// the Ising part contributes delta/4 * s_a * s_b on the diagonal.
inline SparseOperator build_xxz_bonds(const SectorBasis& basis,
                                      const std::vector<Bond>& bonds,
                                      double delta, double scale,
                                      std::string label) {
    SparseBuilder builder(basis.dim());
    for (int row = 0; row < basis.dim(); ++row) {
        const std::uint64_t s = basis.states[row];
        double diag = 0.0;
        for (const Bond& bond : bonds) {
            const int sa = (s >> bond.a) & 1 ? 1 : -1;
            const int sb = (s >> bond.b) & 1 ? 1 : -1;
            diag += 0.25 * delta * sa * sb;
            if (sa != sb) {
                const std::uint64_t flipped =
                    s ^ ((std::uint64_t(1) << bond.a) | (std::uint64_t(1) << bond.b));
                const int colIdx = basis.index_of(flipped);
                if (colIdx < 0)
                    throw sector_error("build_xxz_bonds: flip left the sector");
                builder.add(row, colIdx, 0.5 * scale);
            }
        }
        if (diag != 0.0) builder.add(row, row, diag * scale);
    }
    return builder.finish(std::move(label));
}

inline std::vector<Bond> chain_bonds(int first_bit, int length) {
    std::vector<Bond> bonds;
    for (int i = 0; i + 1 < length; ++i)
        bonds.push_back({first_bit + i, first_bit + i + 1});
    return bonds;
}

inline std::vector<Bond> rung_bonds(const LadderParams& params) {
    std::vector<Bond> bonds;
    for (int i = 0; i < params.n_right; ++i)
        bonds.push_back({i, params.n_left() + i});
    return bonds;
}

} // namespace detail

// The four pieces of the ladder Hamiltonian. h_total = h_left + h_right +
// kappa * h_rung; all commute with total S^z by construction.
struct LadderOperators {
    SparseOperator h_total;
    SparseOperator h_left;
    SparseOperator h_right;
    SparseOperator h_rung;  // unscaled interaction part
};

inline LadderOperators build_hamiltonian(const LadderParams& params,
                                         const SectorBasis& basis) {
    params.validate();
    if (basis.n_sites != params.n_sites())
        throw dimension_error("build_hamiltonian: basis size does not match ladder");

    LadderOperators ops;
    ops.h_left = detail::build_xxz_bonds(
        basis, detail::chain_bonds(0, params.n_left()), params.delta, 1.0, "H_left");
    ops.h_right = detail::build_xxz_bonds(
        basis, detail::chain_bonds(params.n_left(), params.n_right), params.delta, 1.0,
        "H_right");
    ops.h_rung = detail::build_xxz_bonds(basis, detail::rung_bonds(params),
                                         params.delta, 1.0, "H_rung");

    SparseOperator legs = combine(1.0, ops.h_left, 1.0, ops.h_right, "H_legs");
    ops.h_total = combine(1.0, legs, params.kappa, ops.h_rung, "H");
    return ops;
}

// Energy-difference observable H_left - H_right; independent of kappa.
inline SparseOperator build_observable_d(const LadderParams& params,
                                         const SectorBasis& basis) {
    params.validate();
    if (basis.n_sites != params.n_sites())
        throw dimension_error("build_observable_d: basis size does not match ladder");
    SparseOperator left = detail::build_xxz_bonds(
        basis, detail::chain_bonds(0, params.n_left()), params.delta, 1.0, "H_left");
    SparseOperator right = detail::build_xxz_bonds(
        basis, detail::chain_bonds(params.n_left(), params.n_right), params.delta, 1.0,
        "H_right");
    return combine(1.0, left, -1.0, right, "D");
}

} // namespace ethladder

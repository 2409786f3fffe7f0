#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <lapacke.h>

#include "ethladder/sparse.hpp"

namespace ethladder {

// Eigendecomposition of a sector Hamiltonian, optionally augmented with
// the diagonal matrix elements of an observable in the eigenbasis.
struct Spectrum {
    Vec energies;   // ascending
    Mat eigvecs;    // columns; 0x0 when not requested
    Vec d_diag;     // <n|D|n>, empty until attached
    Vec d2_diag;    // <n|D^2|n>

    int dim() const { return static_cast<int>(energies.size()); }
    bool has_vectors() const { return eigvecs.size() > 0; }
    bool has_diagonals() const { return d_diag.size() > 0; }
};

inline constexpr int kDenseCeilingDefault = 30000;

inline Spectrum diagonalize(const SparseOperator& h, bool want_vectors,
                            int dense_ceiling = kDenseCeilingDefault) {
    const int n = h.dim();
    if (n > dense_ceiling)
        throw dimension_error(
            "diagonalize: dimension exceeds the dense ceiling; use the "
            "typicality path for sectors this large");
    Spectrum spec;
    spec.energies.resize(n);
    Mat a = to_dense(h);
    const lapack_int info =
        LAPACKE_dsyevd(LAPACK_COL_MAJOR, want_vectors ? 'V' : 'N', 'L', n,
                       a.data(), n, spec.energies.data());
    if (info != 0)
        throw state_error("diagonalize: LAPACK dsyevd failed with info " +
                          std::to_string(info));
    if (want_vectors) spec.eigvecs = std::move(a);
    return spec;
}

// Attach D_nn and (D^2)_nn for the given observable.
inline void attach_observable_diagonals(const SparseOperator& d, Spectrum& spec) {
    if (!spec.has_vectors())
        throw state_error("attach_observable_diagonals: spectrum carries no eigenvectors");
    if (d.dim() != spec.dim())
        throw dimension_error("attach_observable_diagonals: dimension mismatch");
    const int n = spec.dim();
    spec.d_diag.resize(n);
    spec.d2_diag.resize(n);
    Vec column(n), image(n);
    for (int j = 0; j < n; ++j) {
        column = spec.eigvecs.col(j);
        matvec_into(d, column, image);
        spec.d_diag[j] = column.dot(image);
        spec.d2_diag[j] = image.squaredNorm();
    }
}

// Normalized Gaussian shell weights p_n ~ exp(-(E_n - e_bar)^2 / (2 sigma_e^2)).
inline Vec gaussian_weights(const Vec& energies, double e_bar, double sigma_e) {
    if (!(sigma_e > 0.0))
        throw shell_error("gaussian_weights: sigma_e must be positive");
    const int n = static_cast<int>(energies.size());
    if (n == 0) throw shell_error("gaussian_weights: empty spectrum");

    double max_exponent = -std::numeric_limits<double>::infinity();
    Vec expo(n);
    for (int i = 0; i < n; ++i) {
        const double x = (energies[i] - e_bar) / sigma_e;
        expo[i] = -0.5 * x * x;
        max_exponent = std::max(max_exponent, expo[i]);
    }
    // If even the closest level underflows, the shell holds no weight.
    if (max_exponent < std::log(std::numeric_limits<double>::min()))
        throw shell_error("gaussian_weights: all weights underflow; empty shell");

    Vec weights(n);
    CompensatedSum norm;
    for (int i = 0; i < n; ++i) {
        weights[i] = std::exp(expo[i] - max_exponent);
        norm.add(weights[i]);
    }
    weights /= norm.value();
    return weights;
}

// Shell statistics of an observable over Hamiltonian eigenstates.
struct EthStats {
    double d_bar = 0.0;    // shell mean of D_nn
    double sigma2 = 0.0;   // shell variance of D_nn
    double delta2 = 0.0;   // full spectral variance of D on the shell
    double v = 0.0;        // sigma2 / delta2
    double d_eff = 1.0;    // participation ratio of the shell weights
    double e_bar = 0.0;
    double sigma_e = 0.0;
};

namespace detail {

inline double clamp_variance(double value, const char* what) {
    if (value < 0.0) {
        if (value > -1e-12) return 0.0;
        throw state_error(std::string(what) + ": variance came out negative beyond tolerance");
    }
    return value;
}

} // namespace detail

inline EthStats eth_stats_exact(const Spectrum& spec, double e_bar, double sigma_e) {
    if (!spec.has_diagonals())
        throw state_error("eth_stats_exact: spectrum carries no observable diagonals");
    const Vec p = gaussian_weights(spec.energies, e_bar, sigma_e);
    const int n = spec.dim();

    CompensatedSum mean, second, full_second, inv_part;
    for (int i = 0; i < n; ++i) {
        mean.add(p[i] * spec.d_diag[i]);
        second.add(p[i] * spec.d_diag[i] * spec.d_diag[i]);
        full_second.add(p[i] * spec.d2_diag[i]);
        inv_part.add(p[i] * p[i]);
    }

    EthStats stats;
    stats.e_bar = e_bar;
    stats.sigma_e = sigma_e;
    stats.d_bar = mean.value();
    stats.sigma2 = detail::clamp_variance(second.value() - stats.d_bar * stats.d_bar,
                                          "eth_stats_exact sigma2");
    stats.delta2 = detail::clamp_variance(full_second.value() - stats.d_bar * stats.d_bar,
                                          "eth_stats_exact delta2");
    stats.d_eff = 1.0 / inv_part.value();

    const double degenerate_tol = 1e-10 * std::max(1.0, stats.d_bar * stats.d_bar);
    if (stats.delta2 < degenerate_tol)
        throw degenerate_observable_error(
            "eth_stats_exact: observable is constant on the shell; v undefined");
    stats.v = stats.sigma2 / stats.delta2;
    if (stats.v > 1.0 && stats.v < 1.0 + 1e-9) stats.v = 1.0;
    return stats;
}

} // namespace ethladder

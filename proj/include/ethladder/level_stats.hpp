#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "ethladder/common.hpp"

namespace ethladder {

// Contiguous block of levels with |E - e_bar| <= half_width, for spacing
// statistics away from the spectral edges.
inline std::vector<double> select_window(const Vec& energies, double e_bar, double half_width,
                                         std::size_t min_levels = 300) {
    if (!(half_width > 0.0)) throw window_error("select_window: half_width must be positive");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(energies.size()));
    double prev = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < energies.size(); ++i) {
        const double e = energies[i];
        if (e < prev) throw domain_error("select_window: energies must be ascending");
        prev = e;
        if (std::abs(e - e_bar) <= half_width) out.push_back(e);
    }
    if (out.size() < min_levels)
        throw window_error("select_window: only " + std::to_string(out.size()) +
                           " levels inside the window; enlarge half_width");
    return out;
}

// Ascending window energies mapped through a fitted cumulative staircase so
// the mean nearest-neighbor spacing becomes 1.
struct UnfoldedSpectrum {
    std::vector<double> raw;
    std::vector<double> unfolded;
    int fit_degree = 0;
    double window_lo = 0.0;
    double window_hi = 0.0;
};

namespace detail {

inline void chebyshev_row(double x, int degree, double* row) {
    row[0] = 1.0;
    if (degree >= 1) row[1] = x;
    for (int k = 2; k <= degree; ++k) row[k] = 2.0 * x * row[k - 1] - row[k - 2];
}

}  // namespace detail

// Fits the cumulative level count of `support` with a polynomial and maps the
// window energies through it. `support` may extend past the window to keep
// the fit stable at the edges; it must contain the window.
inline UnfoldedSpectrum unfold_with_support(const std::vector<double>& window,
                                            const std::vector<double>& support,
                                            int fit_degree = 9) {
    if (fit_degree < 1 || fit_degree % 2 == 0)
        throw config_error("unfold: fit degree must be odd and positive");
    if (window.size() < 300) throw window_error("unfold: need at least 300 levels");
    if (support.size() < window.size() || support.front() > window.front() ||
        support.back() < window.back())
        throw domain_error("unfold: support does not contain the window");

    const double center = 0.5 * (support.front() + support.back());
    const double half = 0.5 * (support.back() - support.front());
    if (!(half > 0.0)) throw unfolding_error("unfold: degenerate energy range");

    const int cols = fit_degree + 1;
    Mat a(static_cast<Eigen::Index>(support.size()), cols);
    Vec rhs(static_cast<Eigen::Index>(support.size()));
    std::vector<double> row(static_cast<std::size_t>(cols));
    for (std::size_t j = 0; j < support.size(); ++j) {
        detail::chebyshev_row((support[j] - center) / half, fit_degree, row.data());
        for (int k = 0; k < cols; ++k) a(static_cast<Eigen::Index>(j), k) = row[k];
        rhs[static_cast<Eigen::Index>(j)] = static_cast<double>(j) + 0.5;
    }
    const Vec coeff = a.colPivHouseholderQr().solve(rhs);

    UnfoldedSpectrum us;
    us.raw = window;
    us.fit_degree = fit_degree;
    us.window_lo = window.front();
    us.window_hi = window.back();
    us.unfolded.resize(window.size());
    for (std::size_t j = 0; j < window.size(); ++j) {
        detail::chebyshev_row((window[j] - center) / half, fit_degree, row.data());
        double value = 0.0;
        for (int k = 0; k < cols; ++k) value += coeff[k] * row[k];
        us.unfolded[j] = value;
    }
    for (std::size_t j = 1; j < us.unfolded.size(); ++j)
        if (!(us.unfolded[j] >= us.unfolded[j - 1]))
            throw unfolding_error("unfold: fitted staircase not monotone on the window; "
                                  "reduce the fit degree");
    const double mean =
        (us.unfolded.back() - us.unfolded.front()) / static_cast<double>(window.size() - 1);
    if (std::abs(mean - 1.0) > 0.02)
        throw unfolding_error("unfold: mean unfolded spacing " + std::to_string(mean) +
                              " deviates from 1 by more than 2%");
    return us;
}

inline UnfoldedSpectrum unfold(const std::vector<double>& window, int fit_degree = 9) {
    return unfold_with_support(window, window, fit_degree);
}

// Nearest-neighbor spacings of the unfolded levels. Spacings below 1e-12 are
// dropped as numerical degeneracies; more than 1% of them indicates an
// unresolved symmetry in the sector.
inline std::vector<double> spacings(const UnfoldedSpectrum& us, int* dropped_out = nullptr) {
    if (us.unfolded.size() < 2) throw spacing_error("spacings: need at least 2 levels");
    std::vector<double> s;
    s.reserve(us.unfolded.size() - 1);
    int dropped = 0;
    for (std::size_t j = 1; j < us.unfolded.size(); ++j) {
        const double gap = us.unfolded[j] - us.unfolded[j - 1];
        if (gap < 1e-12)
            ++dropped;
        else
            s.push_back(gap);
    }
    if (dropped_out) *dropped_out = dropped;
    const double total = static_cast<double>(us.unfolded.size() - 1);
    if (dropped > 0.01 * total)
        throw spacing_error("spacings: " + std::to_string(dropped) + " of " +
                            std::to_string(us.unfolded.size() - 1) +
                            " spacings are degenerate; sector likely mixes a symmetry");
    return s;
}

namespace detail {

inline double brody_b(double omega) {
    return std::pow(std::tgamma((omega + 2.0) / (omega + 1.0)), omega + 1.0);
}

}  // namespace detail

// One-parameter spacing density interpolating Poisson (omega = 0) and the
// Wigner surmise (omega = 1), normalized to unit mass and unit mean.
inline double brody_pdf(double s, double omega) {
    if (s < 0.0) throw domain_error("brody_pdf: spacing must be non-negative");
    if (!(omega > -1.0)) throw domain_error("brody_pdf: omega must exceed -1");
    const double b = detail::brody_b(omega);
    return (omega + 1.0) * b * std::pow(s, omega) * std::exp(-b * std::pow(s, omega + 1.0));
}

inline double brody_cdf(double s, double omega) {
    if (s < 0.0) throw domain_error("brody_cdf: spacing must be non-negative");
    if (!(omega > -1.0)) throw domain_error("brody_cdf: omega must exceed -1");
    return -std::expm1(-detail::brody_b(omega) * std::pow(s, omega + 1.0));
}

struct BrodyFit {
    double omega = 0.0;
    double log_likelihood = 0.0;
    int n_spacings = 0;
    double ks_stat = 0.0;
    bool at_boundary = false;
};

// Maximum-likelihood Brody parameter over omega in [-0.2, 1.5] by
// golden-section search, with a Kolmogorov-Smirnov statistic against the
// fitted distribution.
inline BrodyFit fit_brody(const std::vector<double>& s) {
    if (s.size() < 200) throw spacing_error("fit_brody: need at least 200 spacings");

    double sum_log = 0.0;
    for (const double x : s) {
        if (!(x > 0.0)) throw domain_error("fit_brody: spacings must be positive");
        sum_log += std::log(x);
    }
    const double n = static_cast<double>(s.size());
    const auto log_likelihood = [&](double omega) {
        const double z = (omega + 2.0) / (omega + 1.0);
        const double log_b = (omega + 1.0) * std::lgamma(z);
        CompensatedSum powers;
        for (const double x : s) powers.add(std::pow(x, omega + 1.0));
        return n * (std::log(omega + 1.0) + log_b) + omega * sum_log -
               std::exp(log_b) * powers.value();
    };

    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = -0.2, hi = 1.5;
    double x1 = hi - golden * (hi - lo);
    double x2 = lo + golden * (hi - lo);
    double f1 = log_likelihood(x1);
    double f2 = log_likelihood(x2);
    while (hi - lo > 1e-4) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + golden * (hi - lo);
            f2 = log_likelihood(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - golden * (hi - lo);
            f1 = log_likelihood(x1);
        }
    }

    BrodyFit fit;
    fit.omega = 0.5 * (lo + hi);
    fit.log_likelihood = log_likelihood(fit.omega);
    fit.n_spacings = static_cast<int>(s.size());
    fit.at_boundary = fit.omega < -0.2 + 1e-3 || fit.omega > 1.5 - 1e-3;

    std::vector<double> sorted = s;
    std::sort(sorted.begin(), sorted.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = brody_cdf(sorted[i], fit.omega);
        ks = std::max(ks, std::abs(f - static_cast<double>(i) / n));
        ks = std::max(ks, std::abs(f - static_cast<double>(i + 1) / n));
    }
    fit.ks_stat = ks;
    return fit;
}

// Density histogram of spacings on [0, 4] for table emission.
inline std::vector<double> nnsd_histogram(const std::vector<double>& s, int bins = 25,
                                          double s_max = 4.0) {
    if (bins < 1 || !(s_max > 0.0)) throw config_error("nnsd_histogram: bad bin layout");
    if (s.empty()) throw spacing_error("nnsd_histogram: no spacings");
    std::vector<double> density(static_cast<std::size_t>(bins), 0.0);
    const double width = s_max / bins;
    for (const double x : s) {
        const int idx = static_cast<int>(x / width);
        if (idx >= 0 && idx < bins) density[static_cast<std::size_t>(idx)] += 1.0;
    }
    for (double& d : density) d /= static_cast<double>(s.size()) * width;
    return density;
}

struct NnsdResult {
    UnfoldedSpectrum unfolded;
    std::vector<double> spacing_values;
    BrodyFit fit;
    int dropped = 0;
};

// Window selection, unfolding (fit support widened by 10%), spacing
// extraction, and Brody fit in one step.
inline NnsdResult nnsd_analysis(const Vec& energies, double e_bar, double half_width,
                                int fit_degree = 9) {
    NnsdResult result;
    const auto window = select_window(energies, e_bar, half_width);
    const auto support = select_window(energies, e_bar, 1.1 * half_width);
    result.unfolded = unfold_with_support(window, support, fit_degree);
    result.spacing_values = spacings(result.unfolded, &result.dropped);
    result.fit = fit_brody(result.spacing_values);
    return result;
}

}  // namespace ethladder

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "ethladder/sparse.hpp"

namespace ethladder {

// Interval guaranteed (after padding) to contain the spectrum of an operator.
struct SpectralBounds {
    double lower = 0.0;
    double upper = 0.0;

    double center() const { return 0.5 * (lower + upper); }
    double half_width() const { return 0.5 * (upper - lower); }
};

namespace detail {

inline double rayleigh_extreme(const SparseOperator& h, double shift,
                               std::uint64_t seed, int iters) {
    const int n = h.dim();
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> dist;
    Vec x(n), y(n);
    for (int i = 0; i < n; ++i) x[i] = dist(gen);
    x.normalize();
    double quotient = 0.0;
    for (int it = 0; it < iters; ++it) {
        matvec_into(h, x, y);
        y -= shift * x;
        const double norm = y.norm();
        if (norm == 0.0) return shift;
        y /= norm;
        x.swap(y);
        matvec_into(h, x, y);
        quotient = x.dot(y);
    }
    return quotient;
}

} // namespace detail

// Gershgorin envelope tightened by two rounds of shifted power iteration and
// padded so that Chebyshev arguments stay inside [-1, 1].
inline SpectralBounds estimate_bounds(const SparseOperator& h,
                                      std::uint64_t seed = 0x5eedb0d5u,
                                      int iters = 100, double padding = 0.02) {
    const auto [g_lo, g_hi] = gershgorin_interval(h);
    if (!std::isfinite(g_lo) || !std::isfinite(g_hi))
        throw bounds_error("estimate_bounds: operator has non-finite entries");
    if (h.dim() == 1) return {g_lo, g_hi};

    const double first =
        detail::rayleigh_extreme(h, 0.5 * (g_lo + g_hi), mix_seed(seed, 1), iters);
    const double second = detail::rayleigh_extreme(h, first, mix_seed(seed, 2), iters);

    double lo = std::min(first, second);
    double hi = std::max(first, second);
    const double pad = padding * (hi - lo) + 1e-9 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
    lo = std::max(lo - pad, g_lo);
    hi = std::min(hi + pad, g_hi);
    return {lo, hi};
}

// One Chebyshev step of exp(-i H dt) with Bessel-function coefficients.
struct PropagationPlan {
    SpectralBounds bounds;
    double dt = 0.0;
    Complex phase{1.0, 0.0};      // exp(-i center dt)
    std::vector<Complex> coeffs;  // (2 - delta_k0) (-i)^k J_k(half_width dt)

    int order() const { return static_cast<int>(coeffs.size()); }
};

inline PropagationPlan make_propagation_plan(const SpectralBounds& bounds, double dt,
                                             double tail_tol = 1e-12,
                                             int max_order = 1 << 17) {
    if (!std::isfinite(bounds.lower) || !std::isfinite(bounds.upper) ||
        bounds.upper < bounds.lower)
        throw bounds_error("make_propagation_plan: invalid spectral bounds");
    if (!std::isfinite(dt) || dt <= 0.0)
        throw plan_error("make_propagation_plan: dt must be positive");

    PropagationPlan plan;
    plan.bounds = bounds;
    plan.dt = dt;
    plan.phase = std::exp(Complex(0.0, -bounds.center() * dt));

    const double x = bounds.half_width() * dt;
    if (x < 1e-14) {
        plan.coeffs = {Complex(1.0, 0.0)};
        return plan;
    }

    // J_k(x) only starts decaying for k beyond x, so run past that point and
    // keep going until two consecutive terms drop below the tail tolerance.
    const Complex minus_i(0.0, -1.0);
    Complex ik(1.0, 0.0);
    double prev_mag = 1.0;
    for (int k = 0; k <= max_order; ++k) {
        const double jk = std::cyl_bessel_j(k, x);
        plan.coeffs.push_back((k == 0 ? 1.0 : 2.0) * ik * jk);
        ik *= minus_i;
        const double mag = std::abs(2.0 * jk);
        if (k > x && mag < tail_tol && prev_mag < tail_tol) {
            while (!plan.coeffs.empty() && std::abs(plan.coeffs.back()) < tail_tol)
                plan.coeffs.pop_back();
            return plan;
        }
        prev_mag = mag;
    }
    throw plan_error("make_propagation_plan: expansion did not converge; "
                     "reduce dt or tighten the bounds");
}

inline void propagate_in_place(const PropagationPlan& plan, const SparseOperator& h,
                               CVec& psi) {
    if (h.dim() != psi.size())
        throw dimension_error("propagate_in_place: dimension mismatch");
    if (plan.order() == 1) {
        psi *= plan.phase * plan.coeffs[0];
        return;
    }
    const double center = plan.bounds.center();
    const double inv_half = 1.0 / plan.bounds.half_width();

    CVec t_prev = psi;
    CVec t_curr(psi.size()), t_next(psi.size());
    matvec_into(h, t_prev, t_curr);
    t_curr = (t_curr - center * t_prev) * inv_half;

    CVec acc = plan.coeffs[0] * t_prev + plan.coeffs[1] * t_curr;
    for (int k = 2; k < plan.order(); ++k) {
        matvec_into(h, t_curr, t_next);
        t_next = 2.0 * inv_half * (t_next - center * t_curr) - t_prev;
        acc += plan.coeffs[k] * t_next;
        t_prev.swap(t_curr);
        t_curr.swap(t_next);
    }
    psi = plan.phase * acc;
}

inline CVec propagate(const PropagationPlan& plan, const SparseOperator& h, CVec psi) {
    propagate_in_place(plan, h, psi);
    return psi;
}

// The action y = A x of a Hermitian operator given only implicitly, e.g. as a
// nested composition of sparse matvecs.
using LinearAction = std::function<void(const Vec&, Vec&)>;

inline LinearAction sparse_action(const SparseOperator& op) {
    return [&op](const Vec& x, Vec& y) { matvec_into(op, x, y); };
}

// Chebyshev expansion of a scalar function over the given bounds, with the
// order grown until the coefficient tail dies out and the quadrature is stable.
struct FunctionPlan {
    SpectralBounds bounds;
    std::vector<double> coeffs;

    int order() const { return static_cast<int>(coeffs.size()); }
};

namespace detail {

inline std::vector<double> chebyshev_quadrature(const std::function<double(double)>& f,
                                                const SpectralBounds& bounds,
                                                int n_coeffs) {
    const int m = 2 * n_coeffs;
    std::vector<double> samples(m);
    for (int j = 0; j < m; ++j) {
        const double theta = M_PI * (j + 0.5) / m;
        const double a = bounds.center() + bounds.half_width() * std::cos(theta);
        samples[j] = f(a);
        if (!std::isfinite(samples[j]))
            throw domain_error("chebyshev_quadrature: function not finite on the bounds");
    }
    std::vector<double> coeffs(n_coeffs);
    for (int k = 0; k < n_coeffs; ++k) {
        CompensatedSum sum;
        for (int j = 0; j < m; ++j)
            sum.add(samples[j] * std::cos(k * M_PI * (j + 0.5) / m));
        coeffs[k] = (k == 0 ? 1.0 : 2.0) / m * sum.value();
    }
    return coeffs;
}

} // namespace detail

inline FunctionPlan make_function_plan(const std::function<double(double)>& f,
                                       const SpectralBounds& bounds,
                                       double tail_tol = 1e-12,
                                       double stability_tol = 1e-13,
                                       int max_order = 1 << 16) {
    if (!std::isfinite(bounds.lower) || !std::isfinite(bounds.upper) ||
        bounds.upper < bounds.lower)
        throw bounds_error("make_function_plan: invalid spectral bounds");

    std::vector<double> previous;
    for (int order = 64; order <= max_order; order *= 2) {
        auto coeffs = detail::chebyshev_quadrature(f, bounds, order);
        double scale = 0.0;
        for (const double c : coeffs) scale = std::max(scale, std::abs(c));
        scale = std::max(scale, 1.0);

        double tail = 0.0;
        for (int k = 3 * order / 4; k < order; ++k)
            tail = std::max(tail, std::abs(coeffs[k]));

        bool stable = !previous.empty();
        for (std::size_t k = 0; stable && k < previous.size(); ++k)
            stable = std::abs(coeffs[k] - previous[k]) <= stability_tol * scale;

        if (tail <= tail_tol * scale && stable) {
            while (coeffs.size() > 1 && std::abs(coeffs.back()) <= tail_tol * scale)
                coeffs.pop_back();
            return {bounds, std::move(coeffs)};
        }
        previous = std::move(coeffs);
    }
    throw accuracy_error("make_function_plan: expansion did not converge within "
                         "the order cap");
}

inline Vec apply_function(const FunctionPlan& plan, const LinearAction& action, const Vec& x) {
    if (plan.order() == 1) return plan.coeffs[0] * x;
    const double center = plan.bounds.center();
    const double inv_half = 1.0 / plan.bounds.half_width();

    Vec t_prev = x;
    Vec t_curr(x.size()), t_next(x.size());
    action(t_prev, t_curr);
    t_curr = (t_curr - center * t_prev) * inv_half;

    Vec acc = plan.coeffs[0] * t_prev + plan.coeffs[1] * t_curr;
    for (int k = 2; k < plan.order(); ++k) {
        action(t_curr, t_next);
        t_next = 2.0 * inv_half * (t_next - center * t_curr) - t_prev;
        acc += plan.coeffs[k] * t_next;
        t_prev.swap(t_curr);
        t_curr.swap(t_next);
    }
    return acc;
}

} // namespace ethladder

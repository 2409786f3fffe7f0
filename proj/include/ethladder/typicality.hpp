#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "ethladder/chebyshev.hpp"
#include "ethladder/spectral.hpp"

namespace ethladder {

inline CVec sample_haar_state(int dim, std::uint64_t seed) {
    if (dim < 1) throw dimension_error("sample_haar_state: dim must be positive");
    std::mt19937_64 gen(mix_seed(seed));
    std::normal_distribution<double> dist;
    CVec psi(dim);
    for (int i = 0; i < dim; ++i) psi[i] = Complex(dist(gen), dist(gen));
    psi.normalize();
    return psi;
}

// A pure state narrowed onto an energy shell, with its realized diagnostics
// measured from the state itself. d_init is meaningful only for states
// prepared against an observable target and is NaN otherwise.
struct PreparedState {
    CVec psi;
    double e_mean = 0.0;
    double e_width = 0.0;
    double d_init = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

// Apply a real even/odd-free symmetric operator function to a complex vector
// by running the real Chebyshev recurrence on both components.
inline CVec apply_function_complex(const FunctionPlan& plan, const LinearAction& action,
                                   const CVec& x) {
    const Vec re = apply_function(plan, action, x.real());
    const Vec im = apply_function(plan, action, x.imag());
    CVec y(x.size());
    y.real() = re;
    y.imag() = im;
    return y;
}

inline FunctionPlan half_gaussian_plan(const SpectralBounds& bounds, double center,
                                       double sigma) {
    if (!(sigma > 0.0)) throw shell_error("gaussian filter: sigma must be positive");
    const auto g = [center, sigma](double e) {
        const double x = (e - center) / sigma;
        return std::exp(-0.25 * x * x);
    };
    return make_function_plan(g, bounds);
}

inline void measure_energy(const SparseOperator& h, const CVec& psi, double& e_mean,
                           double& e_width) {
    CVec hpsi(psi.size());
    matvec_into(h, psi, hpsi);
    e_mean = psi.dot(hpsi).real();
    const double second = hpsi.squaredNorm();
    e_width = std::sqrt(std::max(0.0, second - e_mean * e_mean));
}

} // namespace detail

// |phi> = g(H)|r> / norm with the amplitude filter g(E) = exp(-(E-e_bar)^2/(4 sigma_e^2)),
// so that occupations follow the Gaussian shell weights.
inline PreparedState prepare_filtered_state(const SparseOperator& h,
                                            const SpectralBounds& bounds_h,
                                            double e_bar, double sigma_e,
                                            std::uint64_t seed) {
    const auto plan = detail::half_gaussian_plan(bounds_h, e_bar, sigma_e);
    const CVec r = sample_haar_state(h.dim(), seed);
    CVec psi = detail::apply_function_complex(plan, sparse_action(h), r);
    const double norm = psi.norm();
    if (!(norm > 1e-150))
        throw shell_error("prepare_filtered_state: filter norm underflow; the "
                          "shell does not overlap the spectrum");
    psi /= norm;
    PreparedState state;
    state.psi = std::move(psi);
    detail::measure_energy(h, state.psi, state.e_mean, state.e_width);
    return state;
}

// Parameters of the squeezed two-observable ensemble
// rho ~ exp(-[(H-h0)^2 + beta^2 (D-d0)^2] / (2 sigma^2)).
struct ModSpec {
    double h0 = 0.0;
    double beta = 1.0;
    double d0 = 0.0;
    double sigma = 0.6;

    void validate() const {
        if (!std::isfinite(h0) || !std::isfinite(beta) || !std::isfinite(d0) ||
            !std::isfinite(sigma))
            throw config_error("ModSpec: parameters must be finite");
        if (!(sigma > 0.0)) throw config_error("ModSpec: sigma must be positive");
        if (beta < 0.0) throw config_error("ModSpec: beta must be non-negative");
    }
};

namespace detail {

// y = -[(H-h0)((H-h0)x) + beta^2 (D-d0)((D-d0)x)] / (4 sigma^2), never assembled.
inline LinearAction mod_exponent_action(const SparseOperator& h, const SparseOperator& d,
                                        const ModSpec& spec) {
    auto work = std::make_shared<std::pair<Vec, Vec>>(Vec(h.dim()), Vec(h.dim()));
    const double scale = 1.0 / (4.0 * spec.sigma * spec.sigma);
    const double beta2 = spec.beta * spec.beta;
    return [&h, &d, spec, beta2, scale, work](const Vec& x, Vec& y) {
        Vec& t1 = work->first;
        Vec& t2 = work->second;
        matvec_into(h, x, t1);
        t1 -= spec.h0 * x;
        matvec_into(h, t1, t2);
        t2 -= spec.h0 * t1;
        y = -scale * t2;
        if (beta2 > 0.0) {
            matvec_into(d, x, t1);
            t1 -= spec.d0 * x;
            matvec_into(d, t1, t2);
            t2 -= spec.d0 * t1;
            y -= (scale * beta2) * t2;
        }
    };
}

// The exponent operator is minus a sum of squares, so its spectrum sits in
// [-(worst case), 0]; the worst case comes from triangle estimates on the
// factor bounds, padded 5%.
inline SpectralBounds mod_exponent_bounds(const SpectralBounds& bounds_h,
                                          const SpectralBounds& bounds_d,
                                          const ModSpec& spec) {
    const double mh = std::max(std::abs(bounds_h.lower - spec.h0),
                               std::abs(bounds_h.upper - spec.h0));
    const double md = std::max(std::abs(bounds_d.lower - spec.d0),
                               std::abs(bounds_d.upper - spec.d0));
    const double reach =
        (mh * mh + spec.beta * spec.beta * md * md) / (4.0 * spec.sigma * spec.sigma);
    return {-1.05 * reach - 1e-9, 0.0};
}

} // namespace detail

// |phi> ~ rho^(1/2)|r> via a Chebyshev expansion of exp on the composite
// exponent; diagnostics are measured from the resulting state.
inline PreparedState prepare_mod_state(const SparseOperator& h, const SparseOperator& d,
                                       const SpectralBounds& bounds_h,
                                       const SpectralBounds& bounds_d,
                                       const ModSpec& spec, std::uint64_t seed) {
    spec.validate();
    if (h.dim() != d.dim())
        throw dimension_error("prepare_mod_state: operator dimensions differ");
    const auto action = detail::mod_exponent_action(h, d, spec);
    const auto bounds_a = detail::mod_exponent_bounds(bounds_h, bounds_d, spec);
    const auto plan = make_function_plan([](double a) { return std::exp(a); }, bounds_a);

    const CVec r = sample_haar_state(h.dim(), seed);
    CVec psi = detail::apply_function_complex(plan, action, r);
    const double norm = psi.norm();
    if (!(norm > 1e-150))
        throw state_error("prepare_mod_state: filter norm underflow; the targets "
                          "are not reachable inside the shell");
    psi /= norm;

    PreparedState state;
    state.psi = std::move(psi);
    detail::measure_energy(h, state.psi, state.e_mean, state.e_width);
    state.d_init = expectation(d, state.psi);
    return state;
}

// Conservative estimate of the largest (direction = +1) or smallest (-1)
// expectation the observable can reach for states living inside the energy
// shell: power iteration on g(H) (D + shift) g(H). The unit-norm iterate
// weighs the filter twice, so the value is a lower bound on what squeezed
// preparations actually realize; use it for feasibility probes, not as the
// reachable maximum.
inline double shell_observable_extreme(const SparseOperator& h, const SparseOperator& d,
                                       const SpectralBounds& bounds_h,
                                       const SpectralBounds& bounds_d, double e_bar,
                                       double sigma_e, int direction,
                                       std::uint64_t seed = 0x5e11u,
                                       int iters = 30) {
    if (direction != 1 && direction != -1)
        throw domain_error("shell_observable_extreme: direction must be +1 or -1");
    const auto plan = detail::half_gaussian_plan(bounds_h, e_bar, sigma_e);
    const auto g = sparse_action(h);

    // D + shift (direction +1) or -D + shift (direction -1), strictly positive
    const double span = bounds_d.upper - bounds_d.lower;
    const double shift = (direction == 1 ? -bounds_d.lower : bounds_d.upper) + 0.05 * span + 1e-9;

    std::mt19937_64 gen(mix_seed(seed, 0x0b5e7fULL));
    std::normal_distribution<double> dist;
    Vec x(h.dim());
    for (int i = 0; i < x.size(); ++i) x[i] = dist(gen);
    x.normalize();

    Vec y(h.dim()), t(h.dim());
    double quotient = 0.0;
    for (int it = 0; it < iters; ++it) {
        t = apply_function(plan, g, x);
        matvec_into(d, t, y);
        if (direction == -1) y = -y;
        y += shift * t;
        y = apply_function(plan, g, y);
        quotient = x.dot(y);
        const double norm = y.norm();
        if (norm == 0.0) break;
        x = y / norm;
    }
    return direction == 1 ? quotient - shift : shift - quotient;
}

// Outcome of the parameter search for a displaced shell state.
struct TunedMod {
    ModSpec spec;
    double e_width = 0.0;
    double d_init = 0.0;
    double d_bar_shell = 0.0; // observable mean of the undisplaced shell
    double d_max_shell = 0.0; // farthest in-width observable mean any grid point reached
};

// Deterministic grid search over (beta, sigma) with h0 re-centered so each
// candidate sits at the shell center. Every grid point is prepared once with
// a fixed probe seed; the candidates whose realized width lies in
// [0.45, 0.75] define, through the farthest-displaced among them, how far the
// preparation can move the observable without giving up the width target.
// The first candidate in grid order displaced to 40-65% of that reach wins,
// which keeps the relative displacement comparable across system sizes. The
// probe seed is fixed so tuned parameters carry over to any preparation seed.
inline TunedMod tune_mod_parameters(const SparseOperator& h, const SparseOperator& d,
                                    const SpectralBounds& bounds_h,
                                    const SpectralBounds& bounds_d, double e_bar,
                                    double sigma_e, double d0) {
    constexpr std::uint64_t kProbeSeed = 0x7a11b0a7dULL;
    const int direction = d0 >= 0.0 ? 1 : -1;

    ModSpec probe;
    probe.h0 = e_bar;
    probe.beta = 0.0;
    probe.d0 = d0;
    probe.sigma = sigma_e;
    const PreparedState shell = prepare_mod_state(h, d, bounds_h, bounds_d, probe, kProbeSeed);
    const double d_bar_shell = shell.d_init;

    const double width_lo = 0.45, width_hi = 0.75;

    static constexpr double kBetaGrid[] = {1.0, 1.5, 2.0, 0.75, 3.0, 0.5, 0.35, 0.25, 0.18, 0.12};
    static constexpr double kSigmaGrid[] = {0.6, 0.5, 0.7, 0.45, 0.55, 0.65, 0.75};

    struct Candidate {
        ModSpec spec;
        double e_width = 0.0;
        double d_init = 0.0;
        double displacement = 0.0;
        bool in_width = false;
    };
    std::vector<Candidate> grid;
    grid.reserve(std::size(kSigmaGrid) * std::size(kBetaGrid));

    double width_miss = std::numeric_limits<double>::infinity();
    std::string closest;
    for (const double sigma : kSigmaGrid) {
        for (const double beta : kBetaGrid) {
            ModSpec cand;
            cand.h0 = e_bar;
            cand.beta = beta;
            cand.d0 = d0;
            cand.sigma = sigma;

            PreparedState state;
            bool prepared = false;
            for (int attempt = 0; attempt < 3; ++attempt) {
                try {
                    state = prepare_mod_state(h, d, bounds_h, bounds_d, cand, kProbeSeed);
                } catch (const state_error&) {
                    break;
                }
                prepared = true;
                if (std::abs(state.e_mean - e_bar) <= 0.1) break;
                cand.h0 -= state.e_mean - e_bar;
            }
            if (!prepared) continue;

            Candidate entry;
            entry.spec = cand;
            entry.e_width = state.e_width;
            entry.d_init = state.d_init;
            entry.displacement = std::abs(state.d_init - d_bar_shell);
            entry.in_width = state.e_width >= width_lo && state.e_width <= width_hi;
            grid.push_back(entry);

            const double miss = std::max({width_lo - state.e_width, state.e_width - width_hi, 0.0});
            if (miss < width_miss) {
                width_miss = miss;
                closest = "beta=" + std::to_string(beta) + " sigma=" + std::to_string(sigma) +
                          " gave e_width=" + std::to_string(state.e_width) +
                          " displacement=" + std::to_string(entry.displacement);
            }
        }
    }

    double headroom = 0.0;
    for (const auto& c : grid)
        if (c.in_width) headroom = std::max(headroom, c.displacement);
    if (headroom <= 0.0)
        throw tuning_error("tune_mod_parameters: no grid point realized the width band "
                           "[0.45, 0.75] (best candidate: " + closest + ")");

    const double displacement_lo = 0.40 * headroom;
    const double displacement_hi = 0.65 * headroom;
    for (const auto& c : grid) {
        if (!c.in_width || c.displacement < displacement_lo || c.displacement > displacement_hi)
            continue;
        TunedMod tuned;
        tuned.spec = c.spec;
        tuned.e_width = c.e_width;
        tuned.d_init = c.d_init;
        tuned.d_bar_shell = d_bar_shell;
        tuned.d_max_shell = d_bar_shell + direction * headroom;
        return tuned;
    }
    throw tuning_error("tune_mod_parameters: no grid point met the width and displacement "
                       "bands (displacement window [" + std::to_string(displacement_lo) +
                       ", " + std::to_string(displacement_hi) + "]; best candidate: " +
                       closest + ")");
}

// Sampled expectation trajectory on a uniform time grid.
struct TimeSeries {
    std::vector<double> times;
    std::vector<double> values;
};

inline TimeSeries relaxation_run(const SparseOperator& h, const SparseOperator& d,
                                 const SpectralBounds& bounds_h, const CVec& psi0,
                                 double t_max, double dt) {
    if (h.dim() != d.dim() || h.dim() != psi0.size())
        throw dimension_error("relaxation_run: dimension mismatch");
    if (!(t_max > 0.0) || !(dt > 0.0) || dt > t_max)
        throw config_error("relaxation_run: need 0 < dt <= t_max");

    const auto plan = make_propagation_plan(bounds_h, dt);
    const int n_steps = static_cast<int>(std::llround(t_max / dt));

    TimeSeries series;
    series.times.reserve(n_steps + 1);
    series.values.reserve(n_steps + 1);

    CVec psi = psi0;
    for (int step = 0; step <= n_steps; ++step) {
        if (step > 0) propagate_in_place(plan, h, psi);
        series.times.push_back(step * dt);
        series.values.push_back(expectation(d, psi));
    }
    if (std::abs(psi.norm() - 1.0) > 1e-8)
        throw accuracy_error("relaxation_run: propagation norm drift exceeded 1e-8");
    return series;
}

// Ratio of the trailing-window mean to the initial expectation.
struct LambdaResult {
    double lambda = 0.0;
    double d_init = 0.0;
    double tail_mean = 0.0;
    double tail_std = 0.0;
    bool converged = false;
};

inline LambdaResult lambda_estimate(const TimeSeries& series, double window_fraction = 0.25) {
    if (series.times.size() != series.values.size() || series.times.size() < 2)
        throw window_error("lambda_estimate: series too short");
    if (!(window_fraction > 0.0) || window_fraction > 1.0)
        throw window_error("lambda_estimate: window fraction must be in (0, 1]");

    const double t_start = series.times.back() * (1.0 - window_fraction) - 1e-9;
    CompensatedSum sum, sum_sq;
    int count = 0;
    for (std::size_t i = 0; i < series.times.size(); ++i) {
        if (series.times[i] < t_start) continue;
        sum.add(series.values[i]);
        sum_sq.add(series.values[i] * series.values[i]);
        ++count;
    }
    if (count < 8)
        throw window_error("lambda_estimate: trailing window holds fewer than 8 samples");

    LambdaResult result;
    result.d_init = series.values.front();
    if (std::abs(result.d_init) < 1e-12)
        throw domain_error("lambda_estimate: initial expectation is zero; ratio undefined");
    result.tail_mean = sum.value() / count;
    result.tail_std =
        std::sqrt(std::max(0.0, sum_sq.value() / count - result.tail_mean * result.tail_mean));
    result.lambda = result.tail_mean / result.d_init;
    result.converged = result.tail_std <= 0.05 * std::abs(result.d_init);
    return result;
}

// Shell statistics from pure-state dynamics: a filtered state is co-propagated
// with an accumulator that collects the observable's action over the first
// half of the run, so the second-moment overlap dephases in both time
// arguments instead of one. The overlap is sampled on the second half, the
// first and full moments on [t_start, t_max]; window means then estimate the
// exact shell quantities.
inline EthStats eth_stats_typicality(const SparseOperator& h, const SparseOperator& d,
                                     const SpectralBounds& bounds_h, double e_bar,
                                     double sigma_e, std::uint64_t seed,
                                     double t_start = 50.0, double t_max = 400.0,
                                     double dt = 0.5) {
    if (h.dim() != d.dim())
        throw dimension_error("eth_stats_typicality: operator dimensions differ");
    if (!(dt > 0.0) || !(t_max > t_start) || t_start < 0.0)
        throw averaging_window_error("eth_stats_typicality: need 0 <= t_start < t_max, dt > 0");

    const auto plan_g = detail::half_gaussian_plan(bounds_h, e_bar, sigma_e);
    const auto action_h = sparse_action(h);
    const CVec r = sample_haar_state(h.dim(), seed);

    CVec gr = detail::apply_function_complex(plan_g, action_h, r);
    const double gr_norm2 = gr.squaredNorm();
    if (!(gr_norm2 > 1e-300))
        throw shell_error("eth_stats_typicality: filter norm underflow; empty shell");
    const CVec ggr = detail::apply_function_complex(plan_g, action_h, gr);
    const double d_eff_est = h.dim() * gr_norm2 * gr_norm2 / ggr.squaredNorm();

    CVec phi = gr / std::sqrt(gr_norm2);
    CVec chi = CVec::Zero(phi.size());

    const auto plan_prop = make_propagation_plan(bounds_h, dt);
    const int n_steps = static_cast<int>(std::llround(t_max / dt));

    const double s_max = 0.5 * t_max;
    const double t_second = std::max(t_start, s_max);

    CompensatedSum acc_d, acc_f2, acc_m2;
    std::vector<double> m2_samples;
    int count = 0;
    int n_source = 0;
    CVec y(phi.size());
    for (int step = 0; step <= n_steps; ++step) {
        if (step > 0) {
            propagate_in_place(plan_prop, h, phi);
            propagate_in_place(plan_prop, h, chi);
        }
        const double t = step * dt;
        matvec_into(d, phi, y);
        if (t <= s_max + 1e-9) {
            chi += y;
            ++n_source;
        }
        if (t + 1e-9 >= t_second) {
            const double m2 = y.dot(chi).real() / n_source;
            acc_m2.add(m2);
            m2_samples.push_back(m2);
        }
        if (t + 1e-9 < t_start) continue;
        acc_d.add(phi.dot(y).real());
        acc_f2.add(y.squaredNorm());
        ++count;
    }
    if (count < 8 || m2_samples.size() < 8)
        throw averaging_window_error("eth_stats_typicality: averaging window holds "
                                     "fewer than 8 samples");

    const double d_bar = acc_d.value() / count;
    const double full_second = acc_f2.value() / count;
    const double diag_second = acc_m2.value() / static_cast<double>(m2_samples.size());

    double m2_var = 0.0;
    for (const double m2 : m2_samples) m2_var += (m2 - diag_second) * (m2 - diag_second);
    m2_var /= static_cast<double>(m2_samples.size());
    const double noise_floor = 3.0 * std::sqrt(m2_var / static_cast<double>(m2_samples.size())) +
                               1e-12 * std::max(1.0, d_bar * d_bar);

    EthStats stats;
    stats.e_bar = e_bar;
    stats.sigma_e = sigma_e;
    stats.d_bar = d_bar;
    stats.delta2 = full_second - d_bar * d_bar;
    if (stats.delta2 <= 0.0)
        throw degenerate_observable_error(
            "eth_stats_typicality: observable shows no spectral variance on the shell");

    double sigma2 = diag_second - d_bar * d_bar;
    if (sigma2 < 0.0) {
        if (sigma2 < -noise_floor)
            throw averaging_window_error(
                "eth_stats_typicality: diagonal variance negative beyond the noise "
                "floor; widen the averaging window");
        sigma2 = 0.0;
    }
    stats.sigma2 = sigma2;
    stats.v = std::min(1.0, stats.sigma2 / stats.delta2);
    stats.d_eff = d_eff_est;
    return stats;
}

} // namespace ethladder

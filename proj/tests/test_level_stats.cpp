#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "ethladder/ladder.hpp"
#include "ethladder/level_stats.hpp"
#include "ethladder/spectral.hpp"

using namespace ethladder;

namespace {

Vec ramp_levels(int n, double step, double offset) {
    Vec e(n);
    for (int i = 0; i < n; ++i) e[i] = offset + step * i;
    return e;
}

// Quantile construction: levels whose empirical density is exactly the
// semicircle of radius r.
std::vector<double> semicircle_levels(int n, double r) {
    const auto cdf = [&](double e) {
        return 0.5 + (e * std::sqrt(r * r - e * e) / (r * r) + std::asin(e / r)) / M_PI;
    };
    std::vector<double> levels(n);
    for (int i = 0; i < n; ++i) {
        const double target = (i + 0.5) / n;
        double lo = -r, hi = r;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (cdf(mid) < target ? lo : hi) = mid;
        }
        levels[i] = 0.5 * (lo + hi);
    }
    return levels;
}

std::vector<double> wigner_samples(int n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<double> s(n);
    for (int i = 0; i < n; ++i) s[i] = std::sqrt(-4.0 / M_PI * std::log1p(-uni(gen)));
    return s;
}

std::vector<double> poisson_samples(int n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::exponential_distribution<double> expo(1.0);
    std::vector<double> s(n);
    for (int i = 0; i < n; ++i) s[i] = expo(gen);
    return s;
}

const Vec& ladder_spectrum_14(double kappa) {
    static std::map<double, Vec> cache;
    auto it = cache.find(kappa);
    if (it == cache.end()) {
        LadderParams params{5, 0.1, kappa};
        const auto basis = build_sector_basis(params.n_sites(), 2);
        const auto ops = build_hamiltonian(params, basis);
        it = cache.emplace(kappa, diagonalize(ops.h_total, false).energies).first;
    }
    return it->second;
}

}  // namespace

TEST_CASE("window selection keeps exactly the in-band levels") {
    const Vec e = ramp_levels(1001, 0.01, -5.0);

    const auto window = select_window(e, 0.0, 2.0);
    std::vector<double> naive;
    for (int i = 0; i < e.size(); ++i)
        if (std::abs(e[i]) <= 2.0) naive.push_back(e[i]);
    CHECK(window == naive);

    const auto all = select_window(e, 0.0, 100.0);
    CHECK(all.size() == static_cast<std::size_t>(e.size()));

    for (std::size_t i = 0; i < window.size(); ++i)
        CHECK_THAT(window[i] + window[window.size() - 1 - i],
                   Catch::Matchers::WithinAbs(0.0, 1e-9));

    CHECK_THROWS_AS(select_window(e, 0.0, 0.5), window_error);
    CHECK_THROWS_AS(select_window(e, 0.0, -1.0), window_error);
    Vec shuffled = e;
    std::swap(shuffled[10], shuffled[20]);
    CHECK_THROWS_AS(select_window(shuffled, 0.0, 2.0), domain_error);
}

TEST_CASE("ladder window count matches a direct filter") {
    const Vec& e = ladder_spectrum_14(0.3);
    const auto window = select_window(e, 0.0, 2.0);
    std::size_t count = 0;
    for (int i = 0; i < e.size(); ++i)
        if (std::abs(e[i]) <= 2.0) ++count;
    CHECK(window.size() == count);
    CHECK(window.size() >= 300);
}

TEST_CASE("unfolding flattens a linear staircase exactly") {
    std::vector<double> window(500);
    for (int i = 0; i < 500; ++i) window[i] = -100.0 + 0.37 * i;
    const auto us = unfold(window);
    for (std::size_t i = 1; i < us.unfolded.size(); ++i)
        CHECK_THAT(us.unfolded[i] - us.unfolded[i - 1], Catch::Matchers::WithinAbs(1.0, 1e-8));
}

TEST_CASE("unfolding flattens a semicircle density") {
    const auto window = semicircle_levels(2000, 2.0);
    const auto us = unfold(window);
    const auto s = spacings(us);
    double mean = 0.0;
    for (const double x : s) mean += x;
    mean /= static_cast<double>(s.size());
    CHECK_THAT(mean, Catch::Matchers::WithinAbs(1.0, 0.02));

    // the polynomial cannot track the square-root edges, but the bulk is flat
    double worst = 0.0;
    for (std::size_t i = 100; i + 100 < s.size(); ++i)
        worst = std::max(worst, std::abs(s[i] - 1.0));
    CHECK(worst < 0.05);

    SECTION("rescaling the raw energies leaves the unfolding invariant") {
        std::vector<double> doubled = window;
        for (double& x : doubled) x *= 2.0;
        const auto us2 = unfold(doubled);
        for (std::size_t i = 0; i < us.unfolded.size(); ++i)
            CHECK_THAT(us2.unfolded[i], Catch::Matchers::WithinAbs(us.unfolded[i], 1e-8));
    }

    SECTION("unfolding an already-unfolded spectrum is nearly the identity") {
        const auto us2 = unfold(us.unfolded);
        const auto s2 = spacings(us2);
        for (std::size_t i = 0; i < s.size(); ++i)
            CHECK_THAT(s2[i], Catch::Matchers::WithinAbs(s[i], 0.02));
    }
}

TEST_CASE("unfolding rejects bad inputs") {
    std::vector<double> flat(400, 1.0);
    CHECK_THROWS_AS(unfold(flat), unfolding_error);

    const auto window = semicircle_levels(320, 2.0);
    CHECK_THROWS_AS(unfold(window, 8), config_error);
    CHECK_THROWS_AS(unfold(window, 0), config_error);
    CHECK_THROWS_AS(unfold(std::vector<double>(window.begin(), window.begin() + 299)),
                    window_error);
    CHECK_THROWS_AS(unfold_with_support(window, std::vector<double>(window.begin() + 5,
                                                                    window.end())),
                    domain_error);
}

TEST_CASE("spacings drop degeneracies and flag contaminated sectors") {
    UnfoldedSpectrum arith;
    arith.unfolded.resize(1000);
    for (int i = 0; i < 1000; ++i) arith.unfolded[i] = i;
    arith.raw = arith.unfolded;
    int dropped = -1;
    const auto s = spacings(arith, &dropped);
    CHECK(dropped == 0);
    CHECK(s.size() == 999);
    for (const double x : s) CHECK(x == 1.0);

    UnfoldedSpectrum few_dupes = arith;
    few_dupes.unfolded[100] = few_dupes.unfolded[101];
    few_dupes.unfolded[500] = few_dupes.unfolded[501];
    const auto s2 = spacings(few_dupes, &dropped);
    CHECK(dropped == 2);
    CHECK(s2.size() == 997);

    UnfoldedSpectrum contaminated = arith;
    for (int i = 0; i < 1000; i += 50) contaminated.unfolded[i] = contaminated.unfolded[i + 1];
    CHECK_THROWS_AS(spacings(contaminated), spacing_error);

    UnfoldedSpectrum tiny;
    tiny.unfolded = {1.0};
    CHECK_THROWS_AS(spacings(tiny), spacing_error);
}

TEST_CASE("spacing density hits the Poisson and Wigner endpoints") {
    for (double s : {0.0, 0.3, 1.0, 2.5}) {
        CHECK_THAT(brody_pdf(s, 0.0), Catch::Matchers::WithinAbs(std::exp(-s), 1e-14));
        CHECK_THAT(brody_pdf(s, 1.0),
                   Catch::Matchers::WithinAbs(M_PI / 2.0 * s * std::exp(-M_PI * s * s / 4.0),
                                              1e-13));
    }
    CHECK_THROWS_AS(brody_pdf(-0.1, 0.5), domain_error);
    CHECK_THROWS_AS(brody_pdf(0.5, -1.0), domain_error);
}

TEST_CASE("spacing density is normalized with unit mean") {
    // Simpson quadrature oracle; the substitution s = t^4 removes the s^omega
    // cusp at the origin so the composite rule converges
    const auto simpson = [](double t_max, int n, auto f) {
        const double h = t_max / n;
        CompensatedSum acc;
        for (int i = 0; i <= n; ++i) {
            const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
            acc.add(w * f(i * h));
        }
        return acc.value() * h / 3.0;
    };
    for (double omega : {0.25, 0.7, 1.1}) {
        const double t_max = std::pow(50.0, 0.25);
        const auto by_parts = [&](auto weight) {
            return simpson(t_max, 40000, [&](double t) {
                const double s = t * t * t * t;
                return 4.0 * t * t * t * weight(s) * brody_pdf(s, omega);
            });
        };
        CHECK_THAT(by_parts([](double) { return 1.0; }), Catch::Matchers::WithinAbs(1.0, 1e-8));
        CHECK_THAT(by_parts([](double s) { return s; }), Catch::Matchers::WithinAbs(1.0, 1e-8));

        const double partial = simpson(std::pow(1.3, 0.25), 40000, [&](double t) {
            const double s = t * t * t * t;
            return 4.0 * t * t * t * brody_pdf(s, omega);
        });
        CHECK_THAT(partial, Catch::Matchers::WithinAbs(brody_cdf(1.3, omega), 1e-8));
    }
}

TEST_CASE("the likelihood fit recovers synthetic ensembles") {
    const auto poisson = poisson_samples(5000, 42);
    const auto fit_p = fit_brody(poisson);
    CHECK(std::abs(fit_p.omega) < 0.05);
    CHECK(fit_p.n_spacings == 5000);
    CHECK(fit_p.ks_stat < 0.02);
    CHECK_FALSE(fit_p.at_boundary);

    const auto wigner = wigner_samples(5000, 43);
    const auto fit_w = fit_brody(wigner);
    CHECK(std::abs(fit_w.omega - 1.0) < 0.07);
    CHECK(fit_w.ks_stat < 0.02);
    CHECK_FALSE(fit_w.at_boundary);

    CHECK_THROWS_AS(fit_brody(std::vector<double>(150, 1.0)), spacing_error);
}

TEST_CASE("mixtures interpolate monotonically between the endpoints") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);
    double previous = -1.0;
    for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        std::vector<double> s(4000);
        for (auto& x : s)
            x = uni(gen) < p ? std::sqrt(-4.0 / M_PI * std::log1p(-uni(gen))) : expo(gen);
        const double omega = fit_brody(s).omega;
        CHECK(omega > previous);
        previous = omega;
    }
}

TEST_CASE("rescaled spectra refit to the same omega") {
    const auto window = semicircle_levels(2000, 2.0);
    const auto base = fit_brody(spacings(unfold(window)));
    std::vector<double> scaled = window;
    for (double& x : scaled) x *= 3.7;
    const auto refit = fit_brody(spacings(unfold(scaled)));
    CHECK_THAT(refit.omega, Catch::Matchers::WithinAbs(base.omega, 1e-9));
}

TEST_CASE("the ladder spectrum yields a clean spacing pipeline") {
    const Vec& e = ladder_spectrum_14(0.3);
    const auto result = nnsd_analysis(e, 0.0, 2.0);
    CHECK(result.dropped == 0);
    CHECK(result.fit.n_spacings == static_cast<int>(result.unfolded.unfolded.size()) - 1);
    CHECK(result.fit.n_spacings >= 200);

    const auto hist = nnsd_histogram(result.spacing_values);
    CHECK(hist.size() == 25);
    double mass = 0.0;
    for (const double d : hist) mass += d * 0.16;
    CHECK(mass > 0.9);
    CHECK(mass <= 1.0 + 1e-12);
}

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include "ethladder/basis.hpp"
#include "ethladder/cache.hpp"
#include "ethladder/chebyshev.hpp"
#include "ethladder/common.hpp"
#include "ethladder/ladder.hpp"
#include "ethladder/level_stats.hpp"
#include "ethladder/records.hpp"
#include "ethladder/spectral.hpp"
#include "ethladder/typicality.hpp"
#include "ethladder/version.hpp"

namespace ethladder {

enum class RunMode { EthExact, EthTyp, ModRelax, Nnsd, Scan };

inline RunMode parse_mode(const std::string& s) {
    if (s == "eth-exact") return RunMode::EthExact;
    if (s == "eth-typ" || s == "eth-typicality") return RunMode::EthTyp;
    if (s == "mod-relax") return RunMode::ModRelax;
    if (s == "nnsd") return RunMode::Nnsd;
    if (s == "scan") return RunMode::Scan;
    throw config_error("unknown mode: " + s);
}

inline const char* mode_name(RunMode mode) {
    switch (mode) {
        case RunMode::EthExact: return "eth-exact";
        case RunMode::EthTyp: return "eth-typ";
        case RunMode::ModRelax: return "mod-relax";
        case RunMode::Nnsd: return "nnsd";
        case RunMode::Scan: return "scan";
    }
    return "?";
}

// The lowest-|S^z| sector with the parity of N.
inline int default_two_sz(int n_sites) { return n_sites % 2; }

// Spacing statistics avoid the self-conjugate sector, which mixes two
// spin-flip symmetry classes: S^z = 1 on even N, S^z = 1/2 on odd N.
inline int nnsd_two_sz(int n_sites) { return (n_sites % 2 == 0) ? 2 : 1; }

struct ExperimentConfig {
    RunMode mode = RunMode::Scan;
    std::vector<int> nr_list;
    std::vector<double> kappas;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    double delta = 0.1;
    double e_bar = 0.0;
    double sigma_e = 0.6;
    double dt = 0.5;
    double t_max = 400.0;
    double window_fraction = 0.25;
    double half_width = 2.0;
    int unfold_degree = 9;
    int dense_ceiling = kDenseCeilingDefault;
    std::string out_dir = "out";
    std::string cache_dir;

    std::string cache_path() const {
        return cache_dir.empty() ? out_dir + "/cache" : cache_dir;
    }

    // Time averages for the dynamical shell estimator start here; pinned to
    // t = 50 for the default horizon and scaled down for short runs.
    double t_start() const { return std::min(50.0, 0.125 * t_max); }

    void validate() const {
        if (nr_list.empty()) throw config_error("config: empty size grid");
        if (kappas.empty()) throw config_error("config: empty kappa grid");
        for (const int nr : nr_list) {
            LadderParams p;
            p.n_right = nr;
            p.delta = delta;
            p.kappa = kappas.front();
            p.validate();
        }
        for (const double k : kappas)
            if (!std::isfinite(k) || k < 0.0)
                throw config_error("config: kappa must be finite and nonnegative");
        if (!(dt > 0.0) || !(t_max > dt)) throw config_error("config: need 0 < dt < t_max");
        if (!(window_fraction > 0.0) || window_fraction > 1.0)
            throw config_error("config: window fraction must be in (0, 1]");
        if (!(half_width > 0.0)) throw config_error("config: half width must be positive");
        if (unfold_degree < 1 || unfold_degree % 2 == 0)
            throw config_error("config: unfolding degree must be odd and positive");
        if (!(sigma_e > 0.0)) throw config_error("config: sigma_e must be positive");
        if (!std::isfinite(e_bar)) throw config_error("config: e_bar must be finite");
        const bool needs_seeds = mode != RunMode::EthExact && mode != RunMode::Nnsd;
        if (needs_seeds && seeds.empty()) throw config_error("config: empty seed grid");
        if (out_dir.empty()) throw config_error("config: output directory must be set");
    }
};

struct GammaFit {
    double gamma = 0.0;
    double residual = 0.0;
};

// Least-squares exponent of the shell width against effective dimension,
// sigma = d_eff^{-gamma}, from sigma^2 samples across system sizes. The
// residual is the root-mean-square misfit of log sigma.
inline GammaFit fit_gamma(const std::vector<double>& sigma2, const std::vector<double>& d_eff) {
    if (sigma2.size() != d_eff.size())
        throw dimension_error("fit_gamma: input lengths differ");
    if (sigma2.size() < 3) throw domain_error("fit_gamma: need at least 3 sizes");
    const auto n = sigma2.size();
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(sigma2[i] > 0.0) || !(d_eff[i] > 0.0))
            throw domain_error("fit_gamma: sigma^2 and d_eff must be positive");
        x[i] = std::log(d_eff[i]);
        y[i] = 0.5 * std::log(sigma2[i]);
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw domain_error("fit_gamma: d_eff values are all equal");
    const double slope = sxy / sxx;
    GammaFit fit;
    fit.gamma = -slope;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - my - slope * (x[i] - mx);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    return fit;
}

struct RunOutput {
    std::vector<ResultRecord> records;
    std::vector<NnsdTable> nnsd_tables;
    std::vector<SeriesTable> series_tables;
    bool all_ok = true;
};

namespace detail {

inline int worker_count() {
    if (const char* env = std::getenv("ETHLADDER_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

struct GridPoint {
    int nr = 0;
    double kappa = 0.0;
};

struct PointOutput {
    std::vector<ResultRecord> records;
    std::vector<NnsdTable> nnsd_tables;
    std::vector<SeriesTable> series_tables;
    bool ok = true;
};

struct PointContext {
    LadderParams params;
    SectorBasis basis;
    LadderOperators ops;
    SparseOperator d;
    SpectralBounds bounds_h;
    SpectralBounds bounds_d;
};

inline PointContext make_context(const ExperimentConfig& config, const GridPoint& point,
                                 int two_sz) {
    PointContext ctx;
    ctx.params.n_right = point.nr;
    ctx.params.delta = config.delta;
    ctx.params.kappa = point.kappa;
    ctx.basis = build_sector_basis(ctx.params.n_sites(), two_sz);
    ctx.ops = build_hamiltonian(ctx.params, ctx.basis);
    ctx.d = build_observable_d(ctx.params, ctx.basis);
    ctx.bounds_h = estimate_bounds(ctx.ops.h_total);
    ctx.bounds_d = estimate_bounds(ctx.d);
    return ctx;
}

inline ResultRecord base_record(const ExperimentConfig& config, const GridPoint& point,
                                int two_sz, const std::string& kind) {
    ResultRecord r;
    r.kind = kind;
    r.n_sites = 3 * point.nr - 1;
    r.two_sz = two_sz;
    r.kappa = point.kappa;
    r.delta = config.delta;
    r.e_bar = config.e_bar;
    r.sigma_e = config.sigma_e;
    r.dt = config.dt;
    r.t_max = config.t_max;
    r.code_version = kVersion;
    r.timestamp = utc_timestamp();
    return r;
}

// Spectrum with the requested content for this grid point, from the cache
// when a compatible file exists, recomputed and stored otherwise.
inline Spectrum spectrum_for(const ExperimentConfig& config, const GridPoint& point, int two_sz,
                             bool need_diagonals, std::string* cache_key_out) {
    CacheKey key;
    key.n_sites = 3 * point.nr - 1;
    key.two_sz = two_sz;
    key.kappa = point.kappa;
    key.delta = config.delta;
    if (cache_key_out) *cache_key_out = cache_filename(key);

    if (auto cached = cache_load(config.cache_path(), key, need_diagonals, false))
        return std::move(*cached);

    LadderParams params;
    params.n_right = point.nr;
    params.delta = config.delta;
    params.kappa = point.kappa;
    const auto basis = build_sector_basis(params.n_sites(), two_sz);
    const auto ops = build_hamiltonian(params, basis);
    Spectrum spec = diagonalize(ops.h_total, need_diagonals);
    if (need_diagonals) {
        const auto d = build_observable_d(params, basis);
        attach_observable_diagonals(d, spec);
    }
    cache_store(config.cache_path(), key, spec);
    if (spec.dim() > 5000) spec.eigvecs.resize(0, 0);
    return spec;
}

inline void set_eth_values(ResultRecord& r, const EthStats& mean, const EthStats& err) {
    r.set("d_bar", mean.d_bar, err.d_bar);
    r.set("sigma2", mean.sigma2, err.sigma2);
    r.set("delta2", mean.delta2, err.delta2);
    r.set("v", mean.v, err.v);
    r.set("d_eff", mean.d_eff, err.d_eff);
}

inline void run_eth_exact(const ExperimentConfig& config, const GridPoint& point,
                          PointOutput& out) {
    const int n_sites = 3 * point.nr - 1;
    const int two_sz = default_two_sz(n_sites);
    if (build_sector_basis(n_sites, two_sz).dim() > config.dense_ceiling)
        throw dimension_error("eth-exact: sector dimension exceeds the dense ceiling; "
                              "use eth-typ for this size");
    auto record = base_record(config, point, two_sz, "eth-exact");
    const auto spec = spectrum_for(config, point, two_sz, true, &record.cache_key);
    const auto stats = eth_stats_exact(spec, config.e_bar, config.sigma_e);
    set_eth_values(record, stats, EthStats{0, 0, 0, 0, 0, 0, 0});
    out.records.push_back(std::move(record));
}

inline void run_eth_typ(const ExperimentConfig& config, const GridPoint& point,
                        PointOutput& out) {
    const int two_sz = default_two_sz(3 * point.nr - 1);
    auto record = base_record(config, point, two_sz, "eth-typ");
    const auto ctx = make_context(config, point, two_sz);

    std::vector<EthStats> runs;
    for (const std::uint64_t seed : config.seeds)
        runs.push_back(eth_stats_typicality(ctx.ops.h_total, ctx.d, ctx.bounds_h, config.e_bar,
                                            config.sigma_e, seed, config.t_start(),
                                            config.t_max, config.dt));

    const auto n = static_cast<double>(runs.size());
    EthStats mean{}, err{};
    for (const auto& s : runs) {
        mean.d_bar += s.d_bar / n;
        mean.sigma2 += s.sigma2 / n;
        mean.delta2 += s.delta2 / n;
        mean.v += s.v / n;
        mean.d_eff += s.d_eff / n;
    }
    if (runs.size() > 1) {
        for (const auto& s : runs) {
            err.d_bar += (s.d_bar - mean.d_bar) * (s.d_bar - mean.d_bar);
            err.sigma2 += (s.sigma2 - mean.sigma2) * (s.sigma2 - mean.sigma2);
            err.delta2 += (s.delta2 - mean.delta2) * (s.delta2 - mean.delta2);
            err.v += (s.v - mean.v) * (s.v - mean.v);
            err.d_eff += (s.d_eff - mean.d_eff) * (s.d_eff - mean.d_eff);
        }
        const double scale = 1.0 / (n * (n - 1.0));
        err.d_bar = std::sqrt(err.d_bar * scale);
        err.sigma2 = std::sqrt(err.sigma2 * scale);
        err.delta2 = std::sqrt(err.delta2 * scale);
        err.v = std::sqrt(err.v * scale);
        err.d_eff = std::sqrt(err.d_eff * scale);
    }
    set_eth_values(record, mean, err);
    out.records.push_back(std::move(record));
}

inline void run_mod_relax(const ExperimentConfig& config, const GridPoint& point,
                          PointOutput& out) {
    const int two_sz = default_two_sz(3 * point.nr - 1);
    auto record = base_record(config, point, two_sz, "mod-relax");
    const auto ctx = make_context(config, point, two_sz);

    const double d0 = ctx.params.n_left() - 2.0;
    const auto tuned = tune_mod_parameters(ctx.ops.h_total, ctx.d, ctx.bounds_h, ctx.bounds_d,
                                           config.e_bar, config.sigma_e, d0);

    std::vector<LambdaResult> runs;
    for (const std::uint64_t seed : config.seeds) {
        const auto state = prepare_mod_state(ctx.ops.h_total, ctx.d, ctx.bounds_h,
                                             ctx.bounds_d, tuned.spec, seed);
        const auto series = relaxation_run(ctx.ops.h_total, ctx.d, ctx.bounds_h, state.psi,
                                           config.t_max, config.dt);
        runs.push_back(lambda_estimate(series, config.window_fraction));

        SeriesTable table;
        table.n_sites = ctx.params.n_sites();
        table.kappa = point.kappa;
        table.seed = seed;
        table.t = series.times;
        table.d_expect = series.values;
        out.series_tables.push_back(std::move(table));
    }

    const auto n = static_cast<double>(runs.size());
    double lm = 0.0, dm = 0.0, tm = 0.0, ts = 0.0;
    for (const auto& r : runs) {
        lm += r.lambda / n;
        dm += r.d_init / n;
        tm += r.tail_mean / n;
        ts += r.tail_std / n;
    }
    double le = 0.0, de = 0.0, te = 0.0, se = 0.0;
    if (runs.size() > 1) {
        for (const auto& r : runs) {
            le += (r.lambda - lm) * (r.lambda - lm);
            de += (r.d_init - dm) * (r.d_init - dm);
            te += (r.tail_mean - tm) * (r.tail_mean - tm);
            se += (r.tail_std - ts) * (r.tail_std - ts);
        }
        const double scale = 1.0 / (n * (n - 1.0));
        le = std::sqrt(le * scale);
        de = std::sqrt(de * scale);
        te = std::sqrt(te * scale);
        se = std::sqrt(se * scale);
    }
    record.set("lambda", lm, le);
    record.set("d_init", dm, de);
    record.set("tail_mean", tm, te);
    record.set("tail_std", ts, se);
    out.records.push_back(std::move(record));
}

inline void run_nnsd(const ExperimentConfig& config, const GridPoint& point, PointOutput& out) {
    const int two_sz = nnsd_two_sz(3 * point.nr - 1);
    auto record = base_record(config, point, two_sz, "nnsd");
    const auto spec = spectrum_for(config, point, two_sz, false, &record.cache_key);
    const auto result =
        nnsd_analysis(spec.energies, config.e_bar, config.half_width, config.unfold_degree);

    record.set("omega", result.fit.omega, 0.0);
    record.set("ks_stat", result.fit.ks_stat, 0.0);
    record.set("n_spacings", result.fit.n_spacings, 0.0);
    record.set("dropped", result.dropped, 0.0);
    out.records.push_back(std::move(record));

    constexpr int kBins = 25;
    constexpr double kSMax = 4.0;
    NnsdTable table;
    table.n_sites = 3 * point.nr - 1;
    table.kappa = point.kappa;
    table.density = nnsd_histogram(result.spacing_values, kBins, kSMax);
    for (int i = 0; i < kBins; ++i) {
        const double center = (i + 0.5) * kSMax / kBins;
        table.bin_center.push_back(center);
        table.brody_fit.push_back(brody_pdf(center, result.fit.omega));
    }
    out.nnsd_tables.push_back(std::move(table));
}

inline void run_scan_point(const ExperimentConfig& config, const GridPoint& point,
                           PointOutput& out) {
    const int n_sites = 3 * point.nr - 1;
    const int two_sz = default_two_sz(n_sites);
    const int dim = build_sector_basis(n_sites, two_sz).dim();
    if (dim <= 5000)
        run_eth_exact(config, point, out);
    else
        run_eth_typ(config, point, out);
    run_mod_relax(config, point, out);
}

}  // namespace detail

// Executes the configured mode over the kappa x size grid. Grid points run
// on a worker pool (ETHLADDER_THREADS overrides the width); outputs are
// collected per point and merged in grid order, so results are deterministic
// for fixed seeds. A failing point becomes an "error" record and the run
// continues; all_ok reports whether every point succeeded.
inline RunOutput run(const ExperimentConfig& config) {
    config.validate();

    std::vector<detail::GridPoint> points;
    for (const int nr : config.nr_list)
        for (const double kappa : config.kappas) points.push_back({nr, kappa});

    std::vector<detail::PointOutput> outputs(points.size());
    std::atomic<std::size_t> next{0};
    const int workers = std::min<int>(detail::worker_count(), static_cast<int>(points.size()));

    const auto work = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= points.size()) return;
            auto& out = outputs[i];
            try {
                switch (config.mode) {
                    case RunMode::EthExact: detail::run_eth_exact(config, points[i], out); break;
                    case RunMode::EthTyp: detail::run_eth_typ(config, points[i], out); break;
                    case RunMode::ModRelax: detail::run_mod_relax(config, points[i], out); break;
                    case RunMode::Nnsd: detail::run_nnsd(config, points[i], out); break;
                    case RunMode::Scan: detail::run_scan_point(config, points[i], out); break;
                }
            } catch (const std::exception& e) {
                out.ok = false;
                auto record = detail::base_record(config, points[i],
                                                  default_two_sz(3 * points[i].nr - 1), "error");
                record.message = e.what();
                out.records.push_back(std::move(record));
            }
        }
    };

    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    RunOutput merged;
    for (auto& out : outputs) {
        merged.all_ok = merged.all_ok && out.ok;
        for (auto& r : out.records) merged.records.push_back(std::move(r));
        for (auto& t : out.nnsd_tables) merged.nnsd_tables.push_back(std::move(t));
        for (auto& t : out.series_tables) merged.series_tables.push_back(std::move(t));
    }

    // A scan with at least three sizes at one coupling also reports the
    // width-versus-dimension exponent for that coupling.
    if (config.mode == RunMode::Scan) {
        for (const double kappa : config.kappas) {
            std::vector<double> sigma2, d_eff;
            for (const auto& r : merged.records) {
                if (r.kappa != kappa) continue;
                if (r.kind != "eth-exact" && r.kind != "eth-typ") continue;
                sigma2.push_back(r.at("sigma2").value);
                d_eff.push_back(r.at("d_eff").value);
            }
            if (sigma2.size() < 3) continue;
            try {
                const auto fit = fit_gamma(sigma2, d_eff);
                ResultRecord record;
                record.kind = "gamma";
                record.kappa = kappa;
                record.delta = config.delta;
                record.e_bar = config.e_bar;
                record.sigma_e = config.sigma_e;
                record.code_version = kVersion;
                record.timestamp = utc_timestamp();
                record.set("gamma", fit.gamma, 0.0);
                record.set("residual", fit.residual, 0.0);
                record.set("n_sizes", static_cast<double>(sigma2.size()), 0.0);
                merged.records.push_back(std::move(record));
            } catch (const std::exception&) {
                // an errored grid point already reported itself; skip the fit
            }
        }
    }
    return merged;
}

}  // namespace ethladder

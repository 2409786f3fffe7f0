#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ethladder/cache.hpp"
#include "ethladder/records.hpp"
#include "ethladder/run.hpp"

using namespace ethladder;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("ethladder_test_" + name);
    fs::remove_all(dir);
    return dir;
}

Spectrum small_spectrum(int nr, double kappa, bool diagonals) {
    LadderParams params;
    params.n_right = nr;
    params.kappa = kappa;
    const auto basis = build_sector_basis(params.n_sites(), default_two_sz(params.n_sites()));
    const auto ops = build_hamiltonian(params, basis);
    Spectrum spec = diagonalize(ops.h_total, diagonals);
    if (diagonals) attach_observable_diagonals(build_observable_d(params, basis), spec);
    return spec;
}

bool bitwise_equal(const Vec& a, const Vec& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

ResultRecord sample_record() {
    ResultRecord r;
    r.kind = "eth-exact";
    r.n_sites = 11;
    r.two_sz = 1;
    r.kappa = 4.5;
    r.delta = 0.1;
    r.sigma_e = 0.6;
    r.dt = 0.5;
    r.t_max = 400.0;
    r.seed = 3;
    r.set("d_bar", 0.00284713905, 0.0);
    r.set("sigma2", 1.0 / 3.0, 0.0);
    r.set("delta2", 1.3859, 0.0);
    r.set("v", 0.1698481723, 0.0);
    r.set("d_eff", 110.0513, 0.0);
    r.code_version = kVersion;
    r.timestamp = utc_timestamp();
    r.cache_key = "spec_n11_z1_k4500000000_d100000000.bin";
    return r;
}

}  // namespace

TEST_CASE("spectrum cache round-trips bit for bit") {
    const auto dir = fresh_dir("cache_roundtrip");
    const CacheKey key{8, 0, 1.25, 0.1};
    const auto spec = small_spectrum(3, 1.25, true);

    CHECK_FALSE(cache_load(dir.string(), key, true, false).has_value());
    cache_store(dir.string(), key, spec);

    const auto loaded = cache_load(dir.string(), key, true, true);
    REQUIRE(loaded.has_value());
    CHECK(bitwise_equal(loaded->energies, spec.energies));
    CHECK(bitwise_equal(loaded->d_diag, spec.d_diag));
    CHECK(bitwise_equal(loaded->d2_diag, spec.d2_diag));
    REQUIRE(loaded->has_vectors());
    CHECK(std::memcmp(loaded->eigvecs.data(), spec.eigvecs.data(),
                      sizeof(double) * spec.eigvecs.size()) == 0);

    SECTION("key mismatch misses") {
        CacheKey other = key;
        other.kappa = 1.26;
        CHECK_FALSE(cache_load(dir.string(), other, true, false).has_value());
    }
    SECTION("requesting more content than stored misses") {
        const auto energies_only = small_spectrum(3, 0.5, false);
        const CacheKey k2{8, 0, 0.5, 0.1};
        cache_store(dir.string(), k2, energies_only);
        CHECK(cache_load(dir.string(), k2, false, false).has_value());
        CHECK_FALSE(cache_load(dir.string(), k2, true, false).has_value());
    }
    fs::remove_all(dir);
}

TEST_CASE("corrupt or truncated cache files count as misses") {
    const auto dir = fresh_dir("cache_corrupt");
    const CacheKey key{8, 0, 2.0, 0.1};
    cache_store(dir.string(), key, small_spectrum(3, 2.0, true));
    const fs::path file = dir / cache_filename(key);

    SECTION("truncation") {
        fs::resize_file(file, fs::file_size(file) / 2);
        CHECK_FALSE(cache_load(dir.string(), key, true, false).has_value());
    }
    SECTION("flipped format version") {
        std::fstream f(file, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(8);
        const std::uint32_t bogus = 0xdeadbeef;
        f.write(reinterpret_cast<const char*>(&bogus), sizeof(bogus));
        f.close();
        CHECK_FALSE(cache_load(dir.string(), key, true, false).has_value());
    }
    SECTION("mangled magic") {
        std::fstream f(file, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("NOTACHE", 7);
        f.close();
        CHECK_FALSE(cache_load(dir.string(), key, true, false).has_value());
    }
    fs::remove_all(dir);
}

TEST_CASE("cold and warm cache yield identical spectra") {
    const auto dir = fresh_dir("cache_warm");
    const CacheKey key{8, 0, 3.0, 0.1};

    const auto cold = small_spectrum(3, 3.0, true);
    cache_store(dir.string(), key, cold);
    const auto warm = cache_load(dir.string(), key, true, false);
    REQUIRE(warm.has_value());
    const auto recomputed = small_spectrum(3, 3.0, true);

    CHECK(bitwise_equal(warm->energies, recomputed.energies));
    CHECK(bitwise_equal(warm->d_diag, recomputed.d_diag));
    CHECK(bitwise_equal(warm->d2_diag, recomputed.d2_diag));
    fs::remove_all(dir);
}

TEST_CASE("eth record renders the pinned CSV schema") {
    const auto csv = records_to_csv({sample_record()});
    const auto eol = csv.find('\n');
    CHECK(csv.substr(0, eol) ==
          "n,kappa,e_bar,sigma_e,d_bar,sigma2,delta2,v,d_eff,"
          "err_d_bar,err_sigma2,err_delta2,err_v,err_d_eff");
    const auto row = csv.substr(eol + 1, csv.find('\n', eol + 1) - eol - 1);
    CHECK(row.substr(0, 2) == "11");
    CHECK(row.find("0.333333333333") != std::string::npos);  // 12 significant digits
}

TEST_CASE("structured records round-trip through the line format") {
    std::vector<ResultRecord> records;
    records.push_back(sample_record());
    ResultRecord failure;
    failure.kind = "error";
    failure.n_sites = 26;
    failure.kappa = 0.3;
    failure.message = "eth-exact: sector dimension exceeds the dense ceiling; "
                      "use eth-typ for this size";
    failure.code_version = kVersion;
    failure.timestamp = utc_timestamp();
    records.push_back(failure);

    const auto dir = fresh_dir("jsonl");
    fs::create_directories(dir);
    const auto path = dir / "records.jsonl";
    {
        std::ofstream out(path);
        out << records_to_jsonl(records);
    }
    const auto back = read_jsonl(path);
    REQUIRE(back.size() == records.size());
    CHECK(back[0] == records[0]);
    CHECK(back[1] == records[1]);
    fs::remove_all(dir);
}

TEST_CASE("error records quote their message in the csv") {
    ResultRecord failure;
    failure.kind = "error";
    failure.n_sites = 8;
    failure.kappa = 1.0;
    failure.message = "windowing: got \"too few\" levels, enlarge";
    const auto csv = records_to_csv({failure});
    CHECK(csv.find("\"windowing: got \"\"too few\"\" levels, enlarge\"") != std::string::npos);
}

TEST_CASE("csv rendering rejects empty and ragged input") {
    CHECK_THROWS_AS(records_to_csv({}), domain_error);
    auto a = sample_record();
    auto b = sample_record();
    b.values.pop_back();
    CHECK_THROWS_AS(records_to_csv({a, b}), domain_error);
}

TEST_CASE("width-versus-dimension exponent fits") {
    SECTION("exact inverse-square-root law") {
        std::vector<double> d_eff = {40.0, 160.0, 640.0, 2560.0};
        std::vector<double> sigma2;
        for (const double d : d_eff) sigma2.push_back(1.0 / d);
        const auto fit = fit_gamma(sigma2, d_eff);
        CHECK(std::abs(fit.gamma - 0.5) < 1e-6);
        CHECK(fit.residual < 1e-12);
    }
    SECTION("constant width") {
        const auto fit = fit_gamma({0.3, 0.3, 0.3}, {40.0, 160.0, 640.0});
        CHECK(std::abs(fit.gamma) < 1e-12);
    }
    SECTION("bad input") {
        CHECK_THROWS_AS(fit_gamma({0.1, -0.1, 0.2}, {1.0, 2.0, 3.0}), domain_error);
        CHECK_THROWS_AS(fit_gamma({0.1, 0.1}, {1.0, 2.0}), domain_error);
        CHECK_THROWS_AS(fit_gamma({0.1, 0.1, 0.1}, {2.0, 2.0, 2.0}), domain_error);
        CHECK_THROWS_AS(fit_gamma({0.1, 0.1}, {1.0, 2.0, 3.0}), dimension_error);
    }
}

TEST_CASE("empty grids abort before any side effects") {
    ExperimentConfig config;
    config.mode = RunMode::EthExact;
    config.nr_list = {3};
    config.out_dir = (fs::temp_directory_path() / "ethladder_test_never_created").string();
    fs::remove_all(config.out_dir);

    CHECK_THROWS_AS(run(config), config_error);
    config.kappas = {1.0};
    config.nr_list = {};
    CHECK_THROWS_AS(run(config), config_error);
    CHECK_FALSE(fs::exists(config.out_dir));
}

TEST_CASE("a failing grid point is recorded and the run continues") {
    ExperimentConfig config;
    config.mode = RunMode::Nnsd;
    config.nr_list = {3, 4};  // the 70-state sector cannot seat a 300-level window
    config.kappas = {1.0};
    const auto dir = fresh_dir("partial");
    config.out_dir = dir.string();

    const auto output = run(config);
    CHECK_FALSE(output.all_ok);
    REQUIRE(output.records.size() == 2);
    CHECK(output.records[0].kind == "error");
    CHECK(output.records[0].n_sites == 8);
    CHECK_FALSE(output.records[0].message.empty());
    CHECK(output.records[1].kind == "nnsd");
    CHECK(output.records[1].n_sites == 11);
    CHECK(output.records[1].at("omega").value > 0.5);
    CHECK(output.records[1].at("dropped").value == 0.0);
    REQUIRE(output.nnsd_tables.size() == 1);

    emit_outputs(config.out_dir, output.records, output.nnsd_tables, output.series_tables);
    CHECK(fs::exists(dir / "errors.csv"));
    CHECK(fs::exists(dir / "nnsd.csv"));
    CHECK(fs::exists(dir / "nnsd_hist.csv"));
    CHECK(fs::exists(dir / "records.jsonl"));
    fs::remove_all(dir);
}

TEST_CASE("the spacing histogram table integrates to one") {
    ExperimentConfig config;
    config.mode = RunMode::Nnsd;
    config.nr_list = {4};
    config.kappas = {1.0};
    const auto dir = fresh_dir("hist");
    config.out_dir = dir.string();

    const auto output = run(config);
    REQUIRE(output.all_ok);
    REQUIRE(output.nnsd_tables.size() == 1);
    const auto& table = output.nnsd_tables[0];
    REQUIRE(table.bin_center.size() == 25);

    double integral = 0.0;
    for (std::size_t i = 0; i + 1 < table.bin_center.size(); ++i)
        integral += 0.5 * (table.density[i] + table.density[i + 1]) *
                    (table.bin_center[i + 1] - table.bin_center[i]);
    CHECK(integral > 0.98);
    CHECK(integral < 1.02);

    double brody_integral = 0.0;
    for (std::size_t i = 0; i + 1 < table.bin_center.size(); ++i)
        brody_integral += 0.5 * (table.brody_fit[i] + table.brody_fit[i + 1]) *
                          (table.bin_center[i + 1] - table.bin_center[i]);
    CHECK(brody_integral > 0.95);
    CHECK(brody_integral < 1.02);
    fs::remove_all(dir);
}

TEST_CASE("repeat runs emit byte-identical value tables") {
    ExperimentConfig config;
    config.mode = RunMode::EthTyp;
    config.nr_list = {3};
    config.kappas = {1.0, 4.5};
    config.seeds = {1, 2};
    config.t_max = 100.0;

    const auto dir_a = fresh_dir("det_a");
    const auto dir_b = fresh_dir("det_b");
    config.out_dir = dir_a.string();
    const auto first = run(config);
    config.out_dir = dir_b.string();
    const auto second = run(config);

    REQUIRE(first.all_ok);
    REQUIRE(second.all_ok);
    CHECK(records_to_csv(first.records) == records_to_csv(second.records));
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("scan over three sizes reports the scaling exponent") {
    ExperimentConfig config;
    config.mode = RunMode::Scan;
    config.nr_list = {3, 4, 5};
    config.kappas = {1.0};
    config.seeds = {1};
    config.t_max = 50.0;
    const auto dir = fresh_dir("scan_gamma");
    config.out_dir = dir.string();

    const auto output = run(config);
    REQUIRE(output.all_ok);

    int eth = 0, mod = 0, gamma = 0;
    for (const auto& r : output.records) {
        if (r.kind == "eth-exact") ++eth;
        if (r.kind == "mod-relax") ++mod;
        if (r.kind == "gamma") ++gamma;
    }
    CHECK(eth == 3);
    CHECK(mod == 3);
    REQUIRE(gamma == 1);

    const auto& g = output.records.back();
    CHECK(g.kind == "gamma");
    CHECK(g.at("n_sizes").value == 3.0);
    CHECK(g.at("gamma").value > 0.0);

    CHECK(output.series_tables.size() == 3);
    emit_outputs(config.out_dir, output.records, output.nnsd_tables, output.series_tables);
    CHECK(fs::exists(dir / "gamma.csv"));
    CHECK(fs::exists(dir / "series.csv"));
    fs::remove_all(dir);
}

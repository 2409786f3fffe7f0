#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ethladder/common.hpp"

namespace ethladder {

struct ResultValue {
    double value = 0.0;
    double err = 0.0;
    bool operator==(const ResultValue&) const = default;
};

// One measurement at one grid point. `values` keeps insertion order; every
// value carries an error estimate (zero when the quantity is deterministic).
// Records with kind "error" describe a failed grid point via `message`.
struct ResultRecord {
    std::string kind;
    int n_sites = 0;
    int two_sz = 0;
    double kappa = 0.0;
    double delta = 0.0;
    double e_bar = 0.0;
    double sigma_e = 0.0;
    double dt = 0.0;
    double t_max = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, ResultValue>> values;
    std::string message;
    std::string code_version;
    std::string timestamp;
    std::string cache_key;

    void set(const std::string& name, double value, double err = 0.0) {
        for (auto& [k, v] : values) {
            if (k == name) {
                v = {value, err};
                return;
            }
        }
        values.emplace_back(name, ResultValue{value, err});
    }

    const ResultValue& at(const std::string& name) const {
        for (const auto& [k, v] : values)
            if (k == name) return v;
        throw domain_error("ResultRecord: no value named " + name);
    }

    bool operator==(const ResultRecord&) const = default;
};

struct NnsdTable {
    int n_sites = 0;
    double kappa = 0.0;
    std::vector<double> bin_center;
    std::vector<double> density;
    std::vector<double> brody_fit;
};

struct SeriesTable {
    int n_sites = 0;
    double kappa = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> t;
    std::vector<double> d_expect;
};

inline std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline void to_json(nlohmann::json& j, const ResultRecord& r) {
    nlohmann::json vals = nlohmann::json::array();
    for (const auto& [name, v] : r.values)
        vals.push_back({{"name", name}, {"value", v.value}, {"err", v.err}});
    j = {{"kind", r.kind},         {"n", r.n_sites},
         {"two_sz", r.two_sz},     {"kappa", r.kappa},
         {"delta", r.delta},       {"e_bar", r.e_bar},
         {"sigma_e", r.sigma_e},   {"dt", r.dt},
         {"t_max", r.t_max},       {"seed", r.seed},
         {"values", vals},         {"message", r.message},
         {"code_version", r.code_version},
         {"timestamp", r.timestamp},
         {"cache_key", r.cache_key}};
}

inline void from_json(const nlohmann::json& j, ResultRecord& r) {
    j.at("kind").get_to(r.kind);
    j.at("n").get_to(r.n_sites);
    j.at("two_sz").get_to(r.two_sz);
    j.at("kappa").get_to(r.kappa);
    j.at("delta").get_to(r.delta);
    j.at("e_bar").get_to(r.e_bar);
    j.at("sigma_e").get_to(r.sigma_e);
    j.at("dt").get_to(r.dt);
    j.at("t_max").get_to(r.t_max);
    j.at("seed").get_to(r.seed);
    r.values.clear();
    for (const auto& v : j.at("values"))
        r.values.emplace_back(v.at("name").get<std::string>(),
                              ResultValue{v.at("value").get<double>(), v.at("err").get<double>()});
    j.at("message").get_to(r.message);
    j.at("code_version").get_to(r.code_version);
    j.at("timestamp").get_to(r.timestamp);
    j.at("cache_key").get_to(r.cache_key);
}

namespace detail {

// CSV cells carry a fixed 12 significant digits so tables are byte-stable
// across runs; the JSONL stream keeps shortest-round-trip floats instead.
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out) throw io_error("short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw io_error("rename failed for " + path.string() + ": " + ec.message());
}

inline std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += "\"";
    return out;
}

// Leading input columns for each record kind; value and err columns follow.
inline std::vector<std::string> csv_prefix(const std::string& kind) {
    if (kind == "eth-exact" || kind == "eth-typ" || kind == "mod-relax")
        return {"n", "kappa", "e_bar", "sigma_e"};
    if (kind == "nnsd") return {"n", "kappa"};
    if (kind == "gamma") return {"kappa"};
    if (kind == "error") return {"n", "kappa", "seed"};
    throw domain_error("csv_prefix: unknown record kind " + kind);
}

inline std::string csv_prefix_cell(const ResultRecord& r, const std::string& col) {
    if (col == "n") return std::to_string(r.n_sites);
    if (col == "kappa") return format_double(r.kappa);
    if (col == "e_bar") return format_double(r.e_bar);
    if (col == "sigma_e") return format_double(r.sigma_e);
    if (col == "seed") return std::to_string(r.seed);
    throw domain_error("csv_prefix_cell: unknown column " + col);
}

}  // namespace detail

// Renders records of one kind as CSV: input columns, then one column per
// named value, then matching err_* columns. All records must agree on the
// value names so the table stays rectangular.
inline std::string records_to_csv(const std::vector<ResultRecord>& records) {
    if (records.empty()) throw domain_error("records_to_csv: no records");
    const std::string kind = records.front().kind;
    const auto prefix = detail::csv_prefix(kind);
    std::vector<std::string> names;
    for (const auto& [name, v] : records.front().values) names.push_back(name);

    std::string out;
    for (std::size_t i = 0; i < prefix.size(); ++i) out += (i ? "," : "") + prefix[i];
    for (const auto& name : names) out += "," + name;
    if (kind == "error") out += ",message";
    for (const auto& name : names) out += ",err_" + name;
    out += "\n";

    for (const auto& r : records) {
        if (r.kind != kind) throw domain_error("records_to_csv: mixed record kinds");
        if (r.values.size() != names.size())
            throw domain_error("records_to_csv: ragged value set in kind " + kind);
        for (std::size_t i = 0; i < prefix.size(); ++i)
            out += (i ? "," : "") + detail::csv_prefix_cell(r, prefix[i]);
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (r.values[i].first != names[i])
                throw domain_error("records_to_csv: ragged value set in kind " + kind);
            out += "," + detail::format_double(r.values[i].second.value);
        }
        if (kind == "error") out += "," + detail::csv_quote(r.message);
        for (std::size_t i = 0; i < names.size(); ++i)
            out += "," + detail::format_double(r.values[i].second.err);
        out += "\n";
    }
    return out;
}

inline std::string records_to_jsonl(const std::vector<ResultRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += nlohmann::json(r).dump();
        out += "\n";
    }
    return out;
}

inline std::vector<ResultRecord> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path.string());
    std::vector<ResultRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(nlohmann::json::parse(line).get<ResultRecord>());
    }
    return records;
}

inline std::string nnsd_tables_to_csv(const std::vector<NnsdTable>& tables) {
    std::string out = "n,kappa,bin_center,density,brody_fit\n";
    for (const auto& t : tables) {
        for (std::size_t i = 0; i < t.bin_center.size(); ++i) {
            out += std::to_string(t.n_sites) + "," + detail::format_double(t.kappa) + "," +
                   detail::format_double(t.bin_center[i]) + "," +
                   detail::format_double(t.density[i]) + "," +
                   detail::format_double(t.brody_fit[i]) + "\n";
        }
    }
    return out;
}

inline std::string series_tables_to_csv(const std::vector<SeriesTable>& tables) {
    std::string out = "n,kappa,seed,t,d_expect\n";
    for (const auto& t : tables) {
        for (std::size_t i = 0; i < t.t.size(); ++i) {
            out += std::to_string(t.n_sites) + "," + detail::format_double(t.kappa) + "," +
                   std::to_string(t.seed) + "," + detail::format_double(t.t[i]) + "," +
                   detail::format_double(t.d_expect[i]) + "\n";
        }
    }
    return out;
}

// Writes every output of a run under `out_dir`: records.jsonl with all
// records, one CSV per record kind, and optional histogram / time-series
// tables. Each file lands atomically so an interrupted emission leaves no
// partial tables behind.
inline void emit_outputs(const std::string& out_dir, const std::vector<ResultRecord>& records,
                         const std::vector<NnsdTable>& nnsd_tables = {},
                         const std::vector<SeriesTable>& series_tables = {}) {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    detail::write_file_atomic(dir / "records.jsonl", records_to_jsonl(records));

    std::vector<std::string> kinds;
    for (const auto& r : records)
        if (std::find(kinds.begin(), kinds.end(), r.kind) == kinds.end()) kinds.push_back(r.kind);
    for (const auto& kind : kinds) {
        std::vector<ResultRecord> group;
        for (const auto& r : records)
            if (r.kind == kind) group.push_back(r);
        const std::string name = (kind == "error") ? "errors.csv" : kind + ".csv";
        detail::write_file_atomic(dir / name, records_to_csv(group));
    }
    if (!nnsd_tables.empty())
        detail::write_file_atomic(dir / "nnsd_hist.csv", nnsd_tables_to_csv(nnsd_tables));
    if (!series_tables.empty())
        detail::write_file_atomic(dir / "series.csv", series_tables_to_csv(series_tables));
}

}  // namespace ethladder

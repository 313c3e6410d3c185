#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "uqbench/dataset.hpp"
#include "uqbench/harness.hpp"

namespace uqbench {

inline constexpr const char* kVersion = "1.0.0";

// All numeric CSV cells are written at 9 significant digits; %.9g output
// reparses to a value that formats identically, so downstream recomputation
// from files is stable.
inline std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline double parse_num(const std::string& cell, const std::string& file, std::size_t row) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0')
        throw std::runtime_error(file + ": non-numeric cell at data row " + std::to_string(row) +
                                 ": '" + cell + "'");
    return v;
}

struct PresetInfo {
    std::string name;
    std::string description;
    bool needs_data = false;
};

inline std::vector<PresetInfo> list_presets() {
    return {
        {"toy-homo", "cubic mean, constant noise sd 0.2; levels 0.9/0.8, 100 simulations", false},
        {"toy-hetero", "cubic mean, noise sd 0.1+x^2; level 0.9, 100 simulations", false},
        {"toy-bimodal", "cubic mean, bimodal covariates sparse near 0; levels 0.9/0.8", false},
        {"boston", "DGP distilled from a user-supplied housing CSV; level 0.8, 50 simulations",
         true},
        {"ci-fast", "downsized homoscedastic toy (20 simulations, M=10, B=25) for quick runs",
         false},
    };
}

// Assembles the full experiment for a named preset. The seed must be final
// here: dataset-backed presets derive their split and distillation from it.
inline ExperimentConfig make_preset(const std::string& name, std::uint64_t seed,
                                    const std::string& data_csv = "") {
    ExperimentConfig cfg;
    cfg.master_seed = seed;
    cfg.net_config.seed = seed;
    if (name == "toy-homo") {
        cfg.dgp = toy_cubic();
        cfg.levels = {0.9, 0.8};
    } else if (name == "toy-hetero") {
        cfg.dgp = toy_heteroscedastic();
        cfg.levels = {0.9};
    } else if (name == "toy-bimodal") {
        cfg.dgp = toy_bimodal();
        cfg.levels = {0.9, 0.8};
        cfg.n_train = 250;
    } else if (name == "ci-fast") {
        cfg.dgp = toy_cubic();
        cfg.levels = {0.9, 0.8};
        cfg.n_simulations = 20;
        cfg.bootstrap_M = 10;
        cfg.dropout_B = 25;
        // The cubic toy standardizes to a noise sd near 0.088, a precision of
        // ~130; with the stock grid capped at tau=100 the claimed aleatoric sd
        // is floored at 0.1 and the dropout intervals can never calibrate.
        // The smoke preset widens the grid so it exercises a healthy pipeline.
        cfg.tau_grid = {1.0, 5.0, 10.0, 25.0, 50.0, 100.0, 150.0, 200.0};
    } else if (name == "boston") {
        if (data_csv.empty())
            throw std::invalid_argument("preset 'boston' needs --data <csv> (dataset not bundled)");
        const Dataset raw = load_csv(data_csv);
        const StandardizeTransform tf = StandardizeTransform::fit(raw);
        const Dataset std_data = tf.apply(raw);

        SplitSpec split;
        if (std_data.size() == 506) {
            split = SplitSpec{366, 100, 40, seed};
        } else {
            split.n_test = std::max<std::size_t>(1, (std_data.size() * 100) / 506);
            split.n_val = std::max<std::size_t>(1, (std_data.size() * 40) / 506);
            split.n_train = std_data.size() - split.n_test - split.n_val;
            split.seed = seed;
        }
        const SplitResult parts = split_dataset(std_data, split);

        RngStream distill_rng(seed, /*stream_id=*/0xb057ull);
        cfg.dgp = distill_dgp(std_data, distill_rng);
        cfg.fixed_X_train = parts.train.X;
        cfg.fixed_X_test = parts.test.X;
        cfg.fixed_X_val = parts.val.X;
        cfg.n_train = split.n_train;
        cfg.n_test = split.n_test;
        cfg.n_val = split.n_val;
        cfg.levels = {0.8};
        cfg.n_simulations = 50;
    } else {
        throw std::invalid_argument("unknown preset '" + name +
                                    "' (try: toy-homo, toy-hetero, toy-bimodal, boston, ci-fast)");
    }
    return cfg;
}

struct RunPaths {
    std::filesystem::path dir;
    std::filesystem::path manifest() const { return dir / "manifest.json"; }
    std::filesystem::path per_simulation() const { return dir / "per_simulation.csv"; }
    std::filesystem::path per_x() const { return dir / "per_x.csv"; }
    std::filesystem::path summary_csv() const { return dir / "summary.csv"; }
    std::filesystem::path summary_json() const { return dir / "summary.json"; }
    std::filesystem::path histograms() const { return dir / "histograms.csv"; }
};

struct PerSimRow {
    std::size_t sim = 0;
    std::string method;
    double level = 0.0;
    double picp = 0.0;
    double cicp = 0.0;
    double avg_pi_width = 0.0;
    double avg_ci_width = 0.0;
};

struct PerXRow {
    std::size_t x_index = 0;
    std::string method;
    double level = 0.0;
    double picf = 0.0;
    double cicf = 0.0;
};

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
    return out;
}

inline std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& p,
                                                           const std::string& expected_header) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot open '" + p.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("'" + p.string() + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != expected_header)
        throw std::runtime_error("'" + p.string() + "': unexpected header '" + line + "'");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(split_line(line));
    }
    return rows;
}

}  // namespace detail

inline void write_per_simulation_csv(const std::filesystem::path& path, const MetricsReport& r) {
    auto out = detail::open_out(path);
    out << "sim,method,level,picp,cicp,avg_pi_width,avg_ci_width\n";
    for (const auto& rec : r.simulations) {
        if (!rec.ok) continue;
        for (const auto& m : rec.methods)
            for (const auto& lm : m.levels)
                out << rec.sim << ',' << m.method << ',' << fmt9(lm.level) << ',' << fmt9(lm.picp)
                    << ',' << fmt9(lm.cicp) << ',' << fmt9(lm.avg_pi_width) << ','
                    << fmt9(lm.avg_ci_width) << '\n';
    }
}

inline std::vector<PerSimRow> read_per_simulation_csv(const std::filesystem::path& path) {
    const auto rows =
        detail::read_csv_rows(path, "sim,method,level,picp,cicp,avg_pi_width,avg_ci_width");
    std::vector<PerSimRow> out;
    out.reserve(rows.size());
    const std::string f = path.string();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != 7)
            throw std::runtime_error(f + ": row " + std::to_string(i) + " has " +
                                     std::to_string(rows[i].size()) + " cells, expected 7");
        PerSimRow r;
        r.sim = static_cast<std::size_t>(parse_num(rows[i][0], f, i));
        r.method = rows[i][1];
        r.level = parse_num(rows[i][2], f, i);
        r.picp = parse_num(rows[i][3], f, i);
        r.cicp = parse_num(rows[i][4], f, i);
        r.avg_pi_width = parse_num(rows[i][5], f, i);
        r.avg_ci_width = parse_num(rows[i][6], f, i);
        out.push_back(std::move(r));
    }
    return out;
}

inline void write_per_x_csv(const std::filesystem::path& path, const MetricsReport& r) {
    auto out = detail::open_out(path);
    out << "x_index,method,level,picf,cicf\n";
    for (const auto& e : r.entries)
        for (std::size_t i = 0; i < e.picf_per_x.size(); ++i)
            out << i << ',' << e.method << ',' << fmt9(e.level) << ',' << fmt9(e.picf_per_x[i])
                << ',' << fmt9(e.cicf_per_x[i]) << '\n';
}

inline std::vector<PerXRow> read_per_x_csv(const std::filesystem::path& path) {
    const auto rows = detail::read_csv_rows(path, "x_index,method,level,picf,cicf");
    std::vector<PerXRow> out;
    out.reserve(rows.size());
    const std::string f = path.string();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != 5)
            throw std::runtime_error(f + ": row " + std::to_string(i) + " has " +
                                     std::to_string(rows[i].size()) + " cells, expected 5");
        PerXRow r;
        r.x_index = static_cast<std::size_t>(parse_num(rows[i][0], f, i));
        r.method = rows[i][1];
        r.level = parse_num(rows[i][2], f, i);
        r.picf = parse_num(rows[i][3], f, i);
        r.cicf = parse_num(rows[i][4], f, i);
        out.push_back(std::move(r));
    }
    return out;
}

struct SummaryRow {
    std::string method;
    double level = 0.0;
    double picf_brier = 0.0;
    double cicf_brier = 0.0;
    double picp_mean = 0.0;
    double cicp_mean = 0.0;
    double coverage_bias = 0.0;
    double coverage_variance = 0.0;
    double avg_pi_width = 0.0;
    double avg_ci_width = 0.0;
};

// Recomputes the summary from parsed per-simulation and per-x rows — the
// same inputs `report` has — so a rerun and a recompute agree byte for byte.
inline std::vector<SummaryRow> summarize(const std::vector<PerSimRow>& per_sim,
                                         const std::vector<PerXRow>& per_x) {
    if (per_sim.empty()) throw std::runtime_error("summarize: no per-simulation rows");
    std::vector<std::pair<std::string, double>> keys;
    auto key_index = [&](const std::string& method, double level) {
        for (std::size_t i = 0; i < keys.size(); ++i)
            if (keys[i].first == method && keys[i].second == level) return i;
        keys.emplace_back(method, level);
        return keys.size() - 1;
    };
    for (const auto& r : per_sim) key_index(r.method, r.level);

    std::vector<SummaryRow> rows(keys.size());
    for (std::size_t k = 0; k < keys.size(); ++k) {
        SummaryRow& s = rows[k];
        s.method = keys[k].first;
        s.level = keys[k].second;
        double n = 0.0;
        for (const auto& r : per_sim) {
            if (r.method != s.method || r.level != s.level) continue;
            s.picp_mean += r.picp;
            s.cicp_mean += r.cicp;
            s.avg_pi_width += r.avg_pi_width;
            s.avg_ci_width += r.avg_ci_width;
            n += 1.0;
        }
        s.picp_mean /= n;
        s.cicp_mean /= n;
        s.avg_pi_width /= n;
        s.avg_ci_width /= n;

        std::vector<double> picf, cicf;
        for (const auto& r : per_x) {
            if (r.method != s.method || r.level != s.level) continue;
            picf.push_back(r.picf);
            cicf.push_back(r.cicf);
        }
        if (picf.empty())
            throw std::runtime_error("summarize: no per-x rows for " + s.method + " at level " +
                                     fmt9(s.level));
        s.picf_brier = brier(picf, s.level);
        s.cicf_brier = brier(cicf, s.level);
        const BiasVariance bv = bias_variance(picf, s.level);
        s.coverage_bias = bv.bias;
        s.coverage_variance = bv.variance;
    }
    return rows;
}

inline void write_summary_csv(const std::filesystem::path& path,
                              const std::vector<SummaryRow>& rows) {
    auto out = detail::open_out(path);
    out << "method,level,picf_brier,cicf_brier,picp_mean,cicp_mean,coverage_bias,"
           "coverage_variance,avg_pi_width,avg_ci_width\n";
    for (const auto& s : rows)
        out << s.method << ',' << fmt9(s.level) << ',' << fmt9(s.picf_brier) << ','
            << fmt9(s.cicf_brier) << ',' << fmt9(s.picp_mean) << ',' << fmt9(s.cicp_mean) << ','
            << fmt9(s.coverage_bias) << ',' << fmt9(s.coverage_variance) << ','
            << fmt9(s.avg_pi_width) << ',' << fmt9(s.avg_ci_width) << '\n';
}

inline void write_summary_json(const std::filesystem::path& path,
                               const std::vector<SummaryRow>& rows) {
    nlohmann::ordered_json doc;
    doc["schema"] = "uqbench-summary-1";
    doc["entries"] = nlohmann::ordered_json::array();
    for (const auto& s : rows) {
        nlohmann::ordered_json e;
        e["method"] = s.method;
        e["level"] = s.level;
        e["picf_brier"] = s.picf_brier;
        e["cicf_brier"] = s.cicf_brier;
        e["picp_mean"] = s.picp_mean;
        e["cicp_mean"] = s.cicp_mean;
        e["coverage_bias"] = s.coverage_bias;
        e["coverage_variance"] = s.coverage_variance;
        e["avg_pi_width"] = s.avg_pi_width;
        e["avg_ci_width"] = s.avg_ci_width;
        doc["entries"].push_back(std::move(e));
    }
    auto out = detail::open_out(path);
    out << doc.dump(2) << '\n';
}

// Equal-width bins over [0,1]; values outside are clamped to the end bins.
inline std::vector<std::size_t> histogram_counts(std::span<const double> values,
                                                 std::size_t n_bins) {
    if (values.empty()) throw std::invalid_argument("histogram_counts: empty input");
    if (n_bins == 0) throw std::invalid_argument("histogram_counts: n_bins must be >= 1");
    std::vector<std::size_t> counts(n_bins, 0);
    for (double v : values) {
        auto bin = static_cast<long>(v * static_cast<double>(n_bins));
        if (bin < 0) bin = 0;
        if (bin >= static_cast<long>(n_bins)) bin = static_cast<long>(n_bins) - 1;
        ++counts[static_cast<std::size_t>(bin)];
    }
    return counts;
}

inline void write_histograms_csv(const std::filesystem::path& path,
                                 const std::vector<PerXRow>& per_x, std::size_t n_bins = 20) {
    auto out = detail::open_out(path);
    out << "method,level,metric,bin_lo,bin_hi,count\n";
    std::vector<std::pair<std::string, double>> keys;
    for (const auto& r : per_x) {
        bool seen = false;
        for (const auto& k : keys)
            if (k.first == r.method && k.second == r.level) seen = true;
        if (!seen) keys.emplace_back(r.method, r.level);
    }
    for (const auto& [method, level] : keys) {
        std::vector<double> picf, cicf;
        for (const auto& r : per_x) {
            if (r.method != method || r.level != level) continue;
            picf.push_back(r.picf);
            cicf.push_back(r.cicf);
        }
        for (const auto& [metric, values] :
             {std::pair<const char*, const std::vector<double>*>{"picf", &picf},
              std::pair<const char*, const std::vector<double>*>{"cicf", &cicf}}) {
            const auto counts = histogram_counts(*values, n_bins);
            for (std::size_t b = 0; b < n_bins; ++b) {
                const double lo = static_cast<double>(b) / static_cast<double>(n_bins);
                const double hi = static_cast<double>(b + 1) / static_cast<double>(n_bins);
                out << method << ',' << fmt9(level) << ',' << metric << ',' << fmt9(lo) << ','
                    << fmt9(hi) << ',' << counts[b] << '\n';
            }
        }
    }
}

inline std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            parts.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

inline std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    for (const auto& p : split_commas(s)) {
        char* end = nullptr;
        const double v = std::strtod(p.c_str(), &end);
        if (p.empty() || end == p.c_str() || *end != '\0')
            throw std::invalid_argument(what + ": cannot parse '" + p + "' as a number");
        out.push_back(v);
    }
    return out;
}

inline std::vector<std::size_t> parse_size_list(const std::string& s, const std::string& what) {
    std::vector<std::size_t> out;
    for (double v : parse_double_list(s, what)) {
        if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v)))
            throw std::invalid_argument(what + ": expected nonnegative integers");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const std::size_t a = s.find_first_not_of(" \t\r");
    const std::size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

}  // namespace detail

// Flat `key = value` text with dotted section keys and '#' comments; see
// configs/ for a commented example per preset.
inline std::map<std::string, std::string> load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                        ": expected 'key = value'");
        kv[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
    }
    return kv;
}

inline void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                               const std::string& value) {
    const auto as_size = [&](const std::string& v) { return parse_size_list(v, key).at(0); };
    if (key == "seed") {
        cfg.master_seed = static_cast<std::uint64_t>(std::stoull(value));
    } else if (key == "sims") {
        cfg.n_simulations = as_size(value);
    } else if (key == "threads") {
        cfg.n_threads = as_size(value);
    } else if (key == "levels") {
        cfg.levels = parse_double_list(value, key);
    } else if (key == "picf.mode") {
        if (value == "analytic")
            cfg.empirical_picf = false;
        else if (value == "empirical")
            cfg.empirical_picf = true;
        else
            throw std::invalid_argument("picf.mode must be 'analytic' or 'empirical'");
    } else if (key == "experiment.n_train") {
        cfg.n_train = as_size(value);
    } else if (key == "experiment.n_test") {
        cfg.n_test = as_size(value);
    } else if (key == "experiment.n_val") {
        cfg.n_val = as_size(value);
    } else if (key == "bootstrap.m") {
        cfg.bootstrap_M = as_size(value);
    } else if (key == "dropout.b") {
        cfg.dropout_B = as_size(value);
    } else if (key == "dropout.tau_grid") {
        cfg.tau_grid = parse_double_list(value, key);
    } else if (key == "dropout.p_grid") {
        cfg.p_grid = parse_double_list(value, key);
    } else if (key == "net.hidden_sizes") {
        cfg.net_config.hidden_sizes = parse_size_list(value, key);
    } else if (key == "net.epochs") {
        cfg.net_config.epochs = as_size(value);
    } else if (key == "net.learning_rate") {
        cfg.net_config.learning_rate = std::stod(value);
    } else if (key == "net.lr_decay") {
        cfg.net_config.lr_decay = std::stod(value);
    } else {
        throw std::invalid_argument("unknown config key '" + key + "'");
    }
}

struct RunInfo {
    std::string preset;
    std::string data_csv;  // boston only
    std::uint64_t seed = 0;
    std::size_t n_threads = 1;
    std::string started_at;
    std::string finished_at;
};

inline std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline void write_manifest(const std::filesystem::path& path, const ExperimentConfig& cfg,
                           const MetricsReport& report, const RunInfo& info) {
    nlohmann::ordered_json doc;
    doc["tool"] = "uqbench";
    doc["version"] = kVersion;
    doc["preset"] = info.preset;
    if (!info.data_csv.empty()) doc["data_csv"] = info.data_csv;
    doc["master_seed"] = cfg.master_seed;
    doc["n_simulations"] = cfg.n_simulations;
    doc["n_train"] = cfg.n_train;
    doc["n_test"] = cfg.n_test;
    doc["n_val"] = cfg.n_val;
    doc["levels"] = cfg.levels;
    doc["bootstrap_M"] = cfg.bootstrap_M;
    doc["dropout_B"] = cfg.dropout_B;
    doc["tau_grid"] = cfg.tau_grid;
    doc["p_grid"] = cfg.p_grid;
    doc["net"] = {{"hidden_sizes", cfg.net_config.hidden_sizes},
                  {"dropout_rate", cfg.net_config.dropout_rate},
                  {"epochs", cfg.net_config.epochs},
                  {"learning_rate", cfg.net_config.learning_rate},
                  {"lr_decay", cfg.net_config.lr_decay}};
    doc["picf_mode"] = cfg.empirical_picf ? "empirical" : "analytic";
    doc["dropout_choice"] = {{"tau", report.dropout_choice.tau},
                             {"p", report.dropout_choice.p},
                             {"tuning_picp", report.dropout_choice.achieved_picp}};
    doc["threads"] = info.n_threads;
    doc["started_at"] = info.started_at;
    doc["finished_at"] = info.finished_at;
    doc["n_failed"] = report.n_failed;
    doc["simulations"] = nlohmann::ordered_json::array();
    for (const auto& s : report.simulations) {
        nlohmann::ordered_json e;
        e["sim"] = s.sim;
        e["ok"] = s.ok;
        e["attempts"] = s.attempts;
        if (!s.error.empty()) e["error"] = s.error;
        doc["simulations"].push_back(std::move(e));
    }
    auto out = detail::open_out(path);
    out << doc.dump(2) << '\n';
}

// Writes the complete run directory. The summary files are computed from
// the emitted CSVs (not from in-memory full-precision values) so that
// `report` regenerates them byte-identically.
inline RunPaths write_run_directory(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                                    const MetricsReport& report, const RunInfo& info) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output dir '" + dir.string() + "'");
    RunPaths paths{dir};
    write_per_simulation_csv(paths.per_simulation(), report);
    write_per_x_csv(paths.per_x(), report);
    const auto per_sim_rows = read_per_simulation_csv(paths.per_simulation());
    const auto per_x_rows = read_per_x_csv(paths.per_x());
    const auto rows = summarize(per_sim_rows, per_x_rows);
    write_summary_csv(paths.summary_csv(), rows);
    write_summary_json(paths.summary_json(), rows);
    write_histograms_csv(paths.histograms(), per_x_rows);
    write_manifest(paths.manifest(), cfg, report, info);
    return paths;
}

// `report` entry point: recompute summary.csv and summary.json from the
// stored per-simulation and per-x CSVs.
inline std::vector<SummaryRow> regenerate_summary(const std::filesystem::path& dir) {
    RunPaths paths{dir};
    const auto per_sim_rows = read_per_simulation_csv(paths.per_simulation());
    const auto per_x_rows = read_per_x_csv(paths.per_x());
    const auto rows = summarize(per_sim_rows, per_x_rows);
    write_summary_csv(paths.summary_csv(), rows);
    write_summary_json(paths.summary_json(), rows);
    return rows;
}

}  // namespace uqbench

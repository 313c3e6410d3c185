#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "uqbench/report.hpp"

using namespace uqbench;

namespace {

std::filesystem::path tmp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "uqbench-report" / name;
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig tiny_config() {
    ExperimentConfig cfg;
    cfg.dgp = toy_cubic();
    cfg.n_train = 40;
    cfg.n_test = 25;
    cfg.n_val = 10;
    cfg.n_simulations = 3;
    cfg.bootstrap_M = 2;
    cfg.dropout_B = 4;
    cfg.tau_grid = {25.0};
    cfg.p_grid = {0.1};
    cfg.net_config.hidden_sizes = {8};
    cfg.net_config.epochs = 3;
    cfg.master_seed = 1;
    return cfg;
}

}  // namespace

TEST_CASE("nine digit formatting is stable under reparsing", "[reportcli]") {
    CHECK(fmt9(0.9) == "0.9");
    CHECK(fmt9(0.0) == "0");
    CHECK(fmt9(-0.25) == "-0.25");

    RngStream rng(801);
    for (int i = 0; i < 2000; ++i) {
        double v = rng.uniform(-1, 1);
        const int scale = static_cast<int>(rng.below(13)) - 6;
        v *= std::pow(10.0, scale);
        const std::string once = fmt9(v);
        const double back = std::strtod(once.c_str(), nullptr);
        CHECK(fmt9(back) == once);
    }

    CHECK(parse_num("0.25", "t.csv", 0) == 0.25);
    CHECK_THROWS_AS(parse_num("abc", "t.csv", 3), std::runtime_error);
    CHECK_THROWS_AS(parse_num("1.5x", "t.csv", 3), std::runtime_error);
}

TEST_CASE("preset listing names every experiment", "[reportcli]") {
    const auto presets = list_presets();
    REQUIRE(presets.size() == 5);
    std::vector<std::string> names;
    for (const auto& p : presets) names.push_back(p.name);
    CHECK(names == std::vector<std::string>{"toy-homo", "toy-hetero", "toy-bimodal", "boston",
                                            "ci-fast"});
    for (const auto& p : presets) CHECK(p.needs_data == (p.name == "boston"));
}

TEST_CASE("presets assemble the advertised configurations", "[reportcli]") {
    const ExperimentConfig homo = make_preset("toy-homo", 7);
    CHECK(homo.dgp.name == "toy-homo");
    CHECK(homo.levels == std::vector<double>{0.9, 0.8});
    CHECK(homo.n_train == 1000);
    CHECK(homo.n_simulations == 100);
    CHECK(homo.bootstrap_M == 50);
    CHECK(homo.dropout_B == 100);
    CHECK(homo.master_seed == 7);
    CHECK(homo.net_config.seed == 7);
    CHECK(homo.net_config.hidden_sizes == std::vector<std::size_t>{40, 30, 20});

    const ExperimentConfig hetero = make_preset("toy-hetero", 0);
    CHECK(hetero.dgp.name == "toy-hetero");
    CHECK(hetero.levels == std::vector<double>{0.9});

    const ExperimentConfig bimodal = make_preset("toy-bimodal", 0);
    CHECK(bimodal.dgp.name == "toy-bimodal");
    CHECK(bimodal.n_train == 250);
    CHECK(bimodal.levels == std::vector<double>{0.9, 0.8});

    const ExperimentConfig fast = make_preset("ci-fast", 0);
    CHECK(fast.n_simulations == 20);
    CHECK(fast.bootstrap_M == 10);
    CHECK(fast.dropout_B == 25);

    CHECK_THROWS_WITH(make_preset("nonesuch", 0),
                      Catch::Matchers::ContainsSubstring("unknown preset"));
    CHECK_THROWS_WITH(make_preset("boston", 0), Catch::Matchers::ContainsSubstring("--data"));
}

TEST_CASE("the dataset backed preset splits and distills", "[reportcli]") {
    const auto dir = tmp_dir("boston-preset");
    const auto csv = dir / "housing.csv";
    {
        std::ofstream out(csv);
        out << "a,b,y\n";
        RngStream rng(802);
        for (int i = 0; i < 120; ++i) {
            const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
            out << a << ',' << b << ',' << (2 * a - b + 0.1 * rng.normal()) << '\n';
        }
    }
    const ExperimentConfig cfg = make_preset("boston", 3, csv.string());
    CHECK(cfg.dgp.name == "distilled");
    CHECK(cfg.levels == std::vector<double>{0.8});
    CHECK(cfg.n_simulations == 50);
    // proportional split of 120 rows: test 23, val 9, train the rest
    CHECK(cfg.n_test == (120 * 100) / 506);
    CHECK(cfg.n_val == (120 * 40) / 506);
    CHECK(cfg.n_train == 120 - cfg.n_test - cfg.n_val);
    CHECK(cfg.fixed_X_train.rows() == cfg.n_train);
    CHECK(cfg.fixed_X_test.rows() == cfg.n_test);
    CHECK(cfg.fixed_X_val.rows() == cfg.n_val);
    CHECK(cfg.fixed_X_train.cols() == 2);

    // same seed, same assembly
    const ExperimentConfig again = make_preset("boston", 3, csv.string());
    CHECK(again.fixed_X_train == cfg.fixed_X_train);
    const double probe[2] = {0.1, -0.2};
    CHECK(again.dgp.mean_at({probe, 2}) == cfg.dgp.mean_at({probe, 2}));
}

TEST_CASE("summaries aggregate parsed rows by first appearance", "[reportcli]") {
    std::vector<PerSimRow> per_sim{
        {0, "bootstrap", 0.9, 0.90, 1.0, 1.0, 0.5},
        {1, "bootstrap", 0.9, 0.80, 0.0, 2.0, 1.5},
        {0, "dropout", 0.9, 0.95, 1.0, 3.0, 2.5},
        {1, "dropout", 0.9, 0.85, 1.0, 5.0, 4.5},
    };
    std::vector<PerXRow> per_x{
        {0, "bootstrap", 0.9, 0.95, 1.0},
        {1, "bootstrap", 0.9, 0.85, 0.0},
        {0, "dropout", 0.9, 1.0, 1.0},
        {1, "dropout", 0.9, 0.80, 1.0},
    };
    const auto rows = summarize(per_sim, per_x);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].method == "bootstrap");
    CHECK(rows[1].method == "dropout");
    CHECK(rows[0].picp_mean == Catch::Approx(0.85).margin(1e-12));
    CHECK(rows[0].cicp_mean == Catch::Approx(0.5).margin(1e-12));
    CHECK(rows[0].avg_pi_width == Catch::Approx(1.5).margin(1e-12));
    CHECK(rows[0].avg_ci_width == Catch::Approx(1.0).margin(1e-12));
    // picf values 0.95/0.85 around level 0.9: pure variance, 0.05^2
    CHECK(rows[0].picf_brier == Catch::Approx(0.0025).margin(1e-12));
    CHECK(rows[0].coverage_bias == Catch::Approx(0.0).margin(1e-12));
    CHECK(rows[0].coverage_variance == Catch::Approx(0.0025).margin(1e-12));
    // cicf values 1.0/0.0 around 0.9: (0.01 + 0.81)/2
    CHECK(rows[0].cicf_brier == Catch::Approx(0.41).margin(1e-12));
    CHECK(rows[1].picp_mean == Catch::Approx(0.90).margin(1e-12));

    CHECK_THROWS_AS(summarize({}, per_x), std::runtime_error);
    CHECK_THROWS_AS(summarize(per_sim, {}), std::runtime_error);
}

TEST_CASE("run directories regenerate byte identical summaries", "[reportcli]") {
    const ExperimentConfig cfg = tiny_config();
    const MetricsReport report = run_experiment(cfg);

    const auto dir = tmp_dir("roundtrip");
    RunInfo info;
    info.preset = "toy-homo";
    info.seed = cfg.master_seed;
    info.started_at = utc_timestamp();
    info.finished_at = info.started_at;
    const RunPaths paths = write_run_directory(dir, cfg, report, info);

    for (const auto& p : {paths.manifest(), paths.per_simulation(), paths.per_x(),
                          paths.summary_csv(), paths.summary_json(), paths.histograms()})
        CHECK(std::filesystem::exists(p));

    const auto per_sim_rows = read_per_simulation_csv(paths.per_simulation());
    CHECK(per_sim_rows.size() == 3 * 2 * 2);  // sims x methods x levels
    const auto per_x_rows = read_per_x_csv(paths.per_x());
    CHECK(per_x_rows.size() == 2 * 2 * cfg.n_test);

    // parsed CSV cells match the report to formatting precision
    const auto& entry = report.entry("bootstrap", 0.9);
    for (const auto& r : per_x_rows) {
        if (r.method != "bootstrap" || r.level != 0.9) continue;
        CHECK(r.picf == Catch::Approx(entry.picf_per_x[r.x_index]).margin(1e-8));
    }

    const std::string summary_csv_before = slurp(paths.summary_csv());
    const std::string summary_json_before = slurp(paths.summary_json());
    const std::string per_sim_before = slurp(paths.per_simulation());

    const auto rows = regenerate_summary(dir);
    REQUIRE(rows.size() == 4);
    CHECK(slurp(paths.summary_csv()) == summary_csv_before);
    CHECK(slurp(paths.summary_json()) == summary_json_before);
    CHECK(slurp(paths.per_simulation()) == per_sim_before);

    // a second full write with the same report reproduces every CSV
    const auto dir2 = tmp_dir("roundtrip-again");
    write_run_directory(dir2, cfg, report, info);
    CHECK(slurp(dir2 / "per_simulation.csv") == per_sim_before);
    CHECK(slurp(dir2 / "summary.csv") == summary_csv_before);
    CHECK(slurp(dir2 / "per_x.csv") == slurp(paths.per_x()));
    CHECK(slurp(dir2 / "histograms.csv") == slurp(paths.histograms()));

    const std::string manifest = slurp(paths.manifest());
    CHECK(manifest.find("\"tool\": \"uqbench\"") != std::string::npos);
    CHECK(manifest.find("\"master_seed\": 1") != std::string::npos);
    CHECK(manifest.find("\"picf_mode\": \"analytic\"") != std::string::npos);
}

TEST_CASE("summary regeneration fails cleanly outside a run directory", "[reportcli]") {
    const auto dir = tmp_dir("not-a-run");
    CHECK_THROWS_AS(regenerate_summary(dir), std::runtime_error);

    // corrupt header is refused
    std::ofstream(dir / "per_simulation.csv") << "wrong,header\n1,2\n";
    CHECK_THROWS_WITH(regenerate_summary(dir),
                      Catch::Matchers::ContainsSubstring("unexpected header"));
}

TEST_CASE("histogram counts partition the unit interval", "[reportcli]") {
    const std::vector<double> half(17, 0.5);
    const auto bins = histogram_counts(half, 10);
    REQUIRE(bins.size() == 10);
    CHECK(bins[5] == 17);
    for (std::size_t b = 0; b < 10; ++b)
        if (b != 5) CHECK(bins[b] == 0);

    const std::vector<double> ends{0.0, 1.0};
    const auto two = histogram_counts(ends, 2);
    CHECK(two == std::vector<std::size_t>{1, 1});  // 1.0 clamps into the top bin

    RngStream rng(803);
    std::vector<double> vals(1000);
    for (auto& v : vals) v = rng.uniform(-0.2, 1.2);
    const auto counts = histogram_counts(vals, 20);
    std::size_t total = 0;
    for (auto c : counts) total += c;
    CHECK(total == vals.size());

    CHECK_THROWS_AS(histogram_counts(std::vector<double>{}, 10), std::invalid_argument);
    CHECK_THROWS_AS(histogram_counts(ends, 0), std::invalid_argument);
}

TEST_CASE("config files override experiment settings", "[reportcli]") {
    const auto dir = tmp_dir("configs");
    const auto path = dir / "run.cfg";
    {
        std::ofstream out(path);
        out << "# comment line\n"
            << "seed = 9\n"
            << "sims = 12   # trailing comment\n"
            << "levels = 0.9,0.8\n"
            << "picf.mode = empirical\n"
            << "experiment.n_train = 300\n"
            << "bootstrap.m = 5\n"
            << "dropout.b = 7\n"
            << "dropout.tau_grid = 1,10,100\n"
            << "net.hidden_sizes = 12, 6\n"
            << "net.learning_rate = 0.005\n"
            << "\n";
    }
    const auto kv = load_config_file(path.string());
    CHECK(kv.at("seed") == "9");
    CHECK(kv.at("sims") == "12");

    ExperimentConfig cfg = make_preset("toy-homo", 0);
    for (const auto& [key, value] : kv) apply_config_entry(cfg, key, value);
    CHECK(cfg.master_seed == 9);
    CHECK(cfg.n_simulations == 12);
    CHECK(cfg.levels == std::vector<double>{0.9, 0.8});
    CHECK(cfg.empirical_picf);
    CHECK(cfg.n_train == 300);
    CHECK(cfg.bootstrap_M == 5);
    CHECK(cfg.dropout_B == 7);
    CHECK(cfg.tau_grid == std::vector<double>{1, 10, 100});
    CHECK(cfg.net_config.hidden_sizes == std::vector<std::size_t>{12, 6});
    CHECK(cfg.net_config.learning_rate == 0.005);

    CHECK_THROWS_WITH(apply_config_entry(cfg, "nonesuch", "1"),
                      Catch::Matchers::ContainsSubstring("unknown config key"));
    CHECK_THROWS_WITH(apply_config_entry(cfg, "picf.mode", "sometimes"),
                      Catch::Matchers::ContainsSubstring("picf.mode"));
    CHECK_THROWS_AS(apply_config_entry(cfg, "levels", "0.9,banana"), std::invalid_argument);
    CHECK_THROWS_AS(apply_config_entry(cfg, "net.hidden_sizes", "2.5"), std::invalid_argument);

    const auto bad = dir / "bad.cfg";
    std::ofstream(bad) << "seed 9\n";
    CHECK_THROWS_WITH(load_config_file(bad.string()),
                      Catch::Matchers::ContainsSubstring(":1:"));
    CHECK_THROWS_AS(load_config_file((dir / "missing.cfg").string()), std::invalid_argument);
}

TEST_CASE("list parsing helpers", "[reportcli]") {
    CHECK(split_commas("a, b,c") == std::vector<std::string>{"a", "b", "c"});
    CHECK(split_commas("x") == std::vector<std::string>{"x"});
    CHECK(parse_double_list("0.9, 0.8", "levels") == std::vector<double>{0.9, 0.8});
    CHECK(parse_size_list("40,30,20", "sizes") == std::vector<std::size_t>{40, 30, 20});
    CHECK_THROWS_AS(parse_double_list("0.9,,0.8", "levels"), std::invalid_argument);
    CHECK_THROWS_AS(parse_size_list("-3", "sizes"), std::invalid_argument);
    CHECK_THROWS_AS(parse_size_list("1.5", "sizes"), std::invalid_argument);
}

TEST_CASE("timestamps are ISO 8601 UTC", "[reportcli]") {
    const std::string t = utc_timestamp();
    REQUIRE(t.size() == 20);
    CHECK(t[4] == '-');
    CHECK(t[10] == 'T');
    CHECK(t.back() == 'Z');
}

TEST_CASE("unwritable output locations are reported", "[reportcli]") {
    const auto dir = tmp_dir("blocked");
    std::ofstream(dir / "blocker") << "x";
    const ExperimentConfig cfg = tiny_config();
    const MetricsReport report = run_experiment(cfg);
    RunInfo info;
    CHECK_THROWS_AS(write_run_directory(dir / "blocker" / "sub", cfg, report, info),
                    std::runtime_error);
}

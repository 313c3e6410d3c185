#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <uqbench/uqbench.hpp>

namespace {

using namespace uqbench;

std::filesystem::path default_out_base() {
    if (const char* env = std::getenv("UQBENCH_OUT_DIR"); env && *env) return env;
    return "runs";
}

void print_summary_table(const std::vector<SummaryRow>& rows) {
    std::printf("%-10s %-6s %-11s %-11s %-9s %-9s %-11s %-11s\n", "method", "level", "picf_brier",
                "cicf_brier", "picp", "cicp", "pi_width", "ci_width");
    for (const auto& s : rows)
        std::printf("%-10s %-6s %-11s %-11s %-9s %-9s %-11s %-11s\n", s.method.c_str(),
                    fmt9(s.level).c_str(), fmt9(s.picf_brier).c_str(), fmt9(s.cicf_brier).c_str(),
                    fmt9(s.picp_mean).c_str(), fmt9(s.cicp_mean).c_str(),
                    fmt9(s.avg_pi_width).c_str(), fmt9(s.avg_ci_width).c_str());
}

int cmd_list_presets() {
    for (const auto& p : list_presets())
        std::printf("%-12s %s%s\n", p.name.c_str(), p.description.c_str(),
                    p.needs_data ? " (requires --data)" : "");
    return 0;
}

struct RunOptions {
    std::string preset;
    std::string data;
    std::string out;
    std::string config_file;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::size_t sims = 0;
    bool sims_given = false;
    std::size_t threads = 0;
    bool threads_given = false;
    std::string levels;
    bool empirical_picf = false;
};

int cmd_run(const RunOptions& opt) {
    std::uint64_t seed = 0;
    std::map<std::string, std::string> file_cfg;
    if (!opt.config_file.empty()) file_cfg = load_config_file(opt.config_file);
    if (auto it = file_cfg.find("seed"); it != file_cfg.end())
        seed = static_cast<std::uint64_t>(std::stoull(it->second));
    if (opt.seed_given) seed = opt.seed;

    ExperimentConfig cfg = make_preset(opt.preset, seed, opt.data);
    for (const auto& [key, value] : file_cfg) {
        if (key == "seed") continue;
        apply_config_entry(cfg, key, value);
    }
    if (opt.sims_given) cfg.n_simulations = opt.sims;
    if (opt.threads_given) cfg.n_threads = opt.threads;
    if (!opt.levels.empty()) cfg.levels = parse_double_list(opt.levels, "--levels");
    if (opt.empirical_picf) cfg.empirical_picf = true;

    std::filesystem::path out_dir = opt.out.empty()
                                        ? default_out_base() / (opt.preset + "-seed" +
                                                                std::to_string(cfg.master_seed))
                                        : std::filesystem::path(opt.out);

    RunInfo info;
    info.preset = opt.preset;
    info.data_csv = opt.data;
    info.seed = cfg.master_seed;
    info.n_threads = cfg.n_threads;
    info.started_at = utc_timestamp();
    const MetricsReport report = run_experiment(cfg);
    info.finished_at = utc_timestamp();
    const RunPaths paths = write_run_directory(out_dir, cfg, report, info);

    std::printf("preset %s, seed %llu, %zu simulations (%zu failed), dropout tau=%s p=%s\n",
                opt.preset.c_str(), static_cast<unsigned long long>(cfg.master_seed),
                cfg.n_simulations, report.n_failed, fmt9(report.dropout_choice.tau).c_str(),
                fmt9(report.dropout_choice.p).c_str());
    print_summary_table(regenerate_summary(out_dir));
    std::printf("wrote %s\n", paths.dir.string().c_str());
    return 0;
}

int cmd_demo_linear(std::size_t sims, double level, std::uint64_t seed, const std::string& out) {
    RngStream rng(seed, /*stream_id=*/0xde30ull);
    const std::vector<double> cicp_values = linear_dependence_demo(sims, level, rng);
    double ones = 0.0;
    for (double v : cicp_values) ones += v == 1.0 ? 1.0 : 0.0;
    const double fraction = ones / static_cast<double>(cicp_values.size());

    std::filesystem::path out_dir = out.empty() ? default_out_base() / "demo-linear"
                                                : std::filesystem::path(out);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create output dir '" + out_dir.string() + "'");
    const auto csv_path = out_dir / "demo_linear.csv";
    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot write '" + csv_path.string() + "'");
    csv << "sim,cicp\n";
    for (std::size_t j = 0; j < cicp_values.size(); ++j)
        csv << j << ',' << fmt9(cicp_values[j]) << '\n';

    std::printf("%zu simulations at level %s: fraction of CICP=1 is %s\n", sims,
                fmt9(level).c_str(), fmt9(fraction).c_str());
    std::printf("wrote %s\n", csv_path.string().c_str());
    return 0;
}

int cmd_report(const std::string& in_dir) {
    const auto rows = regenerate_summary(in_dir);
    print_summary_table(rows);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"uqbench: simulation benchmark for regression uncertainty estimates"};
    app.require_subcommand(1);

    auto* list_cmd = app.add_subcommand("list-presets", "List available experiment presets");

    RunOptions run_opt;
    auto* run_cmd = app.add_subcommand("run", "Run an experiment preset");
    run_cmd->add_option("--preset", run_opt.preset, "Experiment preset name")->required();
    run_cmd->add_option("--data", run_opt.data, "CSV path for dataset-backed presets");
    run_cmd->add_option("--seed", run_opt.seed, "Master seed (default 0)");
    run_cmd->add_option("--sims", run_opt.sims, "Number of simulations");
    run_cmd->add_option("--out", run_opt.out, "Output directory");
    run_cmd->add_option("--threads", run_opt.threads, "Worker threads (0 = all cores)");
    run_cmd->add_option("--levels", run_opt.levels, "Comma-separated confidence levels");
    run_cmd->add_option("--config", run_opt.config_file, "Key-value config file");
    run_cmd->add_flag("--empirical-picf", run_opt.empirical_picf,
                      "Score PICF from simulated observations instead of the analytic term");

    std::size_t demo_sims = 100;
    double demo_level = 0.95;
    std::uint64_t demo_seed = 0;
    std::string demo_out;
    auto* demo_cmd =
        app.add_subcommand("demo-linear", "Linear-model demonstration of CI dependence across x");
    demo_cmd->add_option("--sims", demo_sims, "Number of simulations");
    demo_cmd->add_option("--level", demo_level, "Confidence level (default 0.95)");
    demo_cmd->add_option("--seed", demo_seed, "Seed (default 0)");
    demo_cmd->add_option("--out", demo_out, "Output directory");

    std::string report_in;
    auto* report_cmd =
        app.add_subcommand("report", "Recompute summary files from a run directory's CSVs");
    report_cmd->add_option("--in", report_in, "Run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    run_opt.seed_given = run_cmd->count("--seed") > 0;
    run_opt.sims_given = run_cmd->count("--sims") > 0;
    run_opt.threads_given = run_cmd->count("--threads") > 0;

    try {
        if (list_cmd->parsed()) return cmd_list_presets();
        if (run_cmd->parsed()) return cmd_run(run_opt);
        if (demo_cmd->parsed()) return cmd_demo_linear(demo_sims, demo_level, demo_seed, demo_out);
        if (report_cmd->parsed()) return cmd_report(report_in);
    } catch (const ExperimentFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

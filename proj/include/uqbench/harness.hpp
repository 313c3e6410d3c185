#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "uqbench/dataset.hpp"
#include "uqbench/dgp.hpp"
#include "uqbench/metrics.hpp"
#include "uqbench/uq.hpp"

namespace uqbench {

struct ColumnStats {
    double mean = 0.0;
    double sd = 1.0;
    bool constant = false;
};

// Affine per-column standardization with statistics taken from training
// data only. Constant columns pass through unchanged and are flagged.
class StandardizeTransform {
  public:
    static StandardizeTransform fit(const Dataset& train) {
        train.validate();
        if (train.size() == 0) throw std::invalid_argument("StandardizeTransform: empty data");
        StandardizeTransform t;
        t.x_.resize(train.X.cols());
        for (std::size_t c = 0; c < train.X.cols(); ++c) {
            std::vector<double> col(train.size());
            for (std::size_t r = 0; r < train.size(); ++r) col[r] = train.X(r, c);
            t.x_[c] = column_stats(col);
        }
        t.y_ = column_stats(train.y);
        return t;
    }

    const std::vector<ColumnStats>& x_stats() const { return x_; }
    const ColumnStats& y_stats() const { return y_; }

    Matrix apply_x(const Matrix& X) const {
        if (X.cols() != x_.size())
            throw std::invalid_argument("StandardizeTransform: expected " +
                                        std::to_string(x_.size()) + " columns");
        Matrix out = X;
        for (std::size_t c = 0; c < x_.size(); ++c) {
            if (x_[c].constant) continue;
            for (std::size_t r = 0; r < out.rows(); ++r)
                out(r, c) = (out(r, c) - x_[c].mean) / x_[c].sd;
        }
        return out;
    }

    std::vector<double> apply_y(std::span<const double> y) const {
        std::vector<double> out(y.begin(), y.end());
        if (y_.constant) return out;
        for (auto& v : out) v = (v - y_.mean) / y_.sd;
        return out;
    }

    Dataset apply(const Dataset& d) const {
        return Dataset{apply_x(d.X), apply_y(d.y), d.feature_names};
    }

    double invert_y(double v) const { return y_.constant ? v : v * y_.sd + y_.mean; }
    double y_scale() const { return y_.constant ? 1.0 : y_.sd; }

    Matrix invert_x(const Matrix& X) const {
        Matrix out = X;
        for (std::size_t c = 0; c < x_.size(); ++c) {
            if (x_[c].constant) continue;
            for (std::size_t r = 0; r < out.rows(); ++r)
                out(r, c) = out(r, c) * x_[c].sd + x_[c].mean;
        }
        return out;
    }

    Dataset invert(const Dataset& d) const {
        Dataset out{invert_x(d.X), d.y, d.feature_names};
        for (auto& v : out.y) v = invert_y(v);
        return out;
    }

  private:
    static ColumnStats column_stats(std::span<const double> col) {
        ColumnStats s;
        double sum = 0.0;
        for (double v : col) sum += v;
        s.mean = sum / static_cast<double>(col.size());
        double ss = 0.0;
        for (double v : col) {
            const double d = v - s.mean;
            ss += d * d;
        }
        const double var = ss / static_cast<double>(col.size());
        if (var == 0.0) {
            s = ColumnStats{0.0, 1.0, true};
        } else {
            s.sd = std::sqrt(var);
        }
        return s;
    }

    std::vector<ColumnStats> x_;
    ColumnStats y_;
};

struct ExperimentConfig {
    DataGeneratingProcess dgp;
    std::size_t n_train = 1000;
    std::size_t n_test = 1000;
    std::size_t n_val = 150;
    std::size_t n_simulations = 100;
    std::vector<double> levels{0.9, 0.8};
    std::size_t bootstrap_M = 50;
    std::size_t dropout_B = 100;
    std::vector<double> tau_grid{1.0, 5.0, 10.0, 25.0, 50.0, 100.0};
    std::vector<double> p_grid{0.05, 0.1, 0.2, 0.3, 0.5};
    MlpConfig net_config{.hidden_sizes = {40, 30, 20}, .epochs = 40, .learning_rate = 0.01};
    std::uint64_t master_seed = 0;
    std::size_t n_threads = 1;  // 0 = hardware concurrency
    bool empirical_picf = false;
    // Fixed designs for dataset-backed DGPs; when empty, covariates come
    // from the DGP (test design is an even grid for 1-feature DGPs).
    Matrix fixed_X_train;
    Matrix fixed_X_test;
    Matrix fixed_X_val;

    void validate() const {
        if (n_simulations == 0) throw std::invalid_argument("ExperimentConfig: n_simulations >= 1");
        if (n_train == 0 || n_test == 0 || n_val == 0)
            throw std::invalid_argument("ExperimentConfig: all split sizes must be positive");
        if (levels.empty()) throw std::invalid_argument("ExperimentConfig: no levels");
        for (double l : levels)
            if (!(l > 0.0 && l < 1.0))
                throw std::invalid_argument("ExperimentConfig: level " + std::to_string(l) +
                                            " outside (0,1)");
        if (bootstrap_M < 2) throw std::invalid_argument("ExperimentConfig: bootstrap_M >= 2");
        if (dropout_B < 2) throw std::invalid_argument("ExperimentConfig: dropout_B >= 2");
        net_config.validate();
        if (!dgp.true_mean || !dgp.true_sd || !dgp.sample_covariates)
            throw std::invalid_argument("ExperimentConfig: incomplete DGP");
    }
};

struct LevelSimMetrics {
    double level = 0.0;
    double picp = 0.0;
    double cicp = 0.0;
    double avg_pi_width = 0.0;
    double avg_ci_width = 0.0;
};

struct MethodSimRecord {
    std::string method;
    std::vector<LevelSimMetrics> levels;
    std::vector<std::vector<double>> picf_terms;  // [level][test point]
    std::vector<std::vector<double>> cicf_terms;
};

struct SimulationRecord {
    std::size_t sim = 0;
    bool ok = false;
    int attempts = 0;
    std::string error;
    std::vector<MethodSimRecord> methods;
};

struct MethodLevelSummary {
    std::string method;
    double level = 0.0;
    std::vector<double> picp_per_sim;
    std::vector<double> cicp_per_sim;
    std::vector<double> pi_width_per_sim;
    std::vector<double> ci_width_per_sim;
    std::vector<double> picf_per_x;
    std::vector<double> cicf_per_x;
    double picf_brier = 0.0;
    double cicf_brier = 0.0;
    double picp_mean = 0.0;
    double cicp_mean = 0.0;
    double coverage_bias = 0.0;
    double coverage_variance = 0.0;
    double avg_pi_width = 0.0;
    double avg_ci_width = 0.0;
};

struct MetricsReport {
    std::vector<std::string> methods;
    std::vector<double> levels;
    std::vector<MethodLevelSummary> entries;  // method-major, levels in config order
    std::vector<SimulationRecord> simulations;
    GridSearchResult dropout_choice;
    std::size_t n_test = 0;
    std::size_t n_failed = 0;

    const MethodLevelSummary& entry(const std::string& method, double level) const {
        for (const auto& e : entries)
            if (e.method == method && e.level == level) return e;
        throw std::invalid_argument("MetricsReport: no entry for " + method + " at level " +
                                    std::to_string(level));
    }
};

// Raised when more than 10% of simulations fail to train.
struct ExperimentFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline Matrix even_grid(double lo, double hi, std::size_t n) {
    Matrix X(n, 1);
    if (n == 1) {
        X(0, 0) = 0.5 * (lo + hi);
        return X;
    }
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) X(i, 0) = lo + step * static_cast<double>(i);
    return X;
}

struct ExperimentContext {
    const ExperimentConfig& cfg;
    Matrix X_train;
    Matrix X_test;
    Matrix X_val_fixed;  // empty when validation covariates are resampled per simulation
    std::vector<double> f_test;
    std::vector<double> sd_test;
    GridSearchResult dropout_choice;
};

inline void destandardize(IntervalBatch& batch, const StandardizeTransform& tf) {
    for (auto& c : batch.center) c = tf.invert_y(c);
    for (auto& li : batch.levels) {
        for (auto& iv : li.pi) iv = Interval{tf.invert_y(iv.lo), tf.invert_y(iv.hi)};
        for (auto& iv : li.ci) iv = Interval{tf.invert_y(iv.lo), tf.invert_y(iv.hi)};
    }
}

inline MethodSimRecord score_method(const std::string& name, const IntervalBatch& batch,
                                    const ExperimentContext& ctx,
                                    std::span<const double> y_test_obs, bool empirical_picf) {
    MethodSimRecord rec;
    rec.method = name;
    for (const auto& li : batch.levels) {
        LevelSimMetrics m;
        m.level = li.level;
        m.picp = picp(li.pi, y_test_obs);
        m.cicp = cicp(li.ci, ctx.f_test);
        m.avg_pi_width = avg_width(li.pi);
        m.avg_ci_width = avg_width(li.ci);
        rec.levels.push_back(m);

        std::vector<double> picf_terms(batch.n_points());
        std::vector<double> cicf_terms(batch.n_points());
        for (std::size_t i = 0; i < batch.n_points(); ++i) {
            if (empirical_picf) {
                picf_terms[i] = li.pi[i].covers(y_test_obs[i]) ? 1.0 : 0.0;
            } else if (ctx.sd_test[i] > 0.0) {
                picf_terms[i] = picf_analytic_term(li.pi[i], ctx.f_test[i], ctx.sd_test[i]);
            } else {
                picf_terms[i] = li.pi[i].covers(ctx.f_test[i]) ? 1.0 : 0.0;
            }
            cicf_terms[i] = li.ci[i].covers(ctx.f_test[i]) ? 1.0 : 0.0;
        }
        rec.picf_terms.push_back(std::move(picf_terms));
        rec.cicf_terms.push_back(std::move(cicf_terms));
    }
    return rec;
}

// One full simulation: fresh targets on the fixed designs, per-simulation
// standardization, both fits, intervals mapped back to data units.
inline std::vector<MethodSimRecord> run_one_simulation(const ExperimentContext& ctx,
                                                       RngStream stream) {
    const ExperimentConfig& cfg = ctx.cfg;
    RngStream y_train_rng = stream.derive(1);
    RngStream val_rng = stream.derive(2);
    RngStream y_val_rng = stream.derive(3);
    RngStream y_test_rng = stream.derive(4);
    RngStream boot_rng = stream.derive(5);
    RngStream drop_rng = stream.derive(6);

    Dataset train{ctx.X_train, generate_targets(cfg.dgp, ctx.X_train, y_train_rng), {}};
    Matrix X_val = ctx.X_val_fixed.empty() ? cfg.dgp.sample_covariates(val_rng, cfg.n_val)
                                           : ctx.X_val_fixed;
    Dataset val{std::move(X_val), {}, {}};
    val.y = generate_targets(cfg.dgp, val.X, y_val_rng);
    const std::vector<double> y_test_obs = generate_targets(cfg.dgp, ctx.X_test, y_test_rng);

    const StandardizeTransform tf = StandardizeTransform::fit(train);
    const Dataset train_std = tf.apply(train);
    const Dataset val_std = tf.apply(val);
    const Matrix X_test_std = tf.apply_x(ctx.X_test);

    const BootstrapEnsemble boot =
        fit_bootstrap(train_std, val_std, cfg.bootstrap_M, cfg.net_config, boot_rng);
    IntervalBatch boot_batch = intervals_bootstrap(boot, X_test_std, cfg.levels);
    destandardize(boot_batch, tf);

    const DropoutModel drop = fit_dropout(train_std, ctx.dropout_choice.p, ctx.dropout_choice.tau,
                                          cfg.dropout_B, cfg.net_config, drop_rng);
    IntervalBatch drop_batch = intervals_dropout(drop, X_test_std, cfg.levels);
    destandardize(drop_batch, tf);

    std::vector<MethodSimRecord> out;
    out.push_back(score_method("bootstrap", boot_batch, ctx, y_test_obs, cfg.empirical_picf));
    out.push_back(score_method("dropout", drop_batch, ctx, y_test_obs, cfg.empirical_picf));
    return out;
}

}  // namespace detail

inline MetricsReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const RngStream master(cfg.master_seed, /*stream_id=*/0xe59e7ull);

    detail::ExperimentContext ctx{cfg, {}, {}, {}, {}, {}, {}};
    RngStream design_rng = master.derive(1);
    if (!cfg.fixed_X_train.empty()) {
        ctx.X_train = cfg.fixed_X_train;
    } else {
        RngStream r = design_rng.derive(1);
        ctx.X_train = cfg.dgp.sample_covariates(r, cfg.n_train);
    }
    if (!cfg.fixed_X_test.empty()) {
        ctx.X_test = cfg.fixed_X_test;
    } else if (cfg.dgp.n_features == 1) {
        ctx.X_test = detail::even_grid(-0.5, 0.5, cfg.n_test);
    } else {
        RngStream r = design_rng.derive(2);
        ctx.X_test = cfg.dgp.sample_covariates(r, cfg.n_test);
    }
    ctx.X_val_fixed = cfg.fixed_X_val;
    if (ctx.X_train.rows() != cfg.n_train || ctx.X_test.rows() != cfg.n_test)
        throw std::invalid_argument("run_experiment: fixed designs disagree with configured sizes");
    if (!ctx.X_val_fixed.empty() && ctx.X_val_fixed.rows() != cfg.n_val)
        throw std::invalid_argument("run_experiment: fixed validation design disagrees with n_val");

    ctx.f_test.resize(cfg.n_test);
    ctx.sd_test.resize(cfg.n_test);
    for (std::size_t i = 0; i < cfg.n_test; ++i) {
        ctx.f_test[i] = cfg.dgp.mean_at(ctx.X_test.row(i));
        ctx.sd_test[i] = cfg.dgp.sd_at(ctx.X_test.row(i));
    }

    // One grid search per experiment on a dedicated tuning draw; every
    // simulation then refits dropout on its own data with this pair.
    {
        RngStream tune_rng = master.derive(2);
        RngStream tune_y = tune_rng.derive(1);
        Dataset tune_train{ctx.X_train, generate_targets(cfg.dgp, ctx.X_train, tune_y), {}};
        const StandardizeTransform tf = StandardizeTransform::fit(tune_train);
        RngStream search_rng = tune_rng.derive(2);
        try {
            ctx.dropout_choice = grid_search_dropout(tf.apply(tune_train), cfg.tau_grid, cfg.p_grid,
                                                     cfg.net_config, cfg.dropout_B, search_rng);
        } catch (const std::runtime_error& e) {
            throw ExperimentFailure("run_experiment: dropout tuning failed: " +
                                    std::string(e.what()));
        }
    }

    std::vector<SimulationRecord> sims(cfg.n_simulations);
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> failed{0};
    const auto fail_threshold_exceeded = [&] { return failed.load() * 10 > cfg.n_simulations; };

    auto worker = [&] {
        for (;;) {
            const std::size_t j = next.fetch_add(1);
            if (j >= cfg.n_simulations || fail_threshold_exceeded()) return;
            SimulationRecord rec;
            rec.sim = j;
            for (int attempt = 1; attempt <= 2 && !rec.ok; ++attempt) {
                rec.attempts = attempt;
                try {
                    RngStream stream = master.derive(1000 + j).derive(attempt);
                    rec.methods = detail::run_one_simulation(ctx, stream);
                    rec.ok = true;
                    rec.error.clear();
                } catch (const std::exception& e) {
                    rec.error = e.what();
                }
            }
            if (!rec.ok) failed.fetch_add(1);
            sims[j] = std::move(rec);
        }
    };

    std::size_t n_threads = cfg.n_threads == 0
                                ? std::max<std::size_t>(1, std::thread::hardware_concurrency())
                                : cfg.n_threads;
    n_threads = std::min(n_threads, cfg.n_simulations);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    MetricsReport report;
    report.methods = {"bootstrap", "dropout"};
    report.levels = cfg.levels;
    report.dropout_choice = ctx.dropout_choice;
    report.n_test = cfg.n_test;
    report.n_failed = failed.load();
    if (fail_threshold_exceeded()) {
        std::string first_error = "unknown";
        for (const auto& s : sims)
            if (!s.ok && !s.error.empty()) {
                first_error = s.error;
                break;
            }
        throw ExperimentFailure("run_experiment: " + std::to_string(report.n_failed) + " of " +
                                std::to_string(cfg.n_simulations) +
                                " simulations failed (first: " + first_error + ")");
    }

    for (std::size_t mi = 0; mi < report.methods.size(); ++mi) {
        for (std::size_t li = 0; li < cfg.levels.size(); ++li) {
            MethodLevelSummary s;
            s.method = report.methods[mi];
            s.level = cfg.levels[li];
            CoverageAccumulator picf_acc(cfg.n_test);
            CoverageAccumulator cicf_acc(cfg.n_test);
            for (const auto& rec : sims) {
                if (!rec.ok) continue;
                const auto& m = rec.methods[mi];
                s.picp_per_sim.push_back(m.levels[li].picp);
                s.cicp_per_sim.push_back(m.levels[li].cicp);
                s.pi_width_per_sim.push_back(m.levels[li].avg_pi_width);
                s.ci_width_per_sim.push_back(m.levels[li].avg_ci_width);
                picf_acc.add(m.picf_terms[li]);
                cicf_acc.add(m.cicf_terms[li]);
            }
            if (s.picp_per_sim.empty())
                throw ExperimentFailure("run_experiment: no successful simulations");
            s.picf_per_x = finalize_picf(picf_acc);
            s.cicf_per_x = finalize_cicf(cicf_acc);
            s.picf_brier = brier(s.picf_per_x, s.level);
            s.cicf_brier = brier(s.cicf_per_x, s.level);
            const BiasVariance bv = bias_variance(s.picf_per_x, s.level);
            s.coverage_bias = bv.bias;
            s.coverage_variance = bv.variance;
            const auto mean_of = [](const std::vector<double>& v) {
                double t = 0.0;
                for (double x : v) t += x;
                return t / static_cast<double>(v.size());
            };
            s.picp_mean = mean_of(s.picp_per_sim);
            s.cicp_mean = mean_of(s.cicp_per_sim);
            s.avg_pi_width = mean_of(s.pi_width_per_sim);
            s.avg_ci_width = mean_of(s.ci_width_per_sim);
            report.entries.push_back(std::move(s));
        }
    }
    report.simulations = std::move(sims);
    return report;
}

// Ordinary least squares through the origin on y = a x + noise with known
// noise sd: the slope CI is exact, so the per-x CIs for f(x) = a x either
// all cover or all miss, making each simulation's CICP exactly 0 or 1.
inline std::vector<double> linear_dependence_demo(std::size_t n_simulations, double level,
                                                  RngStream& rng) {
    if (n_simulations == 0) throw std::invalid_argument("linear_dependence_demo: n_simulations >= 1");
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("linear_dependence_demo: level outside (0,1)");
    constexpr double slope = 2.0;
    constexpr double noise_sd = 1.0;
    constexpr std::size_t n_points = 50;
    const Matrix X = detail::even_grid(0.1, 1.0, n_points);
    double sxx = 0.0;
    for (std::size_t i = 0; i < n_points; ++i) sxx += X(i, 0) * X(i, 0);
    const double q = normal_quantile(0.5 * (1.0 + level));
    const double slope_half = q * noise_sd / std::sqrt(sxx);

    std::vector<double> cicp_values(n_simulations);
    for (std::size_t j = 0; j < n_simulations; ++j) {
        RngStream sim_rng = rng.derive(j + 1);
        double sxy = 0.0;
        for (std::size_t i = 0; i < n_points; ++i) {
            const double x = X(i, 0);
            sxy += x * (slope * x + noise_sd * sim_rng.normal());
        }
        const double a_hat = sxy / sxx;
        std::vector<Interval> cis(n_points);
        std::vector<double> f_true(n_points);
        for (std::size_t i = 0; i < n_points; ++i) {
            const double x = X(i, 0);
            const double lo = (a_hat - slope_half) * x;
            const double hi = (a_hat + slope_half) * x;
            cis[i] = Interval{std::min(lo, hi), std::max(lo, hi)};
            f_true[i] = slope * x;
        }
        cicp_values[j] = cicp(cis, f_true);
    }
    return cicp_values;
}

}  // namespace uqbench

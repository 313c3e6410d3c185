#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "uqbench/dataset.hpp"
#include "uqbench/distributions.hpp"
#include "uqbench/metrics.hpp"
#include "uqbench/mlp.hpp"
#include "uqbench/rng.hpp"

namespace uqbench {

struct PredictiveStats {
    std::vector<double> mean;
    std::vector<double> epistemic_sd;
};

// Common surface of both estimators: a point prediction, an epistemic sd
// per x, a homoscedastic aleatoric sd, and the method's interval quantile.
// Predictive variance is the sum of the two variances.
class UQModel {
  public:
    virtual ~UQModel() = default;
    virtual std::string method_name() const = 0;
    virtual PredictiveStats predictive_stats(const Matrix& X) const = 0;
    virtual double aleatoric_variance() const = 0;
    virtual double interval_quantile(double level) const = 0;

    double aleatoric_sd() const { return std::sqrt(aleatoric_variance()); }
};

inline IntervalBatch build_intervals(const UQModel& model, const Matrix& X,
                                     std::span<const double> levels) {
    if (levels.empty()) throw std::invalid_argument("build_intervals: no levels requested");
    for (double l : levels)
        if (!(l > 0.0 && l < 1.0))
            throw std::invalid_argument("build_intervals: level " + std::to_string(l) +
                                        " outside (0,1)");
    const PredictiveStats stats = model.predictive_stats(X);
    const double ale_var = model.aleatoric_variance();

    IntervalBatch batch;
    batch.center = stats.mean;
    batch.levels.reserve(levels.size());
    for (double level : levels) {
        const double q = model.interval_quantile(level);
        LevelIntervals li;
        li.level = level;
        li.pi.resize(stats.mean.size());
        li.ci.resize(stats.mean.size());
        for (std::size_t i = 0; i < stats.mean.size(); ++i) {
            const double c = stats.mean[i];
            const double epi = stats.epistemic_sd[i];
            const double ci_half = q * epi;
            const double pi_half = q * std::sqrt(epi * epi + ale_var);
            li.ci[i] = Interval{c - ci_half, c + ci_half};
            li.pi[i] = Interval{c - pi_half, c + pi_half};
        }
        batch.levels.push_back(std::move(li));
    }
    return batch;
}

namespace detail {

// Columnwise mean and (n-1)-denominator sd of an ensemble-by-points table.
inline PredictiveStats spread_stats(const std::vector<std::vector<double>>& rows) {
    const std::size_t m = rows.size();
    const std::size_t n = rows.front().size();
    PredictiveStats s;
    s.mean.assign(n, 0.0);
    s.epistemic_sd.assign(n, 0.0);
    for (const auto& r : rows)
        for (std::size_t i = 0; i < n; ++i) s.mean[i] += r[i];
    for (std::size_t i = 0; i < n; ++i) s.mean[i] /= static_cast<double>(m);
    for (const auto& r : rows)
        for (std::size_t i = 0; i < n; ++i) {
            const double d = r[i] - s.mean[i];
            s.epistemic_sd[i] += d * d;
        }
    for (std::size_t i = 0; i < n; ++i)
        s.epistemic_sd[i] = std::sqrt(s.epistemic_sd[i] / static_cast<double>(m - 1));
    return s;
}

}  // namespace detail

// Ensemble of M networks trained on pairwise bootstrap resamples. The
// spread of member predictions estimates epistemic uncertainty; the
// aleatoric variance comes from clamped validation residuals. Quantiles
// are Student t with M degrees of freedom.
class BootstrapEnsemble : public UQModel {
  public:
    BootstrapEnsemble(std::vector<Mlp> members, double aleatoric_var)
        : members_(std::move(members)), aleatoric_var_(aleatoric_var) {}

    std::string method_name() const override { return "bootstrap"; }
    std::size_t M() const { return members_.size(); }
    const std::vector<Mlp>& members() const { return members_; }

    PredictiveStats predictive_stats(const Matrix& X) const override {
        std::vector<std::vector<double>> preds;
        preds.reserve(members_.size());
        for (const auto& m : members_) preds.push_back(m.predict(X));
        return detail::spread_stats(preds);
    }

    double aleatoric_variance() const override { return aleatoric_var_; }

    double interval_quantile(double level) const override {
        return student_t_quantile(static_cast<std::int64_t>(members_.size()), 0.5 * (1.0 + level));
    }

  private:
    std::vector<Mlp> members_;
    double aleatoric_var_ = 0.0;
};

// Mean over validation points of max(residual^2 - ensemble variance, 0),
// with the clamp applied per point before averaging.
inline double clamped_aleatoric_variance(const PredictiveStats& val_stats,
                                         std::span<const double> y_val) {
    if (y_val.size() != val_stats.mean.size())
        throw std::invalid_argument("clamped_aleatoric_variance: length mismatch");
    if (y_val.empty()) throw std::invalid_argument("clamped_aleatoric_variance: empty validation set");
    double total = 0.0;
    for (std::size_t j = 0; j < y_val.size(); ++j) {
        const double r = y_val[j] - val_stats.mean[j];
        const double epi_var = val_stats.epistemic_sd[j] * val_stats.epistemic_sd[j];
        const double term = r * r - epi_var;
        total += term > 0.0 ? term : 0.0;
    }
    return total / static_cast<double>(y_val.size());
}

// All members start from one shared weight draw: the pairwise resample (and
// the SGD pass over it) is the only thing that separates them, so the
// ensemble spread measures sensitivity to the data alone.
inline BootstrapEnsemble fit_bootstrap(const Dataset& train, const Dataset& val, std::size_t M,
                                       const MlpConfig& net_config, RngStream& rng) {
    if (M < 2) throw std::invalid_argument("fit_bootstrap: M must be >= 2");
    train.validate();
    val.validate();
    if (val.size() == 0) throw std::invalid_argument("fit_bootstrap: empty validation set");

    const RngStream init_base = rng.derive(0);
    std::vector<Mlp> members;
    members.reserve(M);
    std::vector<std::size_t> sample(train.size());
    std::vector<double> yb(train.size());
    for (std::size_t i = 0; i < M; ++i) {
        RngStream member_rng = rng.derive(i + 1);
        for (auto& s : sample) s = member_rng.below(train.size());
        const Matrix Xb = train.X.take_rows(sample);
        for (std::size_t k = 0; k < sample.size(); ++k) yb[k] = train.y[sample[k]];
        try {
            RngStream init_rng = init_base;
            members.push_back(fit_mlp(Xb, yb, net_config, init_rng, member_rng));
        } catch (const std::exception& e) {
            throw std::runtime_error("fit_bootstrap: member " + std::to_string(i) + ": " + e.what());
        }
    }

    std::vector<std::vector<double>> val_preds;
    val_preds.reserve(M);
    for (const auto& m : members) val_preds.push_back(m.predict(val.X));
    const PredictiveStats val_stats = detail::spread_stats(val_preds);
    const double ale_var = clamped_aleatoric_variance(val_stats, val.y);
    return BootstrapEnsemble(std::move(members), ale_var);
}

inline IntervalBatch intervals_bootstrap(const BootstrapEnsemble& model, const Matrix& X,
                                         std::span<const double> levels) {
    return build_intervals(model, X, levels);
}

// One dropout-trained network; epistemic spread comes from B stochastic
// forward passes, aleatoric variance is 1/tau, quantiles are normal.
class DropoutModel : public UQModel {
  public:
    DropoutModel(Mlp net, std::size_t B, double tau, RngStream prediction_base)
        : net_(std::move(net)), B_(B), tau_(tau), prediction_base_(prediction_base) {}

    std::string method_name() const override { return "dropout"; }
    std::size_t B() const { return B_; }
    double tau() const { return tau_; }
    double dropout_rate() const { return net_.config().dropout_rate; }
    const Mlp& net() const { return net_; }

    // Pass b always draws its masks from the same derived stream, so
    // repeated calls on the same X are identical.
    PredictiveStats predictive_stats(const Matrix& X) const override {
        std::vector<std::vector<double>> preds;
        preds.reserve(B_);
        for (std::size_t b = 0; b < B_; ++b) {
            RngStream pass_rng = prediction_base_.derive(b + 1);
            preds.push_back(net_.predict(X, /*dropout_active=*/true, pass_rng));
        }
        return detail::spread_stats(preds);
    }

    double aleatoric_variance() const override { return 1.0 / tau_; }

    double interval_quantile(double level) const override {
        return normal_quantile(0.5 * (1.0 + level));
    }

  private:
    Mlp net_;
    std::size_t B_ = 0;
    double tau_ = 1.0;
    RngStream prediction_base_;
};

inline DropoutModel fit_dropout(const Dataset& train, double p, double tau, std::size_t B,
                                MlpConfig net_config, RngStream& rng) {
    if (B < 2) throw std::invalid_argument("fit_dropout: B must be >= 2");
    if (!(tau > 0.0)) throw std::invalid_argument("fit_dropout: tau must be positive");
    train.validate();
    net_config.dropout_rate = p;
    RngStream fit_rng = rng.derive(1);
    Mlp net = fit_mlp(train.X, train.y, net_config, fit_rng);
    return DropoutModel(std::move(net), B, tau, rng.derive(2));
}

inline IntervalBatch intervals_dropout(const DropoutModel& model, const Matrix& X,
                                       std::span<const double> levels) {
    return build_intervals(model, X, levels);
}

struct GridSearchResult {
    double tau = 0.0;
    double p = 0.0;
    double achieved_picp = 0.0;
};

// Fits one network per candidate p on 80% of the training data and scores
// the 68% PI coverage of every (tau, p) cell on the held-out 20%. Ties go
// to smaller p, then larger tau (narrower intervals). The caller refits on
// the full training set with the winning pair.
inline GridSearchResult grid_search_dropout(const Dataset& train, std::span<const double> tau_grid,
                                            std::span<const double> p_grid,
                                            const MlpConfig& net_config, std::size_t B,
                                            RngStream& rng, double target_level = 0.68) {
    if (tau_grid.empty() || p_grid.empty())
        throw std::invalid_argument("grid_search_dropout: empty grid");
    train.validate();
    if (train.size() < 5)
        throw std::invalid_argument("grid_search_dropout: need at least 5 training points");
    for (double tau : tau_grid)
        if (!(tau > 0.0)) throw std::invalid_argument("grid_search_dropout: tau grid must be positive");

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream split_rng = rng.derive(1);
    split_rng.shuffle(order);
    const std::size_t n_fit = (train.size() * 4) / 5;
    const std::vector<std::size_t> fit_rows(order.begin(), order.begin() + n_fit);
    const std::vector<std::size_t> eval_rows(order.begin() + n_fit, order.end());

    Dataset fit_part{train.X.take_rows(fit_rows), {}, train.feature_names};
    Dataset eval_part{train.X.take_rows(eval_rows), {}, train.feature_names};
    for (auto i : fit_rows) fit_part.y.push_back(train.y[i]);
    for (auto i : eval_rows) eval_part.y.push_back(train.y[i]);

    const double z = normal_quantile(0.5 * (1.0 + target_level));
    GridSearchResult best;
    double best_dist = -1.0;
    std::size_t trained = 0;
    std::string last_error;
    for (std::size_t pi_idx = 0; pi_idx < p_grid.size(); ++pi_idx) {
        const double p = p_grid[pi_idx];
        MlpConfig cfg = net_config;
        cfg.dropout_rate = p;
        RngStream cell_rng = rng.derive(100 + pi_idx);
        PredictiveStats stats;
        try {
            const Mlp net = fit_mlp(fit_part.X, fit_part.y, cfg, cell_rng);
            RngStream pass_base = cell_rng.derive(2);
            std::vector<std::vector<double>> preds;
            preds.reserve(B);
            for (std::size_t b = 0; b < B; ++b) {
                RngStream pass_rng = pass_base.derive(b + 1);
                preds.push_back(net.predict(eval_part.X, /*dropout_active=*/true, pass_rng));
            }
            stats = detail::spread_stats(preds);
        } catch (const std::exception& e) {
            last_error = e.what();
            continue;
        }
        ++trained;
        for (double tau : tau_grid) {
            std::vector<Interval> pis(eval_part.size());
            for (std::size_t i = 0; i < eval_part.size(); ++i) {
                const double half = z * std::sqrt(stats.epistemic_sd[i] * stats.epistemic_sd[i] +
                                                  1.0 / tau);
                pis[i] = Interval{stats.mean[i] - half, stats.mean[i] + half};
            }
            const double cell_picp = picp(pis, eval_part.y);
            const double dist = std::abs(cell_picp - target_level);
            const bool better =
                best_dist < 0.0 || dist < best_dist ||
                (dist == best_dist && p == best.p && tau > best.tau);
            if (better) {
                best = GridSearchResult{tau, p, cell_picp};
                best_dist = dist;
            }
        }
    }
    if (trained == 0)
        throw std::runtime_error("grid_search_dropout: every grid cell failed to train (last: " +
                                 last_error + ")");
    return best;
}

}  // namespace uqbench

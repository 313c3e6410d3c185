#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "uqbench/distributions.hpp"

namespace uqbench {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double width() const { return hi - lo; }
    bool covers(double v) const { return lo <= v && v <= hi; }  // closed on both sides
};

struct LevelIntervals {
    double level = 0.0;  // confidence level 1 - alpha
    std::vector<Interval> pi;
    std::vector<Interval> ci;
};

// Prediction and confidence intervals on one test design, one entry per
// requested level, all centered at the same point estimates.
struct IntervalBatch {
    std::vector<double> center;  // f-hat per test point
    std::vector<LevelIntervals> levels;

    std::size_t n_points() const { return center.size(); }

    const LevelIntervals& at(double level) const {
        for (const auto& l : levels)
            if (l.level == level) return l;
        throw std::invalid_argument("IntervalBatch: no intervals at level " + std::to_string(level));
    }
};

inline double coverage_fraction(std::span<const Interval> intervals, std::span<const double> values) {
    if (intervals.size() != values.size())
        throw std::invalid_argument("coverage_fraction: " + std::to_string(intervals.size()) +
                                    " intervals vs " + std::to_string(values.size()) + " values");
    if (intervals.empty()) throw std::invalid_argument("coverage_fraction: empty input");
    std::size_t covered = 0;
    for (std::size_t i = 0; i < intervals.size(); ++i)
        if (intervals[i].covers(values[i])) ++covered;
    return static_cast<double>(covered) / static_cast<double>(intervals.size());
}

// Fraction of test observations inside their prediction intervals.
inline double picp(std::span<const Interval> pi, std::span<const double> observations) {
    return coverage_fraction(pi, observations);
}

// Fraction of true function values inside their confidence intervals.
inline double cicp(std::span<const Interval> ci, std::span<const double> true_f_values) {
    return coverage_fraction(ci, true_f_values);
}

// Exact conditional coverage probability of [lo, hi] under y ~ N(f_x, sigma_x^2).
inline double picf_analytic_term(const Interval& interval, double f_x, double sigma_x) {
    if (!(sigma_x > 0.0))
        throw std::invalid_argument("picf_analytic_term: sigma_x must be positive, got " +
                                    std::to_string(sigma_x));
    const double hi = standard_normal_cdf((interval.hi - f_x) / sigma_x);
    const double lo = standard_normal_cdf((interval.lo - f_x) / sigma_x);
    const double p = hi - lo;
    return p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p);
}

// Per-x running sums of coverage terms across simulations. Terms are
// probabilities (analytic mode) or indicators; either way each lies in [0,1].
class CoverageAccumulator {
  public:
    CoverageAccumulator() = default;
    explicit CoverageAccumulator(std::size_t n_points) : sums_(n_points, 0.0) {}

    std::size_t n_points() const { return sums_.size(); }
    std::size_t n_simulations() const { return n_sims_; }

    void add(std::span<const double> terms) {
        if (terms.size() != sums_.size())
            throw std::invalid_argument("CoverageAccumulator: expected " +
                                        std::to_string(sums_.size()) + " terms, got " +
                                        std::to_string(terms.size()));
        for (std::size_t i = 0; i < terms.size(); ++i) {
            if (!(terms[i] >= 0.0 && terms[i] <= 1.0))
                throw std::invalid_argument("CoverageAccumulator: term " + std::to_string(i) +
                                            " = " + std::to_string(terms[i]) + " outside [0,1]");
            sums_[i] += terms[i];
        }
        ++n_sims_;
    }

    void merge(const CoverageAccumulator& other) {
        if (other.sums_.size() != sums_.size())
            throw std::invalid_argument("CoverageAccumulator: merging mismatched sizes");
        for (std::size_t i = 0; i < sums_.size(); ++i) sums_[i] += other.sums_[i];
        n_sims_ += other.n_sims_;
    }

    std::vector<double> finalize() const {
        if (n_sims_ == 0) throw std::logic_error("CoverageAccumulator: no simulations accumulated");
        std::vector<double> out(sums_.size());
        for (std::size_t i = 0; i < sums_.size(); ++i)
            out[i] = sums_[i] / static_cast<double>(n_sims_);
        return out;
    }

  private:
    std::vector<double> sums_;
    std::size_t n_sims_ = 0;
};

inline std::vector<double> finalize_picf(const CoverageAccumulator& acc) { return acc.finalize(); }
inline std::vector<double> finalize_cicf(const CoverageAccumulator& acc) { return acc.finalize(); }

// Mean squared deviation of per-x coverage fractions from the nominal level.
inline double brier(std::span<const double> per_x_fractions, double level) {
    if (per_x_fractions.empty()) throw std::invalid_argument("brier: empty input");
    double total = 0.0;
    for (double f : per_x_fractions) {
        const double d = f - level;
        total += d * d;
    }
    return total / static_cast<double>(per_x_fractions.size());
}

struct BiasVariance {
    double bias = 0.0;
    double variance = 0.0;  // population variance, so brier = bias^2 + variance
};

inline BiasVariance bias_variance(std::span<const double> per_x_fractions, double level) {
    if (per_x_fractions.empty()) throw std::invalid_argument("bias_variance: empty input");
    const double n = static_cast<double>(per_x_fractions.size());
    double mean = 0.0;
    for (double f : per_x_fractions) mean += f;
    mean /= n;
    double var = 0.0;
    for (double f : per_x_fractions) {
        const double d = f - mean;
        var += d * d;
    }
    return BiasVariance{mean - level, var / n};
}

inline double avg_width(std::span<const Interval> intervals) {
    if (intervals.empty()) throw std::invalid_argument("avg_width: empty input");
    double total = 0.0;
    for (const auto& iv : intervals) total += iv.width();
    return total / static_cast<double>(intervals.size());
}

// Mean per-point Gaussian log-density. Reported for completeness; coverage
// metrics are the primary evaluation surface.
inline double gaussian_loglik(std::span<const double> observations, std::span<const double> means,
                              std::span<const double> sds) {
    if (observations.size() != means.size() || observations.size() != sds.size())
        throw std::invalid_argument("gaussian_loglik: length mismatch");
    if (observations.empty()) throw std::invalid_argument("gaussian_loglik: empty input");
    constexpr double half_log_two_pi = 0.918938533204672742;
    double total = 0.0;
    for (std::size_t i = 0; i < observations.size(); ++i) {
        if (!(sds[i] > 0.0))
            throw std::invalid_argument("gaussian_loglik: sd at index " + std::to_string(i) +
                                        " must be positive");
        const double z = (observations[i] - means[i]) / sds[i];
        total += -half_log_two_pi - std::log(sds[i]) - 0.5 * z * z;
    }
    return total / static_cast<double>(observations.size());
}

}  // namespace uqbench

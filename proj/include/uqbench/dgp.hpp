#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>

#include "uqbench/dataset.hpp"
#include "uqbench/forest.hpp"
#include "uqbench/matrix.hpp"
#include "uqbench/rng.hpp"

namespace uqbench {

// Known ground truth: y | x ~ N(f(x), sigma(x)^2).
struct DataGeneratingProcess {
    std::string name;
    std::size_t n_features = 1;
    std::function<double(std::span<const double>)> true_mean;
    std::function<double(std::span<const double>)> true_sd;
    std::function<Matrix(RngStream&, std::size_t)> sample_covariates;

    double mean_at(std::span<const double> x) const { return true_mean(x); }
    double sd_at(std::span<const double> x) const {
        const double s = true_sd(x);
        if (!(s >= 0.0)) throw std::logic_error("DataGeneratingProcess: negative sd from " + name);
        return s;
    }
};

namespace detail {

inline double cubic_mean(std::span<const double> x) {
    const double u = 2.0 * x[0] - 1.0;
    return u * u * u;
}

inline Matrix uniform_covariates(RngStream& rng, std::size_t n) {
    Matrix X(n, 1);
    for (std::size_t i = 0; i < n; ++i) X(i, 0) = rng.uniform(-0.5, 0.5);
    return X;
}

}  // namespace detail

inline DataGeneratingProcess toy_cubic() {
    DataGeneratingProcess dgp;
    dgp.name = "toy-homo";
    dgp.n_features = 1;
    dgp.true_mean = detail::cubic_mean;
    dgp.true_sd = [](std::span<const double>) { return 0.2; };
    dgp.sample_covariates = detail::uniform_covariates;
    return dgp;
}

inline DataGeneratingProcess toy_heteroscedastic() {
    DataGeneratingProcess dgp = toy_cubic();
    dgp.name = "toy-hetero";
    dgp.true_sd = [](std::span<const double> x) { return 0.1 + x[0] * x[0]; };
    return dgp;
}

struct BimodalLaw {
    double center_lo = -0.35;
    double center_hi = 0.30;
    double sd = 0.08;
    double support_lo = -0.5;
    double support_hi = 0.5;
};

// Cubic toy with covariates from an equal mixture of two truncated
// Gaussians, leaving the region between the modes data-sparse.
inline DataGeneratingProcess toy_bimodal(const BimodalLaw& law = {}) {
    DataGeneratingProcess dgp = toy_cubic();
    dgp.name = "toy-bimodal";
    dgp.sample_covariates = [law](RngStream& rng, std::size_t n) {
        Matrix X(n, 1);
        for (std::size_t i = 0; i < n; ++i) {
            const double center = rng.bernoulli(0.5) ? law.center_hi : law.center_lo;
            double v = 0.0;
            do {
                v = center + law.sd * rng.normal();
            } while (v < law.support_lo || v > law.support_hi);
            X(i, 0) = v;
        }
        return X;
    };
    return dgp;
}

struct DistillOptions {
    std::size_t n_trees = 100;
    std::size_t max_depth = 3;
    double variance_floor = 1e-6;
};

// Distills a DGP from a real dataset: a mean forest becomes f, a second
// forest on squared residuals becomes sigma^2 (floored), and covariates
// are the dataset's own rows.
inline DataGeneratingProcess distill_dgp(const Dataset& data, RngStream& rng,
                                         const DistillOptions& opt = {}) {
    data.validate();
    if (data.size() == 0) throw std::invalid_argument("distill_dgp: empty dataset");

    RngStream mean_rng = rng.derive(1);
    RngStream var_rng = rng.derive(2);
    auto mean_forest = std::make_shared<RandomForest>(
        fit_forest(data.X, data.y, opt.n_trees, TreeOptions{opt.max_depth, 0}, mean_rng));

    const std::vector<double> fitted = mean_forest->predict(data.X);
    std::vector<double> sq_residuals(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double r = data.y[i] - fitted[i];
        sq_residuals[i] = r * r;
    }
    auto var_forest = std::make_shared<RandomForest>(
        fit_forest(data.X, sq_residuals, opt.n_trees, TreeOptions{opt.max_depth, 0}, var_rng));

    auto X_source = std::make_shared<Matrix>(data.X);
    const double floor = opt.variance_floor;

    DataGeneratingProcess dgp;
    dgp.name = "distilled";
    dgp.n_features = data.X.cols();
    dgp.true_mean = [mean_forest](std::span<const double> x) { return mean_forest->predict_one(x); };
    dgp.true_sd = [var_forest, floor](std::span<const double> x) {
        return std::sqrt(std::max(var_forest->predict_one(x), floor));
    };
    dgp.sample_covariates = [X_source](RngStream& rng_, std::size_t n) {
        if (n == X_source->rows()) return *X_source;
        std::vector<std::size_t> rows(n);
        for (auto& r : rows) r = rng_.below(X_source->rows());
        return X_source->take_rows(rows);
    };
    return dgp;
}

// y_i = f(x_i) + sigma(x_i) * z_i for the rows of a fixed design.
inline std::vector<double> generate_targets(const DataGeneratingProcess& dgp, const Matrix& X,
                                            RngStream& rng) {
    if (X.cols() != dgp.n_features)
        throw std::invalid_argument("generate_targets: feature count mismatch for " + dgp.name);
    std::vector<double> y(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) {
        const auto row = X.row(i);
        y[i] = dgp.mean_at(row) + dgp.sd_at(row) * rng.normal();
    }
    return y;
}

inline Dataset generate(const DataGeneratingProcess& dgp, std::size_t n, RngStream& rng) {
    if (n == 0) throw std::invalid_argument("generate: n must be >= 1");
    Dataset d;
    d.X = dgp.sample_covariates(rng, n);
    d.y = generate_targets(dgp, d.X, rng);
    d.feature_names.resize(dgp.n_features);
    for (std::size_t c = 0; c < dgp.n_features; ++c) d.feature_names[c] = "x" + std::to_string(c);
    return d;
}

}  // namespace uqbench

#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "uqbench/matrix.hpp"
#include "uqbench/rng.hpp"

namespace uqbench {

struct TreeNode {
    std::int32_t left = -1;  // -1 marks a leaf
    std::int32_t right = -1;
    std::size_t feature = 0;
    double threshold = 0.0;
    double value = 0.0;

    bool is_leaf() const { return left < 0; }
};

struct TreeOptions {
    std::size_t max_depth = 3;
    // 0 considers every feature at every split; a positive count draws that
    // many distinct features per split from the tree's stream.
    std::size_t features_per_split = 0;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;
    std::size_t max_depth = 0;
    std::size_t n_features = 0;

    double predict_one(std::span<const double> x) const {
        std::size_t i = 0;
        while (!nodes[i].is_leaf())
            i = static_cast<std::size_t>(x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left
                                                                                   : nodes[i].right);
        return nodes[i].value;
    }

    std::vector<double> predict(const Matrix& X) const {
        if (X.cols() != n_features)
            throw std::invalid_argument("RegressionTree: input has " + std::to_string(X.cols()) +
                                        " features, trained on " + std::to_string(n_features));
        std::vector<double> out(X.rows());
        for (std::size_t r = 0; r < X.rows(); ++r) out[r] = predict_one(X.row(r));
        return out;
    }
};

namespace detail {

struct TreeBuilder {
    const Matrix& X;
    const std::vector<double>& y;
    TreeOptions opt;
    RngStream& rng;
    std::vector<TreeNode> nodes;
    std::vector<std::pair<double, double>> scan;  // (x, y) sorted per candidate feature
    std::vector<std::size_t> feature_pool;

    std::int32_t build(const std::vector<std::size_t>& idx, std::size_t depth) {
        TreeNode node;
        double sum = 0.0;
        for (auto i : idx) sum += y[i];
        node.value = sum / static_cast<double>(idx.size());

        std::size_t feat = 0;
        double thr = 0.0;
        const bool split_allowed = depth < opt.max_depth && idx.size() >= 2 && !constant_targets(idx);
        if (split_allowed && find_split(idx, feat, thr)) {
            std::vector<std::size_t> left_idx, right_idx;
            for (auto i : idx) (X(i, feat) <= thr ? left_idx : right_idx).push_back(i);
            const auto self = static_cast<std::int32_t>(nodes.size());
            node.feature = feat;
            node.threshold = thr;
            nodes.push_back(node);
            const auto l = build(left_idx, depth + 1);
            const auto r = build(right_idx, depth + 1);
            nodes[static_cast<std::size_t>(self)].left = l;
            nodes[static_cast<std::size_t>(self)].right = r;
            return self;
        }
        nodes.push_back(node);
        return static_cast<std::int32_t>(nodes.size() - 1);
    }

    bool constant_targets(const std::vector<std::size_t>& idx) const {
        const double first = y[idx.front()];
        for (auto i : idx)
            if (y[i] != first) return false;
        return true;
    }

    // Exhaustive scan over candidate features and midpoints between sorted
    // unique values. Equal gains keep the first candidate found, so the
    // lowest feature index and then the lowest threshold win.
    bool find_split(const std::vector<std::size_t>& idx, std::size_t& best_feat, double& best_thr) {
        feature_pool.resize(X.cols());
        std::iota(feature_pool.begin(), feature_pool.end(), std::size_t{0});
        std::size_t n_consider = feature_pool.size();
        if (opt.features_per_split > 0 && opt.features_per_split < n_consider) {
            n_consider = opt.features_per_split;
            for (std::size_t k = 0; k < n_consider; ++k)
                std::swap(feature_pool[k], feature_pool[k + rng.below(feature_pool.size() - k)]);
            std::sort(feature_pool.begin(), feature_pool.begin() + static_cast<long>(n_consider));
        }

        const std::size_t n = idx.size();
        double total1 = 0.0, total2 = 0.0;
        for (auto i : idx) {
            total1 += y[i];
            total2 += y[i] * y[i];
        }
        const double parent_sse = total2 - total1 * total1 / static_cast<double>(n);

        double best_gain = 0.0;
        bool found = false;
        for (std::size_t fi = 0; fi < n_consider; ++fi) {
            const std::size_t f = feature_pool[fi];
            scan.clear();
            for (auto i : idx) scan.emplace_back(X(i, f), y[i]);
            std::sort(scan.begin(), scan.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t k = 1; k < n; ++k) {
                s1 += scan[k - 1].second;
                s2 += scan[k - 1].second * scan[k - 1].second;
                if (scan[k - 1].first == scan[k].first) continue;
                const double nl = static_cast<double>(k), nr = static_cast<double>(n - k);
                const double sse_l = s2 - s1 * s1 / nl;
                const double r1 = total1 - s1, r2 = total2 - s2;
                const double sse_r = r2 - r1 * r1 / nr;
                const double gain = parent_sse - sse_l - sse_r;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feat = f;
                    best_thr = 0.5 * (scan[k - 1].first + scan[k].first);
                    found = true;
                }
            }
        }
        return found;
    }
};

}  // namespace detail

inline RegressionTree fit_tree(const Matrix& X, const std::vector<double>& y, const TreeOptions& opt,
                               RngStream& rng) {
    if (X.rows() == 0) throw std::invalid_argument("fit_tree: empty training set");
    if (y.size() != X.rows()) throw std::invalid_argument("fit_tree: target length mismatch");
    detail::TreeBuilder builder{X, y, opt, rng, {}, {}, {}};
    std::vector<std::size_t> idx(X.rows());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    builder.build(idx, 0);
    RegressionTree tree;
    tree.nodes = std::move(builder.nodes);
    tree.max_depth = opt.max_depth;
    tree.n_features = X.cols();
    return tree;
}

inline RegressionTree fit_tree(const Matrix& X, const std::vector<double>& y, std::size_t max_depth,
                               RngStream& rng) {
    return fit_tree(X, y, TreeOptions{max_depth, 0}, rng);
}

struct RandomForest {
    std::vector<RegressionTree> trees;

    std::size_t n_trees() const { return trees.size(); }

    double predict_one(std::span<const double> x) const {
        double sum = 0.0;
        for (const auto& t : trees) sum += t.predict_one(x);
        return sum / static_cast<double>(trees.size());
    }

    std::vector<double> predict(const Matrix& X) const {
        if (trees.empty()) throw std::logic_error("RandomForest: no trees");
        if (X.cols() != trees.front().n_features)
            throw std::invalid_argument("RandomForest: input has " + std::to_string(X.cols()) +
                                        " features, trained on " +
                                        std::to_string(trees.front().n_features));
        std::vector<double> out(X.rows());
        for (std::size_t r = 0; r < X.rows(); ++r) out[r] = predict_one(X.row(r));
        return out;
    }
};

// Each tree sees a pairwise bootstrap resample drawn from a stream derived
// for that tree, so fitting order cannot change the result.
inline RandomForest fit_forest(const Matrix& X, const std::vector<double>& y, std::size_t n_trees,
                               const TreeOptions& opt, RngStream& rng) {
    if (n_trees == 0) throw std::invalid_argument("fit_forest: n_trees must be >= 1");
    if (X.rows() == 0) throw std::invalid_argument("fit_forest: empty training set");
    if (y.size() != X.rows()) throw std::invalid_argument("fit_forest: target length mismatch");

    RandomForest forest;
    forest.trees.reserve(n_trees);
    std::vector<std::size_t> sample(X.rows());
    std::vector<double> yb(X.rows());
    for (std::size_t t = 0; t < n_trees; ++t) {
        RngStream tree_rng = rng.derive(t + 1);
        for (auto& s : sample) s = tree_rng.below(X.rows());
        const Matrix Xb = X.take_rows(sample);
        for (std::size_t i = 0; i < sample.size(); ++i) yb[i] = y[sample[i]];
        forest.trees.push_back(fit_tree(Xb, yb, opt, tree_rng));
    }
    return forest;
}

inline RandomForest fit_forest(const Matrix& X, const std::vector<double>& y, std::size_t n_trees,
                               std::size_t max_depth, RngStream& rng) {
    return fit_forest(X, y, n_trees, TreeOptions{max_depth, 0}, rng);
}

inline std::vector<double> predict_forest(const RandomForest& model, const Matrix& X) {
    return model.predict(X);
}

}  // namespace uqbench

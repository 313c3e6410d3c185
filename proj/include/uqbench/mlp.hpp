#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "uqbench/matrix.hpp"
#include "uqbench/rng.hpp"

namespace uqbench {

struct MlpConfig {
    std::vector<std::size_t> hidden_sizes{50};
    double dropout_rate = 0.0;
    std::size_t epochs = 40;
    double learning_rate = 0.01;
    double lr_decay = 0.0;  // epoch t trains at learning_rate / (1 + lr_decay * t)
    std::uint64_t seed = 0;

    void validate() const {
        if (hidden_sizes.empty()) throw std::invalid_argument("MlpConfig: hidden_sizes empty");
        for (auto h : hidden_sizes)
            if (h == 0) throw std::invalid_argument("MlpConfig: zero-width hidden layer");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
            throw std::invalid_argument("MlpConfig: dropout_rate must be in [0, 1)");
        if (epochs == 0) throw std::invalid_argument("MlpConfig: epochs must be >= 1");
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
            throw std::invalid_argument("MlpConfig: learning_rate must be positive and finite");
        if (!(lr_decay >= 0.0)) throw std::invalid_argument("MlpConfig: lr_decay must be >= 0");
    }
};

// Feed-forward ReLU regression net with a scalar linear output. Dropout is
// inverted: kept hidden activations are rescaled by 1/(1-p), so p = 0
// reproduces the plain forward pass. The output unit is never dropped.
class Mlp {
  public:
    struct Layer {
        Matrix W;               // out x in
        std::vector<double> b;  // out
    };

    Mlp() = default;

    bool trained() const { return !layers_.empty(); }
    std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().W.cols(); }
    const std::vector<Layer>& layers() const { return layers_; }
    const MlpConfig& config() const { return config_; }
    // Running mean of per-sample training losses, one entry per epoch.
    const std::vector<double>& epoch_loss() const { return epoch_loss_; }

    std::vector<double> predict(const Matrix& X) const {
        check_width(X);
        Scratch s = make_scratch();
        std::vector<double> out(X.rows());
        for (std::size_t r = 0; r < X.rows(); ++r) out[r] = forward(X.row(r), s, nullptr);
        return out;
    }

    std::vector<double> predict(const Matrix& X, bool dropout_active, RngStream& rng) const {
        const double p = config_.dropout_rate;
        if (!dropout_active || p == 0.0) return predict(X);
        check_width(X);
        Scratch s = make_scratch();
        std::vector<std::vector<double>> masks = make_masks();
        std::vector<double> out(X.rows());
        for (std::size_t r = 0; r < X.rows(); ++r) {
            sample_masks(masks, p, rng);
            out[r] = forward(X.row(r), s, &masks);
        }
        return out;
    }

    // Batch-mean squared error with dropout disabled, plus its analytic
    // gradient. Parameter order: layer by layer, W row-major then b.
    double batch_loss(const Matrix& X, const std::vector<double>& y) const {
        check_width(X);
        if (y.size() != X.rows()) throw std::invalid_argument("Mlp::batch_loss: target length mismatch");
        Scratch s = make_scratch();
        double total = 0.0;
        for (std::size_t r = 0; r < X.rows(); ++r) {
            const double e = forward(X.row(r), s, nullptr) - y[r];
            total += e * e;
        }
        return total / static_cast<double>(X.rows());
    }

    std::vector<double> batch_gradient(const Matrix& X, const std::vector<double>& y) const {
        check_width(X);
        if (y.size() != X.rows()) throw std::invalid_argument("Mlp::batch_gradient: target length mismatch");
        std::vector<double> grad(parameter_count(), 0.0);
        Scratch s = make_scratch();
        for (std::size_t r = 0; r < X.rows(); ++r) accumulate_gradient(X.row(r), y[r], s, grad);
        const double inv_n = 1.0 / static_cast<double>(X.rows());
        for (auto& g : grad) g *= inv_n;
        return grad;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers_) n += l.W.rows() * l.W.cols() + l.b.size();
        return n;
    }

    std::vector<double> parameters() const {
        std::vector<double> theta;
        theta.reserve(parameter_count());
        for (const auto& l : layers_) {
            theta.insert(theta.end(), l.W.data().begin(), l.W.data().end());
            theta.insert(theta.end(), l.b.begin(), l.b.end());
        }
        return theta;
    }

    void set_parameters(const std::vector<double>& theta) {
        if (theta.size() != parameter_count())
            throw std::invalid_argument("Mlp::set_parameters: expected " +
                                        std::to_string(parameter_count()) + " values, got " +
                                        std::to_string(theta.size()));
        std::size_t k = 0;
        for (auto& l : layers_) {
            for (auto& w : l.W.data()) w = theta[k++];
            for (auto& b : l.b) b = theta[k++];
        }
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("Mlp::save: cannot open '" + path + "'");
        char buf[64];
        auto put = [&](double v) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << buf;
        };
        out << "uqbench-mlp 1\n";
        out << "config ";
        put(config_.dropout_rate);
        out << ' ' << config_.epochs << ' ';
        put(config_.learning_rate);
        out << ' ';
        put(config_.lr_decay);
        out << ' ' << config_.seed << '\n';
        out << "layers " << layers_.size() << '\n';
        for (const auto& l : layers_) {
            out << "layer " << l.W.rows() << ' ' << l.W.cols() << '\n';
            for (std::size_t r = 0; r < l.W.rows(); ++r) {
                for (std::size_t c = 0; c < l.W.cols(); ++c) {
                    if (c) out << ' ';
                    put(l.W(r, c));
                }
                out << '\n';
            }
            for (std::size_t r = 0; r < l.b.size(); ++r) {
                if (r) out << ' ';
                put(l.b[r]);
            }
            out << '\n';
        }
        if (!out) throw std::runtime_error("Mlp::save: write failed for '" + path + "'");
    }

    static Mlp load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("Mlp::load: cannot open '" + path + "'");
        std::string tag;
        int version = 0;
        in >> tag >> version;
        if (tag != "uqbench-mlp" || version != 1)
            throw std::runtime_error("Mlp::load: '" + path + "' is not a version-1 snapshot");
        Mlp m;
        std::size_t n_layers = 0;
        in >> tag >> m.config_.dropout_rate >> m.config_.epochs >> m.config_.learning_rate >>
            m.config_.lr_decay >> m.config_.seed;
        if (tag != "config") throw std::runtime_error("Mlp::load: missing config line");
        in >> tag >> n_layers;
        if (tag != "layers") throw std::runtime_error("Mlp::load: missing layer count");
        m.config_.hidden_sizes.clear();
        for (std::size_t i = 0; i < n_layers; ++i) {
            std::size_t rows = 0, cols = 0;
            in >> tag >> rows >> cols;
            if (tag != "layer" || rows == 0 || cols == 0)
                throw std::runtime_error("Mlp::load: bad layer header at index " + std::to_string(i));
            Layer l{Matrix(rows, cols), std::vector<double>(rows)};
            for (auto& w : l.W.data()) in >> w;
            for (auto& b : l.b) in >> b;
            if (!in) throw std::runtime_error("Mlp::load: truncated layer at index " + std::to_string(i));
            if (i + 1 < n_layers) m.config_.hidden_sizes.push_back(rows);
            m.layers_.push_back(std::move(l));
        }
        return m;
    }

    friend Mlp fit_mlp(const Matrix& X, const std::vector<double>& y, const MlpConfig& config,
                       RngStream& init_rng, RngStream& train_rng);

  private:
    struct Scratch {
        std::vector<std::vector<double>> act;  // act[0] = input copy, act[l+1] = hidden layer l
        std::vector<std::vector<double>> pre;  // pre-activations per hidden layer
        std::vector<double> da;                // d loss / d activation, reused per layer
        std::vector<double> delta;
    };

    void check_width(const Matrix& X) const {
        if (!trained()) throw std::logic_error("Mlp: not trained");
        if (X.cols() != input_dim())
            throw std::invalid_argument("Mlp: input has " + std::to_string(X.cols()) +
                                        " columns, expected " + std::to_string(input_dim()));
    }

    Scratch make_scratch() const {
        Scratch s;
        const std::size_t H = layers_.size() - 1;
        s.act.resize(H + 1);
        s.pre.resize(H);
        s.act[0].resize(input_dim());
        std::size_t widest = 1;
        for (std::size_t l = 0; l < H; ++l) {
            s.pre[l].resize(layers_[l].W.rows());
            s.act[l + 1].resize(layers_[l].W.rows());
            widest = std::max(widest, layers_[l].W.rows());
        }
        s.da.resize(widest);
        s.delta.resize(widest);
        return s;
    }

    std::vector<std::vector<double>> make_masks() const {
        std::vector<std::vector<double>> masks(layers_.size() - 1);
        for (std::size_t l = 0; l + 1 < layers_.size(); ++l)
            masks[l].assign(layers_[l].W.rows(), 1.0);
        return masks;
    }

    static void sample_masks(std::vector<std::vector<double>>& masks, double p, RngStream& rng) {
        const double scale = 1.0 / (1.0 - p);
        for (auto& layer_mask : masks)
            for (auto& m : layer_mask) m = rng.bernoulli(p) ? 0.0 : scale;
    }

    // Forward pass for one sample; masks == nullptr disables dropout.
    double forward(std::span<const double> x, Scratch& s,
                   const std::vector<std::vector<double>>* masks) const {
        const std::size_t H = layers_.size() - 1;
        std::copy(x.begin(), x.end(), s.act[0].begin());
        for (std::size_t l = 0; l < H; ++l) {
            const Layer& layer = layers_[l];
            const std::size_t out_n = layer.W.rows(), in_n = layer.W.cols();
            const double* in = s.act[l].data();
            for (std::size_t j = 0; j < out_n; ++j) {
                const double* w = layer.W.row(j).data();
                double z = layer.b[j];
                for (std::size_t i = 0; i < in_n; ++i) z += w[i] * in[i];
                s.pre[l][j] = z;
                double a = z > 0.0 ? z : 0.0;
                if (masks) a *= (*masks)[l][j];
                s.act[l + 1][j] = a;
            }
        }
        const Layer& out_layer = layers_[H];
        const double* w = out_layer.W.row(0).data();
        const double* in = s.act[H].data();
        double yhat = out_layer.b[0];
        for (std::size_t i = 0; i < out_layer.W.cols(); ++i) yhat += w[i] * in[i];
        return yhat;
    }

    // One SGD step on the squared error of a single sample.
    void train_step(std::span<const double> x, double y, double lr, Scratch& s,
                    const std::vector<std::vector<double>>* masks, double& loss_out) {
        const std::size_t H = layers_.size() - 1;
        const double yhat = forward(x, s, masks);
        const double err = yhat - y;
        loss_out = err * err;
        double g = 2.0 * err;

        Layer& out_layer = layers_[H];
        {
            double* w = &out_layer.W(0, 0);
            const double* a = s.act[H].data();
            const std::size_t n = out_layer.W.cols();
            for (std::size_t i = 0; i < n; ++i) {
                s.da[i] = g * w[i];
                w[i] -= lr * g * a[i];
            }
            out_layer.b[0] -= lr * g;
        }
        for (std::size_t l = H; l-- > 0;) {
            Layer& layer = layers_[l];
            const std::size_t out_n = layer.W.rows(), in_n = layer.W.cols();
            for (std::size_t j = 0; j < out_n; ++j) {
                double d = s.pre[l][j] > 0.0 ? s.da[j] : 0.0;
                if (masks) d *= (*masks)[l][j];
                s.delta[j] = d;
            }
            const double* a = s.act[l].data();
            if (l > 0) std::fill(s.da.begin(), s.da.begin() + static_cast<long>(in_n), 0.0);
            for (std::size_t j = 0; j < out_n; ++j) {
                const double d = s.delta[j];
                if (d == 0.0) continue;
                double* w = &layer.W(j, 0);
                if (l > 0)
                    for (std::size_t i = 0; i < in_n; ++i) {
                        s.da[i] += d * w[i];
                        w[i] -= lr * d * a[i];
                    }
                else
                    for (std::size_t i = 0; i < in_n; ++i) w[i] -= lr * d * a[i];
                layer.b[j] -= lr * d;
            }
        }
    }

    // Adds this sample's squared-error gradient (dropout disabled) to grad.
    void accumulate_gradient(std::span<const double> x, double y, Scratch& s,
                             std::vector<double>& grad) const {
        const std::size_t H = layers_.size() - 1;
        const double yhat = forward(x, s, nullptr);
        const double g = 2.0 * (yhat - y);

        std::vector<std::size_t> offsets(layers_.size());
        std::size_t off = 0;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            offsets[l] = off;
            off += layers_[l].W.rows() * layers_[l].W.cols() + layers_[l].b.size();
        }

        const Layer& out_layer = layers_[H];
        {
            const double* a = s.act[H].data();
            const std::size_t n = out_layer.W.cols();
            double* gw = grad.data() + offsets[H];
            for (std::size_t i = 0; i < n; ++i) {
                gw[i] += g * a[i];
                s.da[i] = g * out_layer.W(0, i);
            }
            grad[offsets[H] + n] += g;
        }
        for (std::size_t l = H; l-- > 0;) {
            const Layer& layer = layers_[l];
            const std::size_t out_n = layer.W.rows(), in_n = layer.W.cols();
            for (std::size_t j = 0; j < out_n; ++j)
                s.delta[j] = s.pre[l][j] > 0.0 ? s.da[j] : 0.0;
            const double* a = s.act[l].data();
            double* gw = grad.data() + offsets[l];
            double* gb = gw + out_n * in_n;
            if (l > 0) std::fill(s.da.begin(), s.da.begin() + static_cast<long>(in_n), 0.0);
            for (std::size_t j = 0; j < out_n; ++j) {
                const double d = s.delta[j];
                if (l > 0) {
                    const double* w = layer.W.row(j).data();
                    for (std::size_t i = 0; i < in_n; ++i) s.da[i] += d * w[i];
                }
                if (d == 0.0) continue;
                for (std::size_t i = 0; i < in_n; ++i) gw[j * in_n + i] += d * a[i];
                gb[j] += d;
            }
        }
    }

    std::vector<Layer> layers_;
    MlpConfig config_;
    std::vector<double> epoch_loss_;
};

// init_rng draws the He-scaled starting weights, train_rng drives the epoch
// shuffles and dropout masks. Passing the same stream for both recovers the
// single-stream behaviour; keeping them separate lets an ensemble replay one
// starting point across members.
inline Mlp fit_mlp(const Matrix& X, const std::vector<double>& y, const MlpConfig& config,
                   RngStream& init_rng, RngStream& train_rng) {
    config.validate();
    if (X.rows() == 0) throw std::invalid_argument("fit_mlp: empty training set");
    if (y.size() != X.rows()) throw std::invalid_argument("fit_mlp: target length mismatch");
    X.require_finite("fit_mlp: X");

    Mlp m;
    m.config_ = config;
    std::vector<std::size_t> dims;
    dims.push_back(X.cols());
    dims.insert(dims.end(), config.hidden_sizes.begin(), config.hidden_sizes.end());
    dims.push_back(1);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Mlp::Layer layer{Matrix(dims[l + 1], dims[l]), std::vector<double>(dims[l + 1], 0.0)};
        const double sd = std::sqrt(2.0 / static_cast<double>(dims[l]));
        for (auto& w : layer.W.data()) w = sd * init_rng.normal();
        m.layers_.push_back(std::move(layer));
    }

    Mlp::Scratch s = m.make_scratch();
    std::vector<std::vector<double>> masks;
    const bool use_dropout = config.dropout_rate > 0.0;
    if (use_dropout) masks = m.make_masks();

    std::vector<std::size_t> order(X.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    m.epoch_loss_.reserve(config.epochs);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = config.learning_rate / (1.0 + config.lr_decay * static_cast<double>(epoch));
        train_rng.shuffle(order);
        double loss_sum = 0.0;
        for (auto idx : order) {
            if (use_dropout) Mlp::sample_masks(masks, config.dropout_rate, train_rng);
            double loss = 0.0;
            m.train_step(X.row(idx), y[idx], lr, s, use_dropout ? &masks : nullptr, loss);
            if (!std::isfinite(loss))
                throw std::runtime_error("fit_mlp: non-finite loss at epoch " +
                                         std::to_string(epoch + 1) + " (diverged)");
            loss_sum += loss;
        }
        m.epoch_loss_.push_back(loss_sum / static_cast<double>(X.rows()));
    }
    for (const auto& layer : m.layers_) {
        layer.W.require_finite("fit_mlp: weights");
        for (double b : layer.b)
            if (!std::isfinite(b)) throw std::runtime_error("fit_mlp: non-finite bias after training");
    }
    return m;
}

inline Mlp fit_mlp(const Matrix& X, const std::vector<double>& y, const MlpConfig& config,
                   RngStream& rng) {
    return fit_mlp(X, y, config, rng, rng);
}

inline Mlp fit_mlp(const Matrix& X, const std::vector<double>& y, const MlpConfig& config) {
    RngStream rng(config.seed, /*stream_id=*/0x313f5ull);
    return fit_mlp(X, y, config, rng);
}

}  // namespace uqbench

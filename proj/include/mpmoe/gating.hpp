#pragma once

// Softmax gating network over fixed experts: a dense MLP with rectifier
// (or tanh) hidden layers, analytic gradients of the hybrid loss, and Adam.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mpmoe/error.hpp"
#include "mpmoe/loss.hpp"
#include "mpmoe/panel.hpp"

namespace mpmoe {

enum class Activation { relu, tanh };

inline std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

inline Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    throw ConfigError("unknown activation '" + s + "'");
}

struct DenseLayer {
    Matrix weights;  // fan_in x fan_out
    Vector bias;     // fan_out

    bool operator==(const DenseLayer& o) const { return weights == o.weights && bias == o.bias; }
};

// Parameters, and anything shaped like them (gradients, Adam moments).
using ParameterSet = std::vector<DenseLayer>;

inline ParameterSet zeros_like(const ParameterSet& p) {
    ParameterSet z;
    z.reserve(p.size());
    for (const auto& l : p)
        z.push_back({Matrix::Zero(l.weights.rows(), l.weights.cols()), Vector::Zero(l.bias.size())});
    return z;
}

inline std::size_t parameter_count(const ParameterSet& p) {
    std::size_t n = 0;
    for (const auto& l : p) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
}

struct GatingModel {
    std::vector<std::size_t> dims;  // [F, h1, ..., K]
    Activation activation = Activation::relu;
    ParameterSet layers;

    std::size_t inputs() const noexcept { return dims.front(); }
    std::size_t experts() const noexcept { return dims.back(); }

    bool operator==(const GatingModel& o) const {
        return dims == o.dims && activation == o.activation && layers == o.layers;
    }
};

// Fan-in scaled uniform weights, U(-sqrt(6/fan_in), sqrt(6/fan_in)); zero biases.
inline GatingModel init_model(const std::vector<std::size_t>& dims, std::uint64_t seed,
                              Activation activation = Activation::relu) {
    if (dims.size() < 2) throw ConfigError("gating model needs at least input and output dims");
    for (auto d : dims)
        if (d == 0) throw ConfigError("gating model dims must be positive");
    GatingModel m;
    m.dims = dims;
    m.activation = activation;
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const auto in = static_cast<Eigen::Index>(dims[l]);
        const auto out = static_cast<Eigen::Index>(dims[l + 1]);
        const double limit = std::sqrt(6.0 / static_cast<double>(in));
        std::uniform_real_distribution<double> u(-limit, limit);
        DenseLayer layer{Matrix(in, out), Vector::Zero(out)};
        for (Eigen::Index i = 0; i < in; ++i)
            for (Eigen::Index j = 0; j < out; ++j) layer.weights(i, j) = u(rng);
        m.layers.push_back(std::move(layer));
    }
    return m;
}

// Numerically stable softmax (max subtraction).
inline Vector softmax(const Vector& logits) {
    const double mx = logits.maxCoeff();
    Vector e = (logits.array() - mx).exp().matrix();
    return e / e.sum();
}

inline void softmax_rows(Matrix& z) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double mx = z.row(i).maxCoeff();
        z.row(i) = (z.row(i).array() - mx).exp().matrix();
        z.row(i) /= z.row(i).sum();
    }
}

namespace detail {

inline void activate(Matrix& z, Activation a) {
    if (a == Activation::relu) z = z.cwiseMax(0.0);
    else z = z.array().tanh().matrix();
}

// Derivative expressed through the pre-activation z and the activation value h.
inline Matrix activation_derivative(const Matrix& z, const Matrix& h, Activation a) {
    if (a == Activation::relu) return (z.array() > 0.0).cast<double>().matrix();
    return (1.0 - h.array().square()).matrix();
}

} // namespace detail

// Intermediate values of a batch forward pass.
struct ForwardCache {
    std::vector<Matrix> inputs;  // input to each layer (inputs[0] = features)
    std::vector<Matrix> pre;     // pre-activation of each layer
    Matrix probs;                // B x K
};

inline ForwardCache forward_batch(const GatingModel& model, const Matrix& features) {
    if (features.cols() != static_cast<Eigen::Index>(model.inputs()))
        throw ConfigError("forward: expected " + std::to_string(model.inputs()) + " features, got " +
                          std::to_string(features.cols()));
    if (!features.allFinite()) throw NumericError("forward: non-finite input features");
    ForwardCache c;
    Matrix h = features;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        Matrix z = h * layer.weights;
        z.rowwise() += layer.bias.transpose();
        c.inputs.push_back(std::move(h));
        c.pre.push_back(z);
        if (l + 1 < model.layers.size()) detail::activate(z, model.activation);
        h = std::move(z);
    }
    softmax_rows(h);
    c.probs = std::move(h);
    return c;
}

inline Vector forward(const GatingModel& model, const Vector& features) {
    Matrix x = features.transpose();
    return forward_batch(model, x).probs.row(0).transpose();
}

// Convex combination sum_k gate[k] * experts[k].
inline double combine(const Vector& gate, const Vector& expert_values) {
    if (gate.size() != expert_values.size()) throw ConfigError("combine: gate and expert lengths differ");
    return gate.dot(expert_values);
}

struct GateBatch {
    Matrix features;   // B x F, normalized
    Matrix experts;    // B x K, mm/h
    Vector targets;    // B
    Matrix penalties;  // B x K, D_min rows
};

struct BackwardResult {
    ParameterSet grads;
    LossBreakdown loss;  // batch means at the current parameters
    Matrix input_grad;   // dL/dfeatures, B x F
    Matrix probs;
};

// Exact gradient of the batch-mean hybrid loss.
// dL/dp_k = (1-lambda) * 2 (yhat - y) E_k + lambda * D_min[k], per sample / B.
inline BackwardResult backward(const GatingModel& model, const GateBatch& batch, double lambda) {
    check_lambda(lambda);
    const auto b = batch.features.rows();
    const auto k = static_cast<Eigen::Index>(model.experts());
    if (b == 0) throw EmptyDatasetError("backward: empty batch");
    if (batch.experts.rows() != b || batch.experts.cols() != k || batch.targets.size() != b ||
        batch.penalties.rows() != b || batch.penalties.cols() != k)
        throw ConfigError("backward: batch shapes are inconsistent");

    ForwardCache c = forward_batch(model, batch.features);
    const Matrix& p = c.probs;
    const Vector yhat = p.cwiseProduct(batch.experts).rowwise().sum();
    const Vector resid = yhat - batch.targets;
    const double inv_b = 1.0 / static_cast<double>(b);

    BackwardResult r;
    const double mse = resid.squaredNorm() * inv_b;
    const double mp = p.cwiseProduct(batch.penalties).sum() * inv_b;
    r.loss = combine_terms(mse, mp, lambda);
    if (!std::isfinite(r.loss.total)) throw NumericError("backward: non-finite loss at output layer");

    // dL/dp
    Matrix g = batch.experts.array().colwise() * (2.0 * (1.0 - lambda) * inv_b * resid).array();
    g += (lambda * inv_b) * batch.penalties;
    // softmax: dz = p * (g - <p, g>)
    const Vector pg = p.cwiseProduct(g).rowwise().sum();
    Matrix dz = (p.array() * (g.array().colwise() - pg.array())).matrix();

    r.grads = zeros_like(model.layers);
    for (std::size_t l = model.layers.size(); l-- > 0;) {
        r.grads[l].weights.noalias() = c.inputs[l].transpose() * dz;
        r.grads[l].bias = dz.colwise().sum().transpose();
        Matrix dh = dz * model.layers[l].weights.transpose();
        if (!dh.allFinite() || !r.grads[l].weights.allFinite())
            throw NumericError("backward: non-finite gradient at layer " + std::to_string(l));
        if (l == 0) {
            r.input_grad = std::move(dh);
        } else {
            // inputs[l] holds the activated output of layer l-1
            dz = dh.cwiseProduct(detail::activation_derivative(c.pre[l - 1], c.inputs[l], model.activation));
        }
    }
    r.probs = std::move(c.probs);
    return r;
}

// Batch-mean hybrid loss without gradients (used by finite-difference checks).
inline LossBreakdown batch_loss(const GatingModel& model, const GateBatch& batch, double lambda) {
    const Matrix p = forward_batch(model, batch.features).probs;
    const Vector yhat = p.cwiseProduct(batch.experts).rowwise().sum();
    const double inv_b = 1.0 / static_cast<double>(batch.features.rows());
    return combine_terms((yhat - batch.targets).squaredNorm() * inv_b,
                         p.cwiseProduct(batch.penalties).sum() * inv_b, lambda);
}

struct AdamConfig {
    double lr = 0.003;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig config;
    ParameterSet first;
    ParameterSet second;
    std::uint64_t step = 0;

    static AdamState for_model(const GatingModel& m, AdamConfig cfg = {}) {
        return {cfg, zeros_like(m.layers), zeros_like(m.layers), 0};
    }
};

// Bias-corrected adaptive-moment update.
inline void adam_step(GatingModel& model, AdamState& state, const ParameterSet& grads) {
    if (grads.size() != model.layers.size() || state.first.size() != model.layers.size())
        throw ConfigError("adam_step: parameter/gradient layer count mismatch");
    const auto& cfg = state.config;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    auto update = [&](auto& param, const auto& grad, auto& m1, auto& m2) {
        if (param.rows() != grad.rows() || param.cols() != grad.cols())
            throw ConfigError("adam_step: gradient shape mismatch");
        m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * grad;
        m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * grad.cwiseAbs2();
        param.array() -= cfg.lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + cfg.epsilon);
    };
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        update(model.layers[l].weights, grads[l].weights, state.first[l].weights, state.second[l].weights);
        update(model.layers[l].bias, grads[l].bias, state.first[l].bias, state.second[l].bias);
        if (!model.layers[l].weights.allFinite() || !model.layers[l].bias.allFinite())
            throw NumericError("adam_step: non-finite parameters in layer " + std::to_string(l));
    }
}

} // namespace mpmoe

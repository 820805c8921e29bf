#pragma once

// Training runs for the gating network: penalty precomputation, seeded
// mini-batch Adam, multi-seed aggregation, lambda sweeps, loss ablation and
// the non-learned comparison blends.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mpmoe/dataset.hpp"
#include "mpmoe/error.hpp"
#include "mpmoe/gating.hpp"
#include "mpmoe/loss.hpp"
#include "mpmoe/matrix_profile.hpp"
#include "mpmoe/metrics.hpp"

namespace mpmoe {

struct TrainConfig {
    double lambda = 0.6;
    int m = 3;
    int delta = 3;
    double lr = 0.003;
    std::size_t batch_size = 64;
    std::size_t epochs = 100;
    std::vector<std::uint64_t> seeds{0, 1, 42, 2024, 2025};
    double split = 0.7;
    std::vector<std::size_t> hidden_dims{64, 64, 32};
    Activation activation = Activation::relu;
    bool shuffle = true;
    bool gate_includes_experts = false;
    std::optional<std::size_t> dtw_band;

    WindowSpec window() const { return {m, delta}; }
    bool operator==(const TrainConfig&) const = default;
};

inline void validate(const TrainConfig& c) {
    check_lambda(c.lambda);
    validate(c.window());
    if (!(c.lr > 0.0) || !std::isfinite(c.lr)) throw ConfigError("learning rate must be positive");
    if (c.batch_size == 0) throw ConfigError("batch size must be positive");
    if (c.epochs == 0) throw ConfigError("epochs must be positive");
    if (c.seeds.empty()) throw ConfigError("at least one seed is required");
    if (!(c.split > 0.0 && c.split < 1.0)) throw ConfigError("split fraction must lie in (0,1)");
    for (auto h : c.hidden_dims)
        if (h == 0) throw ConfigError("hidden dims must be positive");
}

inline std::vector<std::size_t> layer_dims(const TrainConfig& c, std::size_t inputs, std::size_t experts) {
    std::vector<std::size_t> dims{inputs};
    dims.insert(dims.end(), c.hidden_dims.begin(), c.hidden_dims.end());
    dims.push_back(experts);
    return dims;
}

// Everything a run needs that does not depend on the seed or lambda.
struct PreparedData {
    Split split;
    NormalizationStats stats;
    PenaltyMatrix penalties;
    Matrix features;  // n_train_windows x F, normalized
    Matrix experts;   // n_train_windows x K
    Vector targets;
};

inline PreparedData prepare(const ForecastPanel& panel, const TrainConfig& config) {
    validate(config);
    PreparedData d;
    d.split = split(panel, SplitSpec{config.split});
    d.stats = fit_normalizer(panel, d.split.train, config.gate_includes_experts);
    const auto samples = build_windows(panel, d.split.train, config.window(), d.stats, config.gate_includes_experts);
    if (samples.empty())
        throw EmptyDatasetError("no training sample has a complete search window (train rows " +
                                std::to_string(d.split.train.size()) + ", m=" + std::to_string(config.m) +
                                ", delta=" + std::to_string(config.delta) + ")");
    d.penalties = build_penalty_matrix(samples, panel.num_experts(), config.window());
    const auto n = static_cast<Eigen::Index>(samples.size());
    d.features.resize(n, samples.front().features.size());
    d.experts.resize(n, static_cast<Eigen::Index>(panel.num_experts()));
    d.targets.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = samples[static_cast<std::size_t>(i)];
        d.features.row(i) = s.features.transpose();
        d.experts.row(i) = s.experts.transpose();
        d.targets(i) = s.target;
    }
    return d;
}

struct RunResult {
    TrainConfig config;
    std::uint64_t seed = 0;
    MetricsReport report;
    std::vector<LossBreakdown> epochs;
    double wall_seconds = 0.0;
};

struct TrainedRun {
    GatingModel model;
    RunResult result;
    Evaluation evaluation;
};

// Called after every epoch with the epoch index and current parameters.
using EpochObserver = std::function<void(std::size_t, const GatingModel&)>;

inline TrainedRun train_prepared(const ForecastPanel& panel, const PreparedData& data, const TrainConfig& config,
                                 std::uint64_t seed, const EpochObserver& observer = {}) {
    validate(config);
    const auto start = std::chrono::steady_clock::now();
    const auto n = static_cast<std::size_t>(data.targets.size());
    if (n == 0) throw EmptyDatasetError("no training samples");

    TrainedRun out;
    out.model = init_model(layer_dims(config, static_cast<std::size_t>(data.features.cols()), panel.num_experts()),
                           seed, config.activation);
    AdamState adam = AdamState::for_model(out.model, AdamConfig{config.lr});
    const std::uint64_t penalty_hash = data.penalties.content_hash();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5eedu};
    std::mt19937_64 shuffle_rng(ss);

    const auto k = data.experts.cols();
    const auto f = data.features.cols();
    GateBatch batch;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.shuffle) std::shuffle(order.begin(), order.end(), shuffle_rng);
        double sum_mse = 0.0, sum_mp = 0.0;
        for (std::size_t b0 = 0; b0 < n; b0 += config.batch_size) {
            const auto bs = static_cast<Eigen::Index>(std::min(config.batch_size, n - b0));
            batch.features.resize(bs, f);
            batch.experts.resize(bs, k);
            batch.targets.resize(bs);
            batch.penalties.resize(bs, k);
            for (Eigen::Index i = 0; i < bs; ++i) {
                const auto row = static_cast<Eigen::Index>(order[b0 + static_cast<std::size_t>(i)]);
                batch.features.row(i) = data.features.row(row);
                batch.experts.row(i) = data.experts.row(row);
                batch.targets(i) = data.targets(row);
                batch.penalties.row(i) = data.penalties.values().row(row);
            }
            BackwardResult r;
            try {
                r = backward(out.model, batch, config.lambda);
                adam_step(out.model, adam, r.grads);
            } catch (const NumericError& e) {
                throw DivergenceError(epoch, e.what());
            }
            sum_mse += r.loss.mse_term * static_cast<double>(bs);
            sum_mp += r.loss.mp_term * static_cast<double>(bs);
        }
        const auto epoch_loss = combine_terms(sum_mse / static_cast<double>(n), sum_mp / static_cast<double>(n),
                                              config.lambda);
        if (!std::isfinite(epoch_loss.total)) throw DivergenceError(epoch, "non-finite epoch loss");
        if (data.penalties.content_hash() != penalty_hash)
            throw NumericError("penalty matrix changed during training at epoch " + std::to_string(epoch));
        out.result.epochs.push_back(epoch_loss);
        if (observer) observer(epoch, out.model);
    }

    out.evaluation = evaluate(out.model, panel, data.split.test, data.stats, config.gate_includes_experts,
                              DtwOptions{config.dtw_band});
    out.result.config = config;
    out.result.seed = seed;
    out.result.report = out.evaluation.report;
    out.result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

inline TrainedRun train(const ForecastPanel& panel, const TrainConfig& config, std::uint64_t seed) {
    return train_prepared(panel, prepare(panel, config), config, seed);
}

// ---------------------------------------------------------------------------
// Aggregation across seeds

struct MetricSummary {
    std::optional<double> mean;
    std::optional<double> std;  // population
    std::optional<double> median;
    std::size_t defined = 0;
};

// Scalar view of a run, in a fixed column order.
inline std::vector<std::pair<std::string, std::optional<double>>> flatten(const RunResult& r) {
    std::vector<std::pair<std::string, std::optional<double>>> v;
    const auto& m = r.report;
    v.emplace_back("mae_1h", m.mae_1h);
    for (int h : kAccumulationHorizons) {
        auto it = m.mae_acc.find(h);
        v.emplace_back("mae_" + std::to_string(h) + "h", it == m.mae_acc.end() ? std::nullopt : it->second);
    }
    v.emplace_back("dtw", m.dtw);
    for (double t : kCsiThresholds) {
        auto it = m.csi.find(t);
        v.emplace_back("csi_" + std::to_string(static_cast<int>(t)), it == m.csi.end() ? std::nullopt : it->second);
    }
    v.emplace_back("csi_m", m.csi_m);
    const LossBreakdown last = r.epochs.empty() ? LossBreakdown{} : r.epochs.back();
    v.emplace_back("train_total", last.total);
    v.emplace_back("train_mse", last.mse_term);
    v.emplace_back("train_mp", last.mp_term);
    return v;
}

inline MetricSummary summarize(std::vector<double> xs) {
    MetricSummary s;
    s.defined = xs.size();
    if (xs.empty()) return s;
    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    s.mean = mean;
    s.std = std::sqrt(var / n);
    std::sort(xs.begin(), xs.end());
    const std::size_t mid = xs.size() / 2;
    s.median = xs.size() % 2 ? xs[mid] : 0.5 * (xs[mid - 1] + xs[mid]);
    return s;
}

struct Aggregate {
    double lambda = 0.0;
    std::vector<std::string> keys;
    std::map<std::string, MetricSummary> metrics;
    std::vector<RunResult> runs;

    const MetricSummary& at(const std::string& key) const {
        auto it = metrics.find(key);
        if (it == metrics.end()) throw ConfigError("unknown metric '" + key + "'");
        return it->second;
    }
};

inline Aggregate aggregate_runs(std::vector<RunResult> runs, double lambda) {
    Aggregate a;
    a.lambda = lambda;
    if (runs.empty()) return a;
    for (const auto& kv : flatten(runs.front())) a.keys.push_back(kv.first);
    std::map<std::string, std::vector<double>> cols;
    for (const auto& r : runs)
        for (const auto& [key, value] : flatten(r))
            if (value) cols[key].push_back(*value);
    for (const auto& key : a.keys) a.metrics[key] = summarize(cols[key]);
    a.runs = std::move(runs);
    return a;
}

inline Aggregate run_seeds_prepared(const ForecastPanel& panel, const PreparedData& data, const TrainConfig& config) {
    validate(config);
    std::vector<RunResult> runs;
    for (auto seed : config.seeds) {
        try {
            runs.push_back(train_prepared(panel, data, config, seed).result);
        } catch (const DivergenceError& e) {
            throw DivergenceError(e.epoch(), "seed " + std::to_string(seed) + ": " + e.what());
        } catch (const Error& e) {
            throw NumericError("seed " + std::to_string(seed) + " failed: " + e.what());
        }
    }
    return aggregate_runs(std::move(runs), config.lambda);
}

inline Aggregate run_seeds(const ForecastPanel& panel, const TrainConfig& config) {
    return run_seeds_prepared(panel, prepare(panel, config), config);
}

// One retrained aggregate per lambda, ascending.
inline std::vector<Aggregate> sweep_lambda(const ForecastPanel& panel, const TrainConfig& config,
                                           std::vector<double> lambdas) {
    if (lambdas.empty()) throw ConfigError("sweep needs at least one lambda");
    for (double l : lambdas) check_lambda(l);
    std::sort(lambdas.begin(), lambdas.end());
    const PreparedData data = prepare(panel, config);
    std::vector<Aggregate> out;
    for (double l : lambdas) {
        TrainConfig c = config;
        c.lambda = l;
        out.push_back(run_seeds_prepared(panel, data, c));
    }
    return out;
}

struct AblationArm {
    std::string label;
    Aggregate aggregate;
};

inline constexpr const char* kArmFull = "full";
inline constexpr const char* kArmNoMp = "w/o MP";
inline constexpr const char* kArmNoMse = "w/o MSE";

// full (config lambda), w/o MP (lambda = 0), w/o MSE (lambda = 1); same seeds.
inline std::vector<AblationArm> ablate(const ForecastPanel& panel, const TrainConfig& config) {
    const PreparedData data = prepare(panel, config);
    std::vector<AblationArm> arms;
    for (auto [label, lambda] : {std::pair{kArmFull, config.lambda}, std::pair{kArmNoMp, 0.0},
                                 std::pair{kArmNoMse, 1.0}}) {
        TrainConfig c = config;
        c.lambda = lambda;
        arms.push_back({label, run_seeds_prepared(panel, data, c)});
    }
    return arms;
}

// ---------------------------------------------------------------------------
// Comparison blends

struct LeastSquaresBlend {
    Vector weights;
    bool ridge_fallback = false;
    double ridge = 0.0;
};

// No-intercept least squares of observed on expert columns over `rows`.
inline LeastSquaresBlend fit_least_squares(const ForecastPanel& panel, IndexRange rows) {
    if (rows.empty()) throw EmptyDatasetError("least squares needs training rows");
    const auto b = static_cast<Eigen::Index>(rows.begin), n = static_cast<Eigen::Index>(rows.size());
    const auto x = panel.experts.block(b, 0, n, panel.experts.cols());
    const auto y = panel.observed.segment(b, n);
    LeastSquaresBlend out;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() == x.cols()) {
        out.weights = qr.solve(Eigen::VectorXd(y));
        return out;
    }
    const Eigen::MatrixXd gram = x.transpose() * x;
    out.ridge_fallback = true;
    out.ridge = 1e-8 * std::max(1.0, gram.trace() / static_cast<double>(gram.rows()));
    out.weights = (gram + out.ridge * Eigen::MatrixXd::Identity(gram.rows(), gram.cols()))
                      .ldlt()
                      .solve(Eigen::VectorXd(x.transpose() * y));
    return out;
}

struct BaselineReport {
    MetricsReport ensemble_mean;
    MetricsReport least_squares;
    LeastSquaresBlend blend;
    std::vector<std::pair<std::string, MetricsReport>> experts;
};

inline BaselineReport baseline_eval(const ForecastPanel& panel, const Split& s, const DtwOptions& dtw = {}) {
    if (s.test.empty()) throw EmptyDatasetError("baseline evaluation needs test rows");
    const auto b = static_cast<Eigen::Index>(s.test.begin), n = static_cast<Eigen::Index>(s.test.size());
    const auto k = panel.experts.cols();
    const auto ex = panel.experts.block(b, 0, n, k);
    const Vector obs = panel.observed.segment(b, n);

    BaselineReport r;
    const Vector uniform = Vector::Constant(k, 1.0 / static_cast<double>(k));
    r.ensemble_mean = score_series(ex * uniform, obs, dtw);
    r.ensemble_mean.mean_gate_weights.assign(uniform.data(), uniform.data() + k);

    r.blend = fit_least_squares(panel, s.train);
    r.least_squares = score_series((ex * r.blend.weights).cwiseMax(0.0), obs, dtw);

    for (Eigen::Index j = 0; j < k; ++j)
        r.experts.emplace_back(panel.expert_names[static_cast<std::size_t>(j)], score_series(ex.col(j), obs, dtw));
    return r;
}

} // namespace mpmoe

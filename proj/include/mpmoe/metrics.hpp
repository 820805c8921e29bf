#pragma once

// Verification metrics: hourly and accumulated MAE, DTW, CSI and CSI-M.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "mpmoe/dataset.hpp"
#include "mpmoe/error.hpp"
#include "mpmoe/gating.hpp"

namespace mpmoe {

inline constexpr std::array<int, 3> kAccumulationHorizons{12, 24, 48};
inline constexpr std::array<double, 3> kCsiThresholds{1.0, 3.0, 5.0};

template <std::floating_point T>
T mae(std::span<const T> predictions, std::span<const T> targets) {
    if (predictions.empty()) throw ConfigError("mae: empty input");
    if (predictions.size() != targets.size()) throw ConfigError("mae: length mismatch");
    T acc = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) acc += std::abs(predictions[i] - targets[i]);
    return acc / static_cast<T>(predictions.size());
}

// Trailing rolling sums; element i is the sum of series[i .. i+horizon-1],
// i.e. the accumulation ending at position i+horizon-1.
template <std::floating_point T>
std::vector<T> accumulate(std::span<const T> series, std::size_t horizon) {
    if (horizon < 1) throw ConfigError("accumulate: horizon must be >= 1");
    if (series.size() < horizon) throw ConfigError("accumulate: series shorter than horizon");
    std::vector<T> out;
    out.reserve(series.size() - horizon + 1);
    for (std::size_t end = horizon; end <= series.size(); ++end) {
        T acc = 0;
        for (std::size_t j = end - horizon; j < end; ++j) acc += series[j];
        out.push_back(acc);
    }
    return out;
}

struct DtwOptions {
    // Sakoe-Chiba half-width; unset = unconstrained.
    std::optional<std::size_t> band;
};

// Classic DTW: |a_i - b_j| local cost, steps match/insert/delete, total
// accumulated cost of the optimal path (not normalized by path length).
template <std::floating_point T>
T dtw_distance(std::span<const T> a, std::span<const T> b, const DtwOptions& opt = {}) {
    if (a.empty() || b.empty()) throw ConfigError("dtw_distance: empty series");
    constexpr T inf = std::numeric_limits<T>::infinity();
    const std::size_t n = a.size(), m = b.size();
    std::vector<T> prev(m + 1, inf), cur(m + 1, inf);
    prev[0] = 0;
    for (std::size_t i = 1; i <= n; ++i) {
        cur.assign(m + 1, inf);
        std::size_t lo = 1, hi = m;
        if (opt.band) {
            const std::size_t w = std::max(*opt.band, n > m ? n - m : m - n);
            lo = i > w ? i - w : 1;
            hi = std::min(m, i + w);
        }
        for (std::size_t j = lo; j <= hi; ++j) {
            const T cost = std::abs(a[i - 1] - b[j - 1]);
            cur[j] = cost + std::min({prev[j - 1], prev[j], cur[j - 1]});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

// H / (H + M + F) at exceedance threshold r (value >= r); nullopt when the
// contingency table is empty.
template <std::floating_point T>
std::optional<double> csi(std::span<const T> predictions, std::span<const T> targets, double r) {
    if (predictions.size() != targets.size()) throw ConfigError("csi: length mismatch");
    std::size_t hits = 0, misses = 0, false_alarms = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const bool p = predictions[i] >= r, o = targets[i] >= r;
        if (p && o) ++hits;
        else if (o) ++misses;
        else if (p) ++false_alarms;
    }
    const std::size_t denom = hits + misses + false_alarms;
    if (denom == 0) return std::nullopt;
    return static_cast<double>(hits) / static_cast<double>(denom);
}

// Mean of the defined values; nullopt when none is defined.
inline std::optional<double> mean_defined(std::span<const std::optional<double>> values) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : values)
        if (v) {
            sum += *v;
            ++n;
        }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

template <std::floating_point T>
std::optional<double> csi_m(std::span<const T> predictions, std::span<const T> targets) {
    std::array<std::optional<double>, kCsiThresholds.size()> v;
    for (std::size_t i = 0; i < kCsiThresholds.size(); ++i) v[i] = csi<T>(predictions, targets, kCsiThresholds[i]);
    return mean_defined(v);
}

struct MetricsReport {
    double mae_1h = 0.0;
    std::map<int, std::optional<double>> mae_acc;    // horizon (h) -> mm
    double dtw = 0.0;
    std::map<double, std::optional<double>> csi;      // threshold (mm) -> ratio
    std::optional<double> csi_m;
    std::vector<double> mean_gate_weights;             // empty for non-gated forecasts
    std::size_t n_test = 0;

    bool operator==(const MetricsReport&) const = default;
};

inline std::span<const double> as_span(const Vector& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

// Scores a forecast against observations over one contiguous series.
inline MetricsReport score_series(const Vector& forecast, const Vector& observed, const DtwOptions& dtw = {}) {
    if (forecast.size() == 0) throw EmptyDatasetError("cannot score an empty series");
    const auto f = as_span(forecast), o = as_span(observed);
    MetricsReport r;
    r.n_test = f.size();
    r.mae_1h = mae<double>(f, o);
    for (int h : kAccumulationHorizons) {
        if (f.size() < static_cast<std::size_t>(h)) {
            r.mae_acc[h] = std::nullopt;
            continue;
        }
        const auto af = accumulate<double>(f, static_cast<std::size_t>(h));
        const auto ao = accumulate<double>(o, static_cast<std::size_t>(h));
        r.mae_acc[h] = mae<double>(af, ao);
    }
    r.dtw = dtw_distance<double>(f, o, dtw);
    std::vector<std::optional<double>> vals;
    for (double t : kCsiThresholds) {
        r.csi[t] = csi<double>(f, o, t);
        vals.push_back(r.csi[t]);
    }
    r.csi_m = mean_defined(vals);
    return r;
}

struct Evaluation {
    MetricsReport report;
    IndexRange rows;
    Vector forecast;  // mm/h over `rows`
    Matrix gates;     // rows x K
};

// Gated forecast for every row of `rows` (features only; no windows needed).
inline Evaluation evaluate(const GatingModel& model, const ForecastPanel& panel, IndexRange rows,
                           const NormalizationStats& stats, bool include_experts = false,
                           const DtwOptions& dtw = {}) {
    if (rows.empty()) throw EmptyDatasetError("evaluation range is empty");
    if (rows.end > panel.rows()) throw ConfigError("evaluation range exceeds panel");
    if (model.experts() != panel.num_experts())
        throw SchemaMismatchError("model has " + std::to_string(model.experts()) + " experts, data has " +
                                  std::to_string(panel.num_experts()));
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto w = static_cast<Eigen::Index>(gate_input_width(panel, include_experts));
    Matrix x(n, w);
    for (Eigen::Index i = 0; i < n; ++i)
        x.row(i) = stats.apply(gate_input_row(panel, rows.begin + static_cast<std::size_t>(i), include_experts))
                       .transpose();
    Evaluation e;
    e.rows = rows;
    e.gates = forward_batch(model, x).probs;
    const auto b = static_cast<Eigen::Index>(rows.begin);
    const auto k = panel.experts.cols();
    e.forecast = e.gates.cwiseProduct(panel.experts.block(b, 0, n, k)).rowwise().sum();
    e.report = score_series(e.forecast, panel.observed.segment(b, n), dtw);
    const Vector mean_gate = e.gates.colwise().mean().transpose();
    e.report.mean_gate_weights.assign(mean_gate.data(), mean_gate.data() + mean_gate.size());
    return e;
}

} // namespace mpmoe

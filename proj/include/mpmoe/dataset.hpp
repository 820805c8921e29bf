#pragma once

// Chronological split, feature Z-scoring and query/search windowing.

#include <cmath>
#include <cstddef>
#include <vector>

#include "mpmoe/error.hpp"
#include "mpmoe/panel.hpp"

namespace mpmoe {

// Half-open contiguous row range [begin, end).
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - begin; }
    bool empty() const noexcept { return end <= begin; }
    bool contains(std::ptrdiff_t i) const noexcept {
        return i >= static_cast<std::ptrdiff_t>(begin) && i < static_cast<std::ptrdiff_t>(end);
    }
    bool operator==(const IndexRange&) const = default;
};

struct SplitSpec {
    double train_fraction = 0.7;
};

struct Split {
    IndexRange train;
    IndexRange test;
};

// First floor(N * fraction) rows train, the rest test.
inline Split split(std::size_t n, const SplitSpec& spec) {
    if (n < 10) throw EmptyDatasetError("split needs at least 10 rows, got " + std::to_string(n));
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw ConfigError("train fraction must lie in (0,1)");
    const auto cut = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.train_fraction));
    return {{0, cut}, {cut, n}};
}

inline Split split(const ForecastPanel& panel, const SplitSpec& spec) { return split(panel.rows(), spec); }

// Per-column Z-score statistics. Population standard deviation; columns with
// zero variance get std = 1.
struct NormalizationStats {
    Vector mean;
    Vector std;

    static constexpr const char* std_kind = "population";

    Vector apply(const Vector& raw) const { return ((raw - mean).array() / std.array()).matrix(); }
    Vector invert(const Vector& z) const { return (z.array() * std.array()).matrix() + mean; }

    Matrix apply_rows(const Matrix& raw) const {
        Matrix out = raw;
        out.rowwise() -= mean.transpose();
        out.array().rowwise() /= std.transpose().array();
        return out;
    }
};

// Gate input columns for a row: the physical features, optionally followed
// by the raw expert values.
inline Vector gate_input_row(const ForecastPanel& p, std::size_t row, bool include_experts) {
    const auto r = static_cast<Eigen::Index>(row);
    if (!include_experts) return p.features.row(r).transpose();
    Vector v(p.features.cols() + p.experts.cols());
    v << p.features.row(r).transpose(), p.experts.row(r).transpose();
    return v;
}

inline std::size_t gate_input_width(const ForecastPanel& p, bool include_experts) {
    return p.num_features() + (include_experts ? p.num_experts() : 0);
}

inline NormalizationStats fit_normalizer(const ForecastPanel& p, IndexRange train, bool include_experts = false) {
    if (train.size() < 2) throw EmptyDatasetError("normalizer needs at least 2 training rows");
    if (train.end > p.rows()) throw ConfigError("training range exceeds panel");
    const auto w = static_cast<Eigen::Index>(gate_input_width(p, include_experts));
    Vector sum = Vector::Zero(w);
    for (std::size_t i = train.begin; i < train.end; ++i) sum += gate_input_row(p, i, include_experts);
    const double n = static_cast<double>(train.size());
    NormalizationStats s;
    s.mean = sum / n;
    Vector sq = Vector::Zero(w);
    for (std::size_t i = train.begin; i < train.end; ++i)
        sq += (gate_input_row(p, i, include_experts) - s.mean).array().square().matrix();
    s.std = (sq / n).array().sqrt().matrix();
    for (Eigen::Index j = 0; j < w; ++j)
        if (!(s.std(j) > 0.0)) s.std(j) = 1.0;
    return s;
}

struct WindowSpec {
    int m = 3;      // query window length (hours)
    int delta = 3;  // maximum shift (hours)

    // Rows needed behind and ahead of the target index.
    int lookback() const noexcept { return delta + m - 1; }
    int lookahead() const noexcept { return delta; }
    std::size_t scope_length() const noexcept { return static_cast<std::size_t>(m + 2 * delta); }
};

inline void validate(const WindowSpec& w) {
    if (w.m < 1) throw ConfigError("window length m must be >= 1");
    if (w.delta < 0) throw ConfigError("max shift delta must be >= 0");
}

struct WindowedSample {
    std::size_t index = 0;        // panel row t
    Matrix query;                 // K x m, expert values over [t-m+1, t]
    Vector search_scope;          // observed over [t-delta-m+1, t+delta]
    double target = 0.0;          // observed at t
    Vector features;              // normalized gate input at t
    Vector experts;               // expert values at t
};

// True when every row touched by the sample at t lies inside `range`.
inline bool window_fits(std::size_t t, IndexRange range, const WindowSpec& w) {
    const auto ti = static_cast<std::ptrdiff_t>(t);
    return range.contains(ti - w.lookback()) && range.contains(ti + w.lookahead()) &&
           range.contains(ti - (w.m - 1));
}

// One sample per t in `range` whose query and full search scope stay inside
// `range`; boundary rows are skipped, never padded.
inline std::vector<WindowedSample> build_windows(const ForecastPanel& p, IndexRange range, const WindowSpec& w,
                                                 const NormalizationStats& stats, bool include_experts = false) {
    validate(w);
    if (range.end > p.rows()) throw ConfigError("window range exceeds panel");
    std::vector<WindowedSample> out;
    const auto k = static_cast<Eigen::Index>(p.num_experts());
    for (std::size_t t = range.begin; t < range.end; ++t) {
        if (!window_fits(t, range, w)) continue;
        WindowedSample s;
        s.index = t;
        const auto ti = static_cast<Eigen::Index>(t);
        s.query = p.experts.block(ti - w.m + 1, 0, w.m, k).transpose();
        s.search_scope = p.observed.segment(ti - w.lookback(), static_cast<Eigen::Index>(w.scope_length()));
        s.target = p.observed(ti);
        s.features = stats.apply(gate_input_row(p, t, include_experts));
        s.experts = p.experts.row(ti).transpose();
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace mpmoe

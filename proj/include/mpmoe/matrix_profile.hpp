#pragma once

// Windowed minimum subsequence distance between an expert query and the
// ground truth around the same time, and the static penalty table built
// from it before training.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <cstdlib>
#include <ostream>
#include <span>
#include <vector>

#include "mpmoe/dataset.hpp"
#include "mpmoe/error.hpp"

namespace mpmoe {

// Plain (not z-normalized) Euclidean distance between two equal-length windows.
template <std::floating_point T>
T window_distance(std::span<const T> query, std::span<const T> candidate) {
    if (query.size() != candidate.size())
        throw ConfigError("window_distance: length mismatch (" + std::to_string(query.size()) + " vs " +
                          std::to_string(candidate.size()) + ")");
    T acc = 0;
    for (std::size_t i = 0; i < query.size(); ++i) {
        const T d = query[i] - candidate[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

struct ShiftMatch {
    double distance = 0.0;
    int offset = 0;  // best tau - t, in [-delta, +delta]
};

// Minimum window distance over candidate windows ending at t+o for
// o in [-delta, delta]. `truth_scope` covers rows [t-delta-m+1, t+delta].
// Ties prefer the smallest |o|, then the negative offset.
template <std::floating_point T>
ShiftMatch d_min(std::span<const T> query, std::span<const T> truth_scope, int m, int delta) {
    if (m < 1 || delta < 0) throw ConfigError("d_min: need m >= 1 and delta >= 0");
    if (query.size() != static_cast<std::size_t>(m))
        throw ConfigError("d_min: query length must equal m");
    if (truth_scope.size() < static_cast<std::size_t>(m + 2 * delta))
        throw ConfigError("d_min: search scope too short for m=" + std::to_string(m) +
                          ", delta=" + std::to_string(delta));
    ShiftMatch best{0.0, 0};
    bool have = false;
    // visit 0, -1, +1, -2, +2, ... so strict improvement implements the tie rule
    for (int step = 0; step <= 2 * delta; ++step) {
        const int o = (step % 2 == 1) ? -(step + 1) / 2 : step / 2;
        const auto start = static_cast<std::size_t>(o + delta);
        const double d = window_distance<T>(query, truth_scope.subspan(start, static_cast<std::size_t>(m)));
        if (!have || d < best.distance) {
            best = {d, o};
            have = true;
        }
    }
    return best;
}

// N_train x K table of D_min values. Immutable once built.
class PenaltyMatrix {
public:
    PenaltyMatrix() = default;
    PenaltyMatrix(Matrix values, Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> best_offset,
                  std::vector<std::size_t> sample_rows, WindowSpec window)
        : values_(std::move(values)), best_offset_(std::move(best_offset)), rows_(std::move(sample_rows)),
          window_(window) {}

    const Matrix& values() const noexcept { return values_; }
    const auto& best_offsets() const noexcept { return best_offset_; }
    const std::vector<std::size_t>& sample_rows() const noexcept { return rows_; }
    const WindowSpec& window() const noexcept { return window_; }
    std::size_t samples() const noexcept { return static_cast<std::size_t>(values_.rows()); }
    std::size_t experts() const noexcept { return static_cast<std::size_t>(values_.cols()); }

    // FNV-1a over the raw value bytes; used to confirm staticity during training.
    std::uint64_t content_hash() const noexcept {
        std::uint64_t h = 1469598103934665603ull;
        const auto* bytes = reinterpret_cast<const unsigned char*>(values_.data());
        const auto n = static_cast<std::size_t>(values_.size()) * sizeof(double);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ull;
        }
        return h;
    }

    // A copy with every distance set to zero (test and ablation helper).
    PenaltyMatrix zeroed() const {
        return {Matrix::Zero(values_.rows(), values_.cols()), best_offset_, rows_, window_};
    }

private:
    Matrix values_;
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> best_offset_;
    std::vector<std::size_t> rows_;
    WindowSpec window_;
};

inline PenaltyMatrix build_penalty_matrix(const std::vector<WindowedSample>& samples, std::size_t k,
                                          const WindowSpec& w) {
    validate(w);
    if (samples.empty()) throw EmptyDatasetError("penalty matrix needs at least one windowed sample");
    const auto n = static_cast<Eigen::Index>(samples.size());
    const auto kk = static_cast<Eigen::Index>(k);
    Matrix values(n, kk);
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> offsets(n, kk);
    std::vector<std::size_t> rows;
    rows.reserve(samples.size());
    std::vector<double> query(static_cast<std::size_t>(w.m));
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = samples[static_cast<std::size_t>(i)];
        if (s.query.rows() != kk || s.query.cols() != w.m)
            throw ConfigError("penalty matrix: sample query shape does not match K x m");
        const std::span<const double> scope(s.search_scope.data(), static_cast<std::size_t>(s.search_scope.size()));
        for (Eigen::Index j = 0; j < kk; ++j) {
            for (int q = 0; q < w.m; ++q) query[static_cast<std::size_t>(q)] = s.query(j, q);
            const auto match = d_min<double>(query, scope, w.m, w.delta);
            values(i, j) = match.distance;
            offsets(i, j) = match.offset;
        }
        rows.push_back(s.index);
    }
    return {std::move(values), std::move(offsets), std::move(rows), w};
}

// Delimited dump: row, distances per expert, best offsets per expert.
inline void write_penalty_matrix(std::ostream& out, const PenaltyMatrix& pm,
                                 const std::vector<std::string>& expert_names) {
    out << "row";
    for (const auto& e : expert_names) out << ",dmin_" << e;
    for (const auto& e : expert_names) out << ",tau_" << e;
    out << '\n';
    for (std::size_t i = 0; i < pm.samples(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out << pm.sample_rows()[i];
        for (Eigen::Index j = 0; j < pm.values().cols(); ++j) out << ',' << format_double(pm.values()(r, j));
        for (Eigen::Index j = 0; j < pm.values().cols(); ++j) out << ',' << pm.best_offsets()(r, j);
        out << '\n';
    }
}

} // namespace mpmoe

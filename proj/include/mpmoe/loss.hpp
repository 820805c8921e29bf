#pragma once

// Hybrid objective: (1 - lambda) * MSE + lambda * gate-weighted D_min.

#include <cmath>
#include <span>
#include <string>

#include "mpmoe/error.hpp"
#include "mpmoe/panel.hpp"

namespace mpmoe {

struct LossBreakdown {
    double total = 0.0;
    double mse_term = 0.0;  // mm^2
    double mp_term = 0.0;   // mm
    double lambda = 0.0;

    bool operator==(const LossBreakdown&) const = default;
};

inline void check_lambda(double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw ConfigError("lambda must lie in [0,1], got " + std::to_string(lambda));
}

template <std::floating_point T>
T mse_loss(std::span<const T> predictions, std::span<const T> targets) {
    if (predictions.empty()) throw ConfigError("mse_loss: empty input");
    if (predictions.size() != targets.size()) throw ConfigError("mse_loss: length mismatch");
    T acc = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const T r = predictions[i] - targets[i];
        acc += r * r;
    }
    return acc / static_cast<T>(predictions.size());
}

inline double mse_loss(const Vector& predictions, const Vector& targets) {
    return mse_loss<double>(std::span<const double>(predictions.data(), static_cast<std::size_t>(predictions.size())),
                            std::span<const double>(targets.data(), static_cast<std::size_t>(targets.size())));
}

// Mean over samples of sum_k gate[i,k] * penalty[i,k].
inline double mp_loss(const Matrix& gates, const Matrix& penalties) {
    if (gates.rows() != penalties.rows() || gates.cols() != penalties.cols())
        throw ConfigError("mp_loss: gate matrix shape does not match penalty matrix");
    if (gates.rows() == 0) throw ConfigError("mp_loss: empty input");
    return gates.cwiseProduct(penalties).sum() / static_cast<double>(gates.rows());
}

inline LossBreakdown combine_terms(double mse, double mp, double lambda) {
    check_lambda(lambda);
    // Written so the endpoints reproduce each term bit-exactly.
    double total;
    if (lambda == 0.0) total = mse;
    else if (lambda == 1.0) total = mp;
    else total = (1.0 - lambda) * mse + lambda * mp;
    return {total, mse, mp, lambda};
}

inline LossBreakdown total_loss(const Vector& predictions, const Vector& targets, const Matrix& gates,
                                const Matrix& penalties, double lambda) {
    check_lambda(lambda);
    return combine_terms(mse_loss(predictions, targets), mp_loss(gates, penalties), lambda);
}

} // namespace mpmoe

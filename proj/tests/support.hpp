#pragma once

#include <random>
#include <string>
#include <vector>

#include "mpmoe/mpmoe.hpp"

namespace mpmoe::fixtures {

// Panel with hourly timestamps from epoch hour 0.
inline ForecastPanel make_panel(const std::vector<double>& observed, const std::vector<std::vector<double>>& experts,
                                const std::vector<std::vector<double>>& features) {
    ForecastPanel p;
    const auto n = static_cast<Eigen::Index>(observed.size());
    p.observed = Eigen::Map<const Vector>(observed.data(), n);
    p.experts.resize(n, static_cast<Eigen::Index>(experts.size()));
    for (std::size_t k = 0; k < experts.size(); ++k) {
        p.experts.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Vector>(experts[k].data(), n);
        p.expert_names.push_back("e" + std::to_string(k));
    }
    p.features.resize(n, static_cast<Eigen::Index>(features.size()));
    for (std::size_t j = 0; j < features.size(); ++j) {
        p.features.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Vector>(features[j].data(), n);
        p.feature_names.push_back("f" + std::to_string(j));
    }
    for (Eigen::Index t = 0; t < n; ++t) p.timestamps.push_back(t);
    return p;
}

inline std::vector<double> random_series(std::mt19937_64& rng, std::size_t n, double lo = 0.0, double hi = 5.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

} // namespace mpmoe::fixtures

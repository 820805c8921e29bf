#pragma once

// Synthetic basin generator. Observed rainfall is a stratiform baseline
// (wet/dry Markov episodes with slow AR(1) modulation) plus convective spikes
// (Bernoulli onsets with a fixed temporal profile). Each expert is the
// observed series passed through lag -> smoothing -> bias -> clipped noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "mpmoe/error.hpp"
#include "mpmoe/panel.hpp"

namespace mpmoe {

struct ExpertCorruption {
    std::string name;
    int lag = 0;          // hours; positive = expert arrives late
    int smoothing = 1;    // centred moving-average width, odd
    double bias = 1.0;    // multiplicative
    double noise = 0.0;   // additive Gaussian scale (mm/h), clipped at zero afterwards

    bool operator==(const ExpertCorruption&) const = default;
};

struct StormParams {
    double spike_rate = 0.03;                       // onset probability per hour
    double spike_amplitude_min = 4.0;               // mm/h at the profile peak
    double spike_amplitude_max = 16.0;
    std::vector<double> spike_profile{0.35, 1.0, 0.55, 0.25};
    double stratiform_base = 1.2;                   // mm/h during wet episodes
    double wet_onset_prob = 0.02;
    double wet_end_prob = 0.05;
    int precursor_lead = 2;                         // hours ahead the precursor fires
    double feature_noise = 0.2;

    bool operator==(const StormParams&) const = default;
};

struct SyntheticSpec {
    std::size_t length = 5000;
    EpochHours start = 438288;  // 2020-01-01T00:00Z
    StormParams storm;
    std::vector<ExpertCorruption> experts;

    bool operator==(const SyntheticSpec&) const = default;
};

inline void validate(const SyntheticSpec& s) {
    auto fail = [](const std::string& m) { throw ConfigError("invalid synthetic spec: " + m); };
    const auto& st = s.storm;
    if (s.length < 2) fail("length must be at least 2");
    if (!(st.spike_rate >= 0.0 && st.spike_rate <= 1.0)) fail("spike_rate must lie in [0,1]");
    if (!(st.spike_amplitude_min >= 0.0)) fail("spike amplitudes must be non-negative");
    if (!(st.spike_amplitude_max >= st.spike_amplitude_min)) fail("spike amplitude range is inverted");
    if (st.spike_profile.empty()) fail("spike_profile must be non-empty");
    for (double v : st.spike_profile)
        if (!(v >= 0.0) || !std::isfinite(v)) fail("spike_profile entries must be non-negative");
    if (!(st.stratiform_base >= 0.0)) fail("stratiform_base must be non-negative");
    if (!(st.wet_onset_prob >= 0.0 && st.wet_onset_prob <= 1.0)) fail("wet_onset_prob must lie in [0,1]");
    if (!(st.wet_end_prob >= 0.0 && st.wet_end_prob <= 1.0)) fail("wet_end_prob must lie in [0,1]");
    if (st.precursor_lead < 0) fail("precursor_lead must be non-negative");
    if (!(st.feature_noise >= 0.0)) fail("feature_noise must be non-negative");
    if (s.experts.size() < 2) fail("at least 2 experts are required");
    for (const auto& e : s.experts) {
        if (e.name.empty()) fail("expert names must be non-empty");
        if (e.smoothing < 1 || e.smoothing % 2 == 0)
            fail("expert '" + e.name + "': smoothing width must be a positive odd integer");
        if (!(e.bias >= 0.0)) fail("expert '" + e.name + "': bias must be non-negative");
        if (!(e.noise >= 0.0)) fail("expert '" + e.name + "': noise must be non-negative");
    }
}

// The default evaluation pool: a noisy +2h late expert, a clean peak-shaving
// smoother, a noisy 2h-early expert, a 1h-late light smoother, a wet-biased
// broad smoother and one lagged beyond the default search window.
inline SyntheticSpec standard_spec(std::size_t length = 5000) {
    SyntheticSpec s;
    s.length = length;
    s.storm.spike_amplitude_min = 2.0;
    s.storm.spike_amplitude_max = 8.0;
    s.storm.stratiform_base = 0.8;
    s.experts = {
        {"lag2", 2, 1, 1.2, 0.6},
        {"smooth5", 0, 5, 1.0, 0.1},
        {"early2", -2, 1, 0.8, 0.6},
        {"smooth3", 1, 3, 0.9, 0.2},
        {"wet", 0, 7, 1.5, 0.3},
        {"lag4", 4, 1, 1.0, 0.3},
    };
    return s;
}

namespace detail {

template <class T>
T yaml_get(const YAML::Node& n, const char* key, T fallback) {
    if (!n || !n[key]) return fallback;
    return n[key].as<T>();
}

} // namespace detail

inline SyntheticSpec parse_synthetic_spec(const YAML::Node& root) {
    SyntheticSpec s;
    try {
        s.length = detail::yaml_get<std::size_t>(root, "length", s.length);
        if (root["start"]) {
            auto t = parse_timestamp(root["start"].as<std::string>());
            if (!t) throw ConfigError("invalid synthetic spec: bad start timestamp");
            s.start = *t;
        }
        const YAML::Node st = root["storm"];
        auto& p = s.storm;
        p.spike_rate = detail::yaml_get(st, "spike_rate", p.spike_rate);
        if (st && st["spike_amplitude"]) {
            auto r = st["spike_amplitude"].as<std::vector<double>>();
            if (r.size() != 2) throw ConfigError("invalid synthetic spec: spike_amplitude needs [min, max]");
            p.spike_amplitude_min = r[0];
            p.spike_amplitude_max = r[1];
        }
        p.spike_profile = detail::yaml_get(st, "spike_profile", p.spike_profile);
        p.stratiform_base = detail::yaml_get(st, "stratiform_base", p.stratiform_base);
        p.wet_onset_prob = detail::yaml_get(st, "wet_onset_prob", p.wet_onset_prob);
        p.wet_end_prob = detail::yaml_get(st, "wet_end_prob", p.wet_end_prob);
        p.precursor_lead = detail::yaml_get(st, "precursor_lead", p.precursor_lead);
        p.feature_noise = detail::yaml_get(st, "feature_noise", p.feature_noise);
        if (!root["experts"] || !root["experts"].IsSequence())
            throw ConfigError("invalid synthetic spec: 'experts' list is required");
        for (const auto& e : root["experts"]) {
            ExpertCorruption c;
            c.name = e["name"].as<std::string>();
            c.lag = detail::yaml_get(e, "lag", c.lag);
            c.smoothing = detail::yaml_get(e, "smoothing", c.smoothing);
            c.bias = detail::yaml_get(e, "bias", c.bias);
            c.noise = detail::yaml_get(e, "noise", c.noise);
            s.experts.push_back(std::move(c));
        }
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("invalid synthetic spec: ") + e.what());
    }
    validate(s);
    return s;
}

inline SyntheticSpec load_synthetic_spec(const std::string& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::BadFile&) {
        throw ConfigError("cannot open synthetic spec '" + path + "'");
    } catch (const YAML::Exception& e) {
        throw ConfigError("cannot parse synthetic spec '" + path + "': " + e.what());
    }
    return parse_synthetic_spec(root);
}

// Applies lag, smoothing, bias and clipped noise, in that order.
template <class Rng>
std::vector<double> corrupt(const std::vector<double>& truth, const ExpertCorruption& c, Rng& rng) {
    const auto n = static_cast<std::ptrdiff_t>(truth.size());
    std::vector<double> lagged(truth.size());
    for (std::ptrdiff_t t = 0; t < n; ++t) {
        const auto src = std::clamp<std::ptrdiff_t>(t - c.lag, 0, n - 1);
        lagged[static_cast<std::size_t>(t)] = truth[static_cast<std::size_t>(src)];
    }
    std::vector<double> out(truth.size());
    const int half = c.smoothing / 2;
    for (std::ptrdiff_t t = 0; t < n; ++t) {
        double sum = 0.0;
        int count = 0;
        for (std::ptrdiff_t j = t - half; j <= t + half; ++j) {
            if (j < 0 || j >= n) continue;
            sum += lagged[static_cast<std::size_t>(j)];
            ++count;
        }
        out[static_cast<std::size_t>(t)] = c.smoothing == 1 ? lagged[static_cast<std::size_t>(t)] : sum / count;
    }
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& v : out) {
        v *= c.bias;
        if (c.noise > 0.0) v = std::max(0.0, v + c.noise * gauss(rng));
    }
    return out;
}

// Deterministic for a fixed (spec, seed).
inline ForecastPanel generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    validate(spec);
    const auto& st = spec.storm;
    const std::size_t n = spec.length;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Stratiform baseline.
    std::vector<double> baseline(n, 0.0);
    bool wet = false;
    double ar = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        wet = wet ? unif(rng) >= st.wet_end_prob : unif(rng) < st.wet_onset_prob;
        ar = 0.9 * ar + 0.3 * gauss(rng);
        if (wet) baseline[t] = std::max(0.0, st.stratiform_base * (1.0 + 0.5 * ar));
    }

    // Convective spikes.
    std::vector<double> spikes(n, 0.0);
    std::vector<std::size_t> onsets;
    const std::size_t plen = st.spike_profile.size();
    for (std::size_t t = 0; t < n; ++t) {
        if (unif(rng) >= st.spike_rate) continue;
        const double amp = st.spike_amplitude_min +
                           (st.spike_amplitude_max - st.spike_amplitude_min) * unif(rng);
        onsets.push_back(t);
        for (std::size_t j = 0; j < plen && t + j < n; ++j) spikes[t + j] += amp * st.spike_profile[j];
    }

    std::vector<double> observed(n);
    for (std::size_t t = 0; t < n; ++t) observed[t] = baseline[t] + spikes[t];

    // Precursor fires while a spike is active or starts within the lead.
    std::vector<double> precursor(n, 0.0);
    for (auto o : onsets) {
        const std::size_t lo = o >= static_cast<std::size_t>(st.precursor_lead) ? o - st.precursor_lead : 0;
        for (std::size_t t = lo; t < std::min(n, o + plen); ++t) precursor[t] = 1.0;
    }

    ForecastPanel p;
    p.timestamps.resize(n);
    for (std::size_t t = 0; t < n; ++t) p.timestamps[t] = spec.start + static_cast<EpochHours>(t);

    const auto ni = static_cast<Eigen::Index>(n);
    const auto k = static_cast<Eigen::Index>(spec.experts.size());
    p.experts.resize(ni, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const auto& c = spec.experts[static_cast<std::size_t>(j)];
        std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                         static_cast<std::uint32_t>(j + 1)};
        std::mt19937_64 erng(ss);
        auto col = corrupt(observed, c, erng);
        for (Eigen::Index t = 0; t < ni; ++t) p.experts(t, j) = col[static_cast<std::size_t>(t)];
        p.expert_names.push_back(c.name);
    }

    p.feature_names = {"baseline_lag1", "convective_precursor", "humidity", "diurnal_sin", "diurnal_cos"};
    p.features.resize(ni, 5);
    constexpr double two_pi = 6.283185307179586;
    for (std::size_t t = 0; t < n; ++t) {
        const auto r = static_cast<Eigen::Index>(t);
        const double hour = static_cast<double>(((p.timestamps[t] % 24) + 24) % 24);
        p.features(r, 0) = baseline[t == 0 ? 0 : t - 1];
        p.features(r, 1) = precursor[t];
        p.features(r, 2) = (baseline[t] > 0.0 ? 1.0 : 0.0) + 0.5 * precursor[t] + st.feature_noise * gauss(rng);
        p.features(r, 3) = std::sin(two_pi * hour / 24.0);
        p.features(r, 4) = std::cos(two_pi * hour / 24.0);
    }
    p.observed = Eigen::Map<Vector>(observed.data(), ni);
    return p;
}

} // namespace mpmoe

#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

using namespace mpmoe;

namespace {

SyntheticSpec small_spec(std::vector<ExpertCorruption> experts, std::size_t n = 600) {
    SyntheticSpec s;
    s.length = n;
    s.experts = std::move(experts);
    return s;
}

} // namespace

TEST(Synthetic, IdentityCorruptionReproducesObserved) {
    const auto p = generate_synthetic(small_spec({{"a", 0, 1, 1.0, 0.0}, {"b", 0, 1, 1.0, 0.0}}), 3);
    EXPECT_EQ(Vector(p.experts.col(0)), p.observed);
    EXPECT_EQ(Vector(p.experts.col(1)), p.observed);
}

TEST(Synthetic, LagShiftsTheSeriesExactly) {
    const auto p = generate_synthetic(small_spec({{"late", 2, 1, 1.0, 0.0}, {"early", -3, 1, 1.0, 0.0}}), 4);
    const auto n = static_cast<Eigen::Index>(p.rows());
    for (Eigen::Index t = 2; t < n; ++t) EXPECT_EQ(p.experts(t, 0), p.observed(t - 2));
    for (Eigen::Index t = 0; t + 3 < n; ++t) EXPECT_EQ(p.experts(t, 1), p.observed(t + 3));
    // edges repeat the first / last available value
    EXPECT_EQ(p.experts(0, 0), p.observed(0));
    EXPECT_EQ(p.experts(n - 1, 1), p.observed(n - 1));
}

TEST(Synthetic, SmoothingIsCentredMovingAverageThenBias) {
    const auto p = generate_synthetic(small_spec({{"s", 0, 3, 0.5, 0.0}, {"x", 0, 1, 1.0, 0.0}}), 5);
    for (Eigen::Index t = 1; t + 1 < static_cast<Eigen::Index>(p.rows()); ++t)
        EXPECT_NEAR(p.experts(t, 0), 0.5 * (p.observed(t - 1) + p.observed(t) + p.observed(t + 1)) / 3.0, 1e-12);
    EXPECT_NEAR(p.experts(0, 0), 0.5 * (p.observed(0) + p.observed(1)) / 2.0, 1e-12);
}

TEST(Synthetic, NoiseIsClippedAtZero) {
    const auto p = generate_synthetic(small_spec({{"n", 0, 1, 1.0, 3.0}, {"x", 0, 1, 1.0, 0.0}}), 6);
    EXPECT_GE(p.experts.minCoeff(), 0.0);
    EXPECT_EQ((p.experts.col(0).array() == 0.0).count() > 0, true);
}

TEST(Synthetic, DeterministicPerSeedAndSeedSensitive) {
    const auto spec = standard_spec(800);
    EXPECT_EQ(generate_synthetic(spec, 9), generate_synthetic(spec, 9));
    EXPECT_FALSE(generate_synthetic(spec, 9) == generate_synthetic(spec, 10));
}

TEST(Synthetic, ObservedIsNonNegativeAndHourly) {
    const auto p = generate_synthetic(standard_spec(), 7);
    EXPECT_NO_THROW(validate(p));
    EXPECT_EQ(p.rows(), 5000u);
    EXPECT_EQ(p.num_experts(), 6u);
    EXPECT_GE(p.observed.minCoeff(), 0.0);
}

TEST(Synthetic, PrecursorLeadsEverySpike) {
    // With no stratiform rain, observed > 0 only inside spikes; each spike is
    // preceded by `precursor_lead` hours of precursor signal.
    auto spec = small_spec({{"a", 0, 1, 1.0, 0.0}, {"b", 0, 1, 1.0, 0.0}}, 2000);
    spec.storm.stratiform_base = 0.0;
    spec.storm.spike_amplitude_min = 1.0;
    const auto p = generate_synthetic(spec, 12);
    for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(p.rows()); ++t) {
        if (p.observed(t) <= 0.0) continue;
        EXPECT_EQ(p.features(t, 1), 1.0) << "row " << t;
        if (t >= 2 && p.observed(t - 1) == 0.0) {
            EXPECT_EQ(p.features(t - 1, 1), 1.0);
            EXPECT_EQ(p.features(t - 2, 1), 1.0);
        }
    }
}

TEST(Synthetic, StandardSuiteContainsRequiredCorruptions) {
    const auto s = standard_spec();
    EXPECT_EQ(s.length, 5000u);
    ASSERT_EQ(s.experts.size(), 6u);
    bool lag2 = false, smoother = false;
    for (const auto& e : s.experts) {
        lag2 |= e.lag == 2;
        smoother |= e.smoothing > 1 && e.lag == 0;
    }
    EXPECT_TRUE(lag2);
    EXPECT_TRUE(smoother);
}

TEST(Synthetic, ShippedStandardConfigMatchesBuiltIn) {
    const auto spec = load_synthetic_spec(std::string(MPMOE_SOURCE_DIR) + "/configs/standard.yaml");
    EXPECT_EQ(spec, standard_spec());
}

TEST(Synthetic, YamlParsing) {
    const auto spec = parse_synthetic_spec(YAML::Load(R"(
length: 50
start: "2021-06-01T00:00:00Z"
storm: {spike_rate: 0.1, spike_amplitude: [1, 2]}
experts:
  - {name: a, lag: 1}
  - {name: b, smoothing: 3, bias: 0.5, noise: 0.2}
)"));
    EXPECT_EQ(spec.length, 50u);
    EXPECT_EQ(spec.storm.spike_rate, 0.1);
    EXPECT_EQ(spec.storm.spike_amplitude_max, 2.0);
    EXPECT_EQ(spec.experts[0].lag, 1);
    EXPECT_EQ(spec.experts[1].smoothing, 3);
    EXPECT_EQ(format_timestamp(spec.start), "2021-06-01T00:00:00Z");
}

TEST(Synthetic, InvalidSpecsAreRejected) {
    EXPECT_THROW(generate_synthetic(small_spec({{"a", 0, 1, 1.0, 0.0}}), 0), ConfigError);
    EXPECT_THROW(generate_synthetic(small_spec({{"a", 0, 2, 1.0, 0.0}, {"b", 0, 1, 1.0, 0.0}}), 0), ConfigError);
    EXPECT_THROW(generate_synthetic(small_spec({{"a", 0, 1, -1.0, 0.0}, {"b", 0, 1, 1.0, 0.0}}), 0), ConfigError);
    EXPECT_THROW(load_synthetic_spec("/nonexistent/spec.yaml"), ConfigError);
    EXPECT_THROW(parse_synthetic_spec(YAML::Load("experts: 3")), ConfigError);
}

TEST(Synthetic, WrittenPanelLoadsBackEqual) {
    const auto p = generate_synthetic(standard_spec(300), 1);
    std::stringstream ss;
    write_panel(ss, p);
    EXPECT_EQ(load_panel(ss).panel, p);
}

#include <gtest/gtest.h>

#include <algorithm>

#include "oracles.hpp"
#include "support.hpp"

using namespace mpmoe;

TEST(MseLoss, Examples) {
    const Vector p = Vector::Zero(2);
    Vector y(2);
    y << 1, 3;
    EXPECT_EQ(mse_loss(p, y), 5.0);
    EXPECT_EQ(mse_loss(y, y), 0.0);
}

TEST(MseLoss, PermutationInvariant) {
    std::mt19937_64 rng(1);
    auto a = fixtures::random_series(rng, 9), b = fixtures::random_series(rng, 9);
    const double before = mse_loss<double>(a, b);
    std::vector<std::size_t> idx(9);
    for (std::size_t i = 0; i < 9; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<double> pa(9), pb(9);
    for (std::size_t i = 0; i < 9; ++i) {
        pa[i] = a[idx[i]];
        pb[i] = b[idx[i]];
    }
    EXPECT_NEAR(mse_loss<double>(pa, pb), before, 1e-12);
}

TEST(MseLoss, RejectsBadInput) {
    const std::vector<double> a{1, 2}, b{1};
    EXPECT_THROW(mse_loss<double>(a, b), ConfigError);
    EXPECT_THROW(mse_loss<double>(std::span<const double>{}, std::span<const double>{}), ConfigError);
}

TEST(MpLoss, Examples) {
    Matrix g(2, 2), d(2, 2);
    g << 0.5, 0.5, 1, 0;
    d << 2, 4, 6, 8;
    EXPECT_EQ(mp_loss(g, d), 4.5);
    EXPECT_EQ(mp_loss(g, Matrix::Zero(2, 2)), 0.0);
    Matrix one_hot(2, 2);
    one_hot << 0, 1, 1, 0;
    EXPECT_EQ(mp_loss(one_hot, d), (4.0 + 6.0) / 2.0);
    EXPECT_THROW(mp_loss(g, Matrix::Zero(3, 2)), ConfigError);
}

TEST(MpLoss, LinearInTheGates) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 1);
    for (int rep = 0; rep < 50; ++rep) {
        Matrix g1 = Matrix::NullaryExpr(6, 3, [&] { return u(rng); });
        Matrix g2 = Matrix::NullaryExpr(6, 3, [&] { return u(rng); });
        Matrix d = Matrix::NullaryExpr(6, 3, [&] { return 5 * u(rng); });
        const double a = u(rng);
        EXPECT_NEAR(mp_loss(a * g1 + (1 - a) * g2, d), a * mp_loss(g1, d) + (1 - a) * mp_loss(g2, d), 1e-12);
    }
}

TEST(TotalLoss, EndpointsAreExact) {
    const double mse = 0.1 + 0.2, mp = 1.0 / 3.0;
    EXPECT_EQ(combine_terms(mse, mp, 0.0).total, mse);
    EXPECT_EQ(combine_terms(mse, mp, 1.0).total, mp);
    EXPECT_DOUBLE_EQ(combine_terms(10, 5, 0.6).total, 7.0);
}

TEST(TotalLoss, IsAConvexCombinationOfTheTerms) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 10);
    for (int rep = 0; rep < 200; ++rep) {
        const double a = u(rng), b = u(rng), l = u(rng) / 10.0;
        const auto r = combine_terms(a, b, l);
        EXPECT_GE(r.total, std::min(a, b) - 1e-12);
        EXPECT_LE(r.total, std::max(a, b) + 1e-12);
        EXPECT_EQ(r.mse_term, a);
        EXPECT_EQ(r.mp_term, b);
        EXPECT_EQ(r.lambda, l);
    }
}

TEST(TotalLoss, LambdaOutsideUnitIntervalIsRejected) {
    EXPECT_THROW(combine_terms(1, 1, -0.01), ConfigError);
    EXPECT_THROW(combine_terms(1, 1, 1.5), ConfigError);
    EXPECT_THROW(check_lambda(std::nan("")), ConfigError);
}

TEST(TotalLoss, AssemblesBothTerms) {
    Vector p(2), y(2);
    p << 0, 0;
    y << 1, 3;
    Matrix g(2, 2), d(2, 2);
    g << 0.5, 0.5, 1, 0;
    d << 2, 4, 6, 8;
    const auto r = total_loss(p, y, g, d, 0.6);
    EXPECT_EQ(r.mse_term, 5.0);
    EXPECT_EQ(r.mp_term, 4.5);
    EXPECT_DOUBLE_EQ(r.total, 0.4 * 5.0 + 0.6 * 4.5);
}

TEST(DoublePenalty, ShiftedSpikeIsChargedByMseButNotByMp) {
    for (int s = 1; s <= 3; ++s) {
        const auto c = oracle::double_penalty_case(40, 20, s, 6.0, 3, 3);
        EXPECT_GT(c.mse, 0.0) << "shift " << s;
        EXPECT_EQ(c.mp, 0.0) << "shift " << s;
    }
    // beyond the search window the shape term also charges the displacement
    const auto far = oracle::double_penalty_case(40, 20, 5, 6.0, 3, 3);
    EXPECT_GT(far.mp, 0.0);
}

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "invlab/estimators.hpp"
#include "invlab/rng.hpp"

using namespace invlab;

TEST(Estimators, ConstantSampleHasZeroError) {
    const std::vector<double> x(50, 3.0);
    const auto e = expect_Q(x);
    EXPECT_DOUBLE_EQ(e.mean, 3.0);
    EXPECT_EQ(e.std_error, 0.0);
    EXPECT_EQ(e.n, 50u);
}

TEST(Estimators, BernoulliMean) {
    PathRng r(17, 0, RngPurpose::Oracle);
    std::vector<double> x(10000);
    for (double& v : x) v = r.uniform() < 0.5 ? 1.0 : 0.0;
    const auto e = expect_Q(x);
    EXPECT_NEAR(e.mean, 0.5, 3 * 0.005);
    EXPECT_NEAR(e.std_error, 0.005, 1e-4);
}

TEST(Estimators, EmptyAndNonFiniteSamplesThrow) {
    EXPECT_THROW(expect_Q(std::vector<double>{}), PreconditionError);
    EXPECT_THROW(expect_Q(std::vector<double>{1.0, NAN}), NumericError);
}

TEST(Estimators, UnitDensityReproducesPlainMean) {
    PathRng r(1, 0, RngPurpose::Oracle);
    std::vector<double> x(1000), w(1000, 1.0);
    for (double& v : x) v = r.normal();
    const auto a = expect_Q(x);
    const auto b = expect_P(x, w);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.std_error, b.std_error);
    EXPECT_EQ(b.weight_kind, WeightKind::Invariance);
}

TEST(Estimators, ConstantPayoffNormalizesToOne) {
    const std::vector<double> x(4, 1.0), w{0.5, 2.0, 1.0, 0.1};
    EXPECT_DOUBLE_EQ(expect_P(x, w).mean, 1.0);
    const std::vector<double> G{0.1, 0.2, 0.3, 0.4};
    const std::vector<unsigned char> alive{1, 0, 1, 1};
    EXPECT_DOUBLE_EQ(expect_survival(x, G, alive).mean, 1.0);
}

TEST(Estimators, NonPositiveDensityIsAModelViolation) {
    const std::vector<double> x(3, 1.0), w{1.0, 0.0, 2.0};
    EXPECT_THROW(expect_P(x, w), ModelError);
}

// Self-normalized estimate of E_P[X] with dP/dQ = w: exact value for X = Z,
// w = exp(Z - 1/2) under Z ~ N(0,1) is 1 (the tilted mean).
TEST(Estimators, ExponentialTiltRecoversShiftedMean) {
    PathRng r(2, 0, RngPurpose::Oracle);
    const int n = 200000;
    std::vector<double> x(n), w(n);
    for (int i = 0; i < n; ++i) {
        x[i] = r.normal();
        w[i] = std::exp(x[i] - 0.5);
    }
    const auto e = expect_P(x, w);
    EXPECT_LT(std::abs(e.mean - 1.0), 4 * e.std_error);
}

TEST(Estimators, PairedComparisonUsesCorrelation) {
    PathRng r(3, 0, RngPurpose::Oracle);
    const int n = 10000;
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
        a[i] = r.normal();
        b[i] = a[i] + 0.01 * r.normal();
    }
    const auto c = compare_paired(a, {}, b, {});
    EXPECT_LT(c.se_diff, 0.05 * c.se_lhs);
    EXPECT_LT(std::abs(c.z), 4.0);
    EXPECT_NEAR(c.diff(), c.lhs - c.rhs, 0.0);
}

TEST(Estimators, IdenticalSidesGiveZeroZ) {
    const std::vector<double> a{1, 2, 3};
    const auto c = compare_paired(a, {}, a, {});
    EXPECT_EQ(c.z, 0.0);
}

TEST(DriftTest, ConstantProcessPasses) {
    const std::vector<double> w;
    const auto r = martingale_drift_test(100, 10, [](std::size_t, std::size_t) { return 0.0; }, w);
    EXPECT_TRUE(r.pass);
    EXPECT_EQ(r.max_abs_z, 0.0);
    for (double z : r.z) EXPECT_EQ(z, 0.0);
}

TEST(DriftTest, PureDriftFails) {
    const std::vector<double> w;
    const auto r = martingale_drift_test(2, 10, [](std::size_t, std::size_t) { return 0.1; }, w);
    EXPECT_FALSE(r.pass);
    EXPECT_TRUE(std::isinf(r.max_abs_z));
}

TEST(DriftTest, SingleSampleIsInconclusive) {
    const std::vector<double> w;
    const auto r = martingale_drift_test(1, 3, [](std::size_t, std::size_t) { return 0.0; }, w);
    EXPECT_FALSE(r.pass);
    EXPECT_EQ(r.inconclusive_steps, 3u);
}

TEST(DriftTest, BrownianIncrementsPassAndDriftedOnesFail) {
    const std::size_t n = 20000, steps = 20;
    std::vector<double> z(n * steps);
    PathRng r(4, 0, RngPurpose::Oracle);
    for (double& v : z) v = r.normal() * 0.1;
    const std::vector<double> w;
    const auto ok = martingale_drift_test(n, steps, [&](std::size_t p, std::size_t i) { return z[p * steps + i]; }, w);
    EXPECT_TRUE(ok.pass) << ok.max_abs_z;
    const auto bad =
        martingale_drift_test(n, steps, [&](std::size_t p, std::size_t i) { return z[p * steps + i] + 0.01; }, w);
    EXPECT_FALSE(bad.pass);
    EXPECT_GT(bad.family_false_alarm_bound(), 0.0);
}

TEST(Binning, EqualMassAndDeterministic) {
    std::vector<double> v{5, 1, 3, 3, 2, 4, 0, 6};
    std::vector<unsigned char> sel{1, 1, 1, 1, 1, 1, 1, 0};
    const auto b = equal_mass_bins(v, sel, 2);
    EXPECT_EQ(b[7], -1);
    EXPECT_EQ(b[6], 0);
    EXPECT_EQ(b[1], 0);
    EXPECT_EQ(b[4], 0);
    EXPECT_EQ(b[0], 1);
    int count0 = 0;
    for (int x : b) count0 += x == 0;
    EXPECT_EQ(count0, 4);
}

TEST(Summation, PairwiseAndCompensatedAgree) {
    std::vector<double> x(100001, 0.1);
    CompensatedSum c;
    for (double v : x) c.add(v);
    EXPECT_NEAR(pairwise_sum(x), 10000.1, 1e-8);
    EXPECT_NEAR(c.value(), 10000.1, 1e-10);
}

TEST(DriftTest, SymmetricIncrementsKeepStudentizedValue) {
    // +-1 around a shifted mean: zero third moment, so the statistic is the plain t
    const std::size_t n = 1000;
    const auto inc = [](std::size_t p, std::size_t) { return (p % 2 ? 1.0 : -1.0) + 0.01; };
    const std::vector<double> unit;
    const auto r = martingale_drift_test(n, 1, inc, unit);
    const double se = std::sqrt(1.0 * n / (n - 1.0) / n);
    EXPECT_NEAR(r.z[0], 0.01 / se, 1e-9);
}

TEST(DriftTest, SkewedIncrementsAreCalibrated) {
    // compensated rare jumps: lambda dt = 0.005, exponential marks
    const std::size_t n = 20000, steps = 400;
    PathRng rng(12, 0, RngPurpose::Jumps);
    std::vector<double> x(n * steps);
    for (auto& v : x) {
        v = -0.005;
        if (rng.uniform() < 0.005) v += -std::log(rng.uniform());
    }
    const std::vector<double> unit;
    const auto r = martingale_drift_test(n, steps, [&](std::size_t p, std::size_t i) { return x[p * steps + i]; },
                                         unit);
    double s2 = 0.0;
    for (double z : r.z) s2 += z * z;
    EXPECT_NEAR(s2 / steps, 1.0, 0.25);
    EXPECT_TRUE(r.pass) << r.max_abs_z;
}

TEST(PairedComparison, SecondMomentFloorsUnobservedRareEvent) {
    // no event observed on the lhs while the rhs says the rate is 1e-3
    const std::size_t n = 10000;
    std::vector<double> lhs(n, 0.0), rhs(n, 1e-3);
    rhs[0] = 1.1e-3;
    const auto plain = compare_paired(lhs, {}, rhs, {});
    const auto floored = compare_paired(lhs, {}, rhs, {}, 1e-3);
    EXPECT_GT(std::abs(plain.z), 100.0);
    // Var = 1e-3 - 1e-6 per sample
    EXPECT_NEAR(floored.se_diff, std::sqrt((1e-3 - 1e-6) / n), 1e-6);
    EXPECT_LT(std::abs(floored.z), 4.0);
}

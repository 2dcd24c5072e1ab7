#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "invlab/rng.hpp"
#include "invlab/time_grid.hpp"

using namespace invlab;

TEST(Philox, SameKeyAndCounterGiveSameBlock) {
    const auto a = Philox4x32::generate({1, 2, 3, 4}, {5, 6});
    const auto b = Philox4x32::generate({1, 2, 3, 4}, {5, 6});
    EXPECT_EQ(a, b);
    const auto c = Philox4x32::generate({1, 2, 3, 5}, {5, 6});
    EXPECT_NE(a, c);
}

TEST(PathRng, StreamsAreReproducibleAndDistinct) {
    PathRng a(42, 7, RngPurpose::Diffusion);
    PathRng b(42, 7, RngPurpose::Diffusion);
    PathRng c(42, 7, RngPurpose::Tail);
    PathRng d(42, 8, RngPurpose::Diffusion);
    for (int i = 0; i < 100; ++i) {
        const double x = a.normal();
        EXPECT_EQ(x, b.normal());
        EXPECT_NE(x, c.normal());
        EXPECT_NE(x, d.normal());
    }
}

TEST(PathRng, UniformStaysInOpenInterval) {
    PathRng r(1, 0, RngPurpose::Oracle);
    for (int i = 0; i < 100000; ++i) {
        const double u = r.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST(PathRng, NormalMoments) {
    PathRng r(3, 11, RngPurpose::Oracle);
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        s += z;
        s2 += z * z;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    EXPECT_LT(std::abs(mean), 4.0 / std::sqrt(n));
    EXPECT_LT(std::abs(var - 1.0), 4.0 * std::sqrt(2.0 / n));
}

TEST(TimeGrid, UniformGridEndpoints) {
    const TimeGrid g = TimeGrid::uniform(2.0, 4);
    EXPECT_EQ(g.n_steps(), 4u);
    EXPECT_EQ(g[0], 0.0);
    EXPECT_EQ(g.horizon(), 2.0);
    EXPECT_DOUBLE_EQ(g.dt(1), 0.5);
}

TEST(TimeGrid, RejectsInvalidGrids) {
    EXPECT_THROW(TimeGrid({0.0}), ConfigError);
    EXPECT_THROW(TimeGrid({0.1, 1.0}), ConfigError);
    EXPECT_THROW(TimeGrid({0.0, 0.5, 0.5, 1.0}), ConfigError);
    EXPECT_THROW(TimeGrid::uniform(1.0, 0), ConfigError);
    EXPECT_THROW(TimeGrid::uniform(-1.0, 3), ConfigError);
}

TEST(TimeGrid, NonUniformSpacingAccepted) {
    const TimeGrid g({0.0, 0.1, 0.5, 1.0});
    EXPECT_EQ(g.n_steps(), 3u);
    EXPECT_DOUBLE_EQ(g.dt(1), 0.4);
}

TEST(TimeGrid, StepContainingUsesLeftOpenSteps) {
    const TimeGrid g = TimeGrid::uniform(1.0, 4);
    EXPECT_EQ(g.step_containing(0.1), 0u);
    EXPECT_EQ(g.step_containing(0.25), 0u);
    EXPECT_EQ(g.step_containing(0.2500001), 1u);
    EXPECT_EQ(g.step_containing(1.0), 3u);
    EXPECT_THROW(g.step_containing(0.0), DomainError);
    EXPECT_EQ(g.nearest_index(0.3), 1u);
    EXPECT_EQ(g.nearest_index(5.0), 4u);
}

TEST(TimeGrid, RefinementKeepsCoarsePoints) {
    const TimeGrid g({0.0, 0.2, 1.0});
    const TimeGrid f = g.refined();
    ASSERT_EQ(f.n_steps(), 4u);
    EXPECT_EQ(f[2], 0.2);
    EXPECT_EQ(f[1], 0.1);
    EXPECT_EQ(f[3], 0.6);
}

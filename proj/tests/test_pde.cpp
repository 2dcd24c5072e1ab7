#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "invlab/pde.hpp"

using namespace invlab;

namespace {

ModelConfig cox(double c) {
    ModelConfig m;
    m.kind = ModelKind::Cox;
    m.cox_hazard.c0 = c;
    return m;
}

// Q(tau <= T | tau > t, m_t = m) in the copula model
double dgc_default_probability(const HazardModel& h, double t, double m) {
    const double T = h.horizon();
    const double a_t = h.config().psi.inverse(t), a_T = h.config().psi.inverse(T);
    const double nu = h.nu(t);
    return 1.0 - special::norm_cdf((m - a_T) / nu) / special::norm_cdf((m - a_t) / nu);
}

// int_t^T c e^{-c(s-t)} Phi(m / sqrt(V(t,s))) ds by composite Simpson
double cox_indicator_value(const HazardModel& h, double c, double t, double m) {
    const int n = 4000;
    const double T = h.horizon(), dt = (T - t) / n;
    double s = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double u = t + k * dt;
        const double v = h.variance_between(t, u);
        const double G = v > 0.0 ? special::norm_cdf(m / std::sqrt(v)) : (m > 0.0 ? 1.0 : 0.0);
        const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        s += w * c * std::exp(-c * (u - t)) * G;
    }
    return s * dt / 3.0;
}

std::size_t node_of(const PDESolution& s, double t) {
    for (std::size_t k = 0; k < s.grid.n_times(); ++k) {
        if (std::abs(s.grid.times[k] - t) < 1e-12) return k;
    }
    throw std::runtime_error("no time node");
}

}  // namespace

TEST(CellAverage, ExactForPiecewiseFamilies) {
    const StateFunction fs[] = {StateFunction::positive_indicator(2.0), StateFunction::capped_positive(0.3),
                                StateFunction::sign(), StateFunction::constant(0.4)};
    for (const auto& G : fs) {
        for (const auto& [l, r] : {std::pair{-0.2, 0.1}, std::pair{0.05, 0.5}, std::pair{-1.0, -0.5}}) {
            const int n = 300000;
            double s = 0.0;
            for (int k = 0; k < n; ++k) s += G(0.0, l + (k + 0.5) * (r - l) / n);
            EXPECT_NEAR(G.cell_average(0.0, l, r), s / n, 1e-5) << G.name() << " " << l << " " << r;
        }
    }
}

TEST(Tridiagonal, SolvesGeneralSystem) {
    // rows: [2 1 0; -1 3 1; 0 2 4] x = [4, 8, 16] -> x = (1, 2, 3)
    std::vector<double> rhs{4.0, 8.0, 16.0};
    detail::thomas_general({0.0, -1.0, 2.0}, {2.0, 3.0, 4.0}, {1.0, 1.0, 0.0}, rhs);
    EXPECT_NEAR(rhs[0], 1.0, 1e-14);
    EXPECT_NEAR(rhs[1], 2.0, 1e-14);
    EXPECT_NEAR(rhs[2], 3.0, 1e-14);
}

TEST(FeynmanKac, ZeroPayoffGivesZero) {
    const HazardModel h{ModelConfig{}};
    const auto s = solve_feynman_kac(h, StateFunction::zero(), TimeGrid::uniform(1.0, 50));
    EXPECT_EQ(s.max_abs(), 0.0);
}

TEST(FeynmanKac, CopulaDefaultProbabilityClosedForm) {
    const HazardModel h{ModelConfig{}};
    const TimeGrid g = TimeGrid::uniform(1.0, 200);
    const auto s = solve_feynman_kac(h, StateFunction::constant(1.0), g);
    const auto f = solve_feynman_kac(h, StateFunction::constant(1.0), g, halved(PDEOptions{}));
    EXPECT_NEAR(s.value(0, 0.0), 0.5, 1e-5);
    const auto max_err = [&](const PDESolution& sol, double t) {
        const std::size_t k = node_of(sol, t);
        double err = 0.0;
        for (std::size_t j = 0; j < sol.grid.n_m; ++j) {
            const double m = sol.grid.m(j);
            if (std::abs(m) <= 3.0) err = std::max(err, std::abs(sol.at(k, j) - dgc_default_probability(h, t, m)));
        }
        return err;
    };
    for (double t : {0.25, 0.5, 0.9}) {
        const double coarse = max_err(s, t), fine = max_err(f, t);
        EXPECT_LT(coarse, 5e-4) << t;
        // second order: halving t and m cuts the error about fourfold
        EXPECT_LT(fine, coarse / 3.0) << t;
    }
    for (std::size_t j = 0; j < s.grid.n_m; ++j) EXPECT_EQ(s.at(s.grid.n_times() - 1, j), 0.0);
}

TEST(FeynmanKac, CoxClosedForms) {
    const double c = 0.1;
    const HazardModel h(cox(c));
    const TimeGrid g = TimeGrid::uniform(1.0, 200);
    const auto one = solve_feynman_kac(h, StateFunction::constant(1.0), g);
    for (double t : {0.0, 0.5}) {
        EXPECT_NEAR(one.value(node_of(one, t), 0.7), 1.0 - std::exp(-c * (1.0 - t)), 1e-7);
    }
    const auto ind = solve_feynman_kac(h, StateFunction::positive_indicator(), g);
    // symmetric factor: u(0, 0) is half the default probability
    EXPECT_NEAR(ind.value(0, 0.0), 0.5 * (1.0 - std::exp(-c)), 1e-6);
    for (double m : {-0.8, -0.1, 0.3, 1.2}) {
        EXPECT_NEAR(ind.value(node_of(ind, 0.5), m), cox_indicator_value(h, c, 0.5, m), 2e-5) << m;
    }
}

TEST(FeynmanKac, RichardsonRatioIsFourForCrankNicolson) {
    PDEOptions o;
    o.n_m = 101;
    for (const ModelConfig& m : {ModelConfig{}, cox(0.1)}) {
        const auto e = pde_richardson_probe(HazardModel(m), StateFunction::smooth_step(0.5), TimeGrid::uniform(1.0, 50), o);
        EXPECT_TRUE(e.pass) << e.lhs;
        EXPECT_NEAR(e.lhs, 4.0, 0.5);
    }
}

TEST(FeynmanKac, RichardsonRatioIsTwoForImplicitEuler) {
    PDEOptions o;
    o.theta = 1.0;
    // time error dominates the first-order scheme once m is fine enough
    o.n_m = 801;
    const auto e =
        pde_richardson_probe(HazardModel(ModelConfig{}), StateFunction::smooth_step(0.5), TimeGrid::uniform(1.0, 10), o);
    EXPECT_NEAR(e.lhs, 2.0, 0.5);
    EXPECT_FALSE(e.pass);
}

TEST(FeynmanKac, MaximumPrincipleHolds) {
    const HazardModel h{ModelConfig{}};
    for (const auto& G : {StateFunction::positive_indicator(), StateFunction::sign(), StateFunction::capped_positive(0.5)}) {
        const auto s = solve_feynman_kac(h, G, TimeGrid::uniform(1.0, 200));
        const auto e = maximum_principle_check(s, G);
        EXPECT_TRUE(e.pass) << G.name() << " " << e.details.dump();
    }
    PDESolution fake;
    fake.u = {0.2, 1.5};
    EXPECT_FALSE(maximum_principle_check(fake, StateFunction::positive_indicator()).pass);
}

TEST(FeynmanKac, ExplicitSchemeChecksStability) {
    const HazardModel h{ModelConfig{}};
    PDEOptions ex;
    ex.theta = 0.0;
    EXPECT_THROW(solve_feynman_kac(h, StateFunction::constant(1.0), TimeGrid::uniform(1.0, 200), ex),
                 PreconditionError);
    ex.n_m = 101;
    ex.time_refinement = 4;
    const auto s = solve_feynman_kac(h, StateFunction::constant(1.0), TimeGrid::uniform(1.0, 200), ex);
    EXPECT_NEAR(s.value(0, 0.0), 0.5, 1e-3);
}

TEST(FeynmanKac, OptionsValidated) {
    PDEOptions o;
    o.width_sd = 4.0;
    EXPECT_THROW(solve_feynman_kac(HazardModel(ModelConfig{}), StateFunction::constant(1.0), TimeGrid::uniform(1.0, 10), o),
                 ConfigError);
    EXPECT_EQ(PDEOptions{}.n_m >= 200, true);
}

TEST(Semigroup, CoxGaussianTransition) {
    const HazardModel h(cox(0.1));
    const TimeGrid g = TimeGrid::uniform(1.0, 100);
    const auto s = propagate(h, StateFunction::positive_indicator(), g, 50, 100);
    const double v = h.variance_between(0.5, 1.0);
    double err = 0.0;
    for (std::size_t j = 0; j < s.grid.n_m; ++j) {
        const double m = s.grid.m(j);
        if (std::abs(m) <= 3.0) err = std::max(err, std::abs(s.at(50, j) - special::norm_cdf(m / std::sqrt(v))));
    }
    EXPECT_LT(err, 2e-4);
    // constants are preserved by the unkilled semigroup
    const auto one = propagate(h, StateFunction::constant(1.0), g, 0, 100);
    for (std::size_t j = 0; j < one.grid.n_m; ++j) EXPECT_NEAR(one.at(0, j), 1.0, 1e-12);
}

namespace {

const Scenario& dgc_scenario() {
    static const auto sc = Scenario::make(ModelConfig{}, TimeGrid::uniform(1.0, 100), 40000, 71);
    return *sc;
}

}  // namespace

TEST(Semigroup, CopulaModelAgreesWithPaths) {
    for (const auto& h : {StateFunction::positive_indicator(), StateFunction::smooth_step(0.5)}) {
        const auto e = semigroup_check(dgc_scenario(), h, 50, 100);
        EXPECT_TRUE(e.pass) << h.name() << " " << e.details.dump();
    }
    EXPECT_THROW(semigroup_check(dgc_scenario(), StateFunction::constant(1.0), 60, 50), PreconditionError);
}

TEST(FourWay, CopulaModelSeparatesTheNaiveEstimator) {
    const auto c = compare_four_estimators(dgc_scenario(), StateFunction::positive_indicator());
    for (const auto& e : c.entries) EXPECT_TRUE(e.pass) << e.theorem_id << " z=" << e.z;
    EXPECT_EQ(c.entries.back().theorem_id, "comparison.naive_separated");
    EXPECT_GE(std::abs(c.entries.back().z), 5.0);
    // continuing the pre-default formulas past tau undercounts default
    EXPECT_LT(c.naive.mean, c.direct.mean);
    EXPECT_LT(c.pde.tolerance, 1e-4);
}

TEST(FourWay, ZeroPayoffCollapsesExactly) {
    const auto c = compare_four_estimators(dgc_scenario(), StateFunction::zero());
    for (const auto& e : c.entries) {
        EXPECT_TRUE(e.pass) << e.theorem_id;
        EXPECT_EQ(e.lhs, 0.0);
        EXPECT_EQ(e.rhs, 0.0);
    }
    EXPECT_EQ(c.entries.back().theorem_id, "comparison.naive_collapses");
}

TEST(FourWay, CoxNaiveCollapses) {
    const auto sc = Scenario::make(cox(0.1), TimeGrid::uniform(1.0, 100), 40000, 72);
    const auto c = compare_four_estimators(*sc, StateFunction::positive_indicator());
    for (const auto& e : c.entries) EXPECT_TRUE(e.pass) << e.theorem_id << " z=" << e.z;
    EXPECT_EQ(c.entries.back().theorem_id, "comparison.naive_collapses");
    // under immersion the density is one, so (b) and (d) coincide path by path
    EXPECT_EQ(c.naive.mean, c.invariance.mean);
}

TEST(FourWay, SeparationSurvivesReseeding) {
    const auto e = naive_separation_robustness(ModelConfig{}, TimeGrid::uniform(1.0, 100), 40000, 73,
                                               StateFunction::positive_indicator());
    EXPECT_TRUE(e.pass) << e.details.dump();
    EXPECT_EQ(e.details["runs"].size(), 3u);
}

TEST(FourWay, WrongReferenceValueIsRejected) {
    const auto c = compare_four_estimators(dgc_scenario(), StateFunction::positive_indicator());
    EXPECT_FALSE(mc_against_value("x", c.invariance, c.naive.mean, c.pde.tolerance, 4.0).pass);
    std::ostringstream os;
    FourWayComparison::write_csv_header(os);
    c.write_csv(os, "dgc");
    const std::string out = os.str();
    EXPECT_EQ(std::count(out.begin(), out.end(), '\n'), 6);
}

TEST(DefaultProbability, PdeMatchesFrequency) {
    const auto e = pde_default_probability_check(dgc_scenario());
    EXPECT_TRUE(e.pass) << e.z;
    EXPECT_NEAR(e.rhs, 0.5, 1e-5);
}

TEST(SurfaceCsv, HasHeaderAndRows) {
    PDEOptions o;
    o.n_m = 11;
    const auto s = solve_feynman_kac(HazardModel(ModelConfig{}), StateFunction::constant(1.0), TimeGrid::uniform(1.0, 4), o);
    std::ostringstream os;
    s.write_csv(os, 2);
    const std::string out = os.str();
    EXPECT_EQ(out.rfind("t,m,u0\n", 0), 0u);
    EXPECT_EQ(std::count(out.begin(), out.end(), '\n'), 1 + 3 * 11);
}

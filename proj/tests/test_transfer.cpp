#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "invlab/transfer.hpp"

using namespace invlab;

namespace {

ModelConfig cox(double c, double lambda = 1.0) {
    ModelConfig m;
    m.kind = ModelKind::Cox;
    m.cox_hazard.c0 = c;
    m.jumps.intensity = lambda;
    m.client_hazard = 0.5;
    return m;
}

const ReportEntry& get(const std::vector<ReportEntry>& v, const std::string& id) {
    for (const auto& e : v) {
        if (e.theorem_id == id) return e;
    }
    throw std::runtime_error("missing entry " + id);
}

struct Suites {
    std::unique_ptr<Scenario> dgc, cox, no_default;
    std::vector<ReportEntry> dgc_entries, cox_entries, no_default_entries;
};

const Suites& suites() {
    static const Suites s = [] {
        Suites r;
        ModelConfig d;
        d.jumps.intensity = 1.0;
        d.client_hazard = 0.5;
        r.dgc = Scenario::make(d, TimeGrid::uniform(1.0, 100), 40000, 91);
        r.cox = Scenario::make(cox(0.1), TimeGrid::uniform(1.0, 100), 40000, 92);
        r.no_default = Scenario::make(cox(0.0), TimeGrid::uniform(1.0, 50), 5000, 93);
        r.dgc_entries = run_transfer_suite(*r.dgc);
        r.cox_entries = run_transfer_suite(*r.cox);
        r.no_default_entries = run_transfer_suite(*r.no_default);
        return r;
    }();
    return s;
}

}  // namespace

TEST(TransferSuite, ZeroInputsGiveExactZeros) {
    for (const auto* v : {&suites().dgc_entries, &suites().cox_entries}) {
        for (const char* id : {"survival_formula.zero", "density_formula.zero", "dividend_formula.zero"}) {
            const auto& e = get(*v, id);
            EXPECT_EQ(e.lhs, 0.0) << id;
            EXPECT_EQ(e.rhs, 0.0) << id;
            EXPECT_TRUE(e.pass) << id;
        }
    }
}

TEST(TransferSuite, CoxClosedForms) {
    const auto& v = suites().cox_entries;
    const auto& surv = get(v, "survival_formula.constant");
    EXPECT_NEAR(surv.rhs, std::exp(-0.1), 1e-12);
    EXPECT_NEAR(surv.lhs, std::exp(-0.1), 4.0 * surv.se);
    const auto& dens = get(v, "density_formula.constant");
    EXPECT_NEAR(dens.rhs, 1.0 - std::exp(-0.1), 1e-6);
    EXPECT_NEAR(dens.lhs, 1.0 - std::exp(-0.1), 4.0 * dens.se);
    // conditionally on survival to T/2 the remaining survival is e^{-c T/2}
    const auto& cond = get(v, "survival_formula.constant.conditional");
    EXPECT_NEAR(cond.rhs, std::exp(-0.05), 1e-12);
    // E[tau ^ T] = (1 - e^{-c}) / c
    const double stopped = (1.0 - std::exp(-0.1)) / 0.1;
    EXPECT_NEAR(get(v, "dividend_formula.continuous").rhs, stopped, 1e-5);
    const auto& jc = get(v, "jump_compensator.stock");
    EXPECT_NEAR(jc.rhs, stopped, 4.0 * jc.se);
}

TEST(TransferSuite, NoDefaultCompensatorIsLambdaT) {
    const auto& v = suites().no_default_entries;
    const auto& surv = get(v, "survival_formula.constant");
    EXPECT_EQ(surv.lhs, 1.0);
    EXPECT_EQ(surv.rhs, 1.0);
    EXPECT_NEAR(get(v, "jump_compensator.stock").rhs, 1.0, 1e-12);
    EXPECT_EQ(get(v, "density_formula.constant").lhs, 0.0);
}

TEST(TransferSuite, CopulaModelAgrees) {
    for (const auto& e : suites().dgc_entries) {
        EXPECT_TRUE(e.pass) << e.theorem_id << " z=" << e.z << " disc=" << e.max_abs_discrepancy;
    }
    EXPECT_GE(suites().dgc_entries.size(), 35u);
}

TEST(TransferSuite, CoxAgrees) {
    for (const auto& e : suites().cox_entries) {
        EXPECT_TRUE(e.pass) << e.theorem_id << " z=" << e.z << " disc=" << e.max_abs_discrepancy;
    }
}

TEST(TransferSuite, PathwiseIdentitiesToRoundoff) {
    std::size_t n = 0;
    for (const auto& e : suites().dgc_entries) {
        if (e.mode != EntryMode::Pathwise) continue;
        ++n;
        EXPECT_LE(e.max_abs_discrepancy, 1e-10) << e.theorem_id;
    }
    EXPECT_GE(n, 18u);
}

TEST(TransferSuite, MaxStatisticsAreTagged) {
    const auto& v = suites().dgc_entries;
    EXPECT_EQ(get(v, "characteristics.drift_removed_full_basis").details["statistic"], "max_abs_z");
    EXPECT_EQ(get(v, "density_formula.payoff.conditional").details["statistic"], "max_abs_z");
    EXPECT_FALSE(get(v, "density_formula.payoff").details.contains("statistic"));
}

TEST(MedianAbsZ, SkipsMaxStatisticsAndExactZeros) {
    std::vector<ReportEntry> v(5);
    const double zs[] = {0.5, -2.0, 0.1, 9.0, 0.0};
    for (int i = 0; i < 5; ++i) {
        v[i].mode = EntryMode::MonteCarlo;
        v[i].z = zs[i];
        v[i].se = 1.0;
    }
    v[3].details["statistic"] = "max_abs_z";
    v[4].se = 0.0;
    EXPECT_DOUBLE_EQ(median_abs_z(v), 0.5);
    v.resize(2);
    EXPECT_DOUBLE_EQ(median_abs_z(v), 1.25);
    EXPECT_TRUE(std::isnan(median_abs_z({})));
}

TEST(TransferPreconditions, Rejected) {
    const Scenario& sc = *suites().cox;
    const double T = sc.grid().horizon();
    EXPECT_THROW(verify_survival_formula(sc, StoppingRule::at(T), StateFunction::sign(), "x"), PreconditionError);
    EXPECT_THROW(verify_survival_formula(sc, StoppingRule::at(T), StateFunction::constant(-1.0), "x"),
                 PreconditionError);
    EXPECT_THROW(verify_dividend_formula(sc, Cashflow::continuous(StateFunction::sign()), "x"), PreconditionError);
    ModelConfig c = cox(0.1);
    c.client_hazard = 0.0;
    const auto bare = Scenario::make(c, TimeGrid::uniform(1.0, 10), 100, 5);
    EXPECT_THROW(verify_dividend_formula(*bare, Cashflow::client_lump(StateFunction::constant(1.0)), "x"),
                 PreconditionError);
    // conditional survival needs sigma at or after the conditioning time
    EXPECT_THROW(verify_survival_formula(sc, StoppingRule::at(0.1), StateFunction::constant(1.0), "x", {}, true),
                 PreconditionError);
}

TEST(TransferPower, WrongIntensityIsRejected) {
    // simulate at c = 0.1 but integrate the functionals of c = 0.3
    auto sc = Scenario::make(cox(0.1), TimeGrid::uniform(1.0, 50), 20000, 94);
    const auto good = verify_density_formula(*sc, StateFunction::constant(1.0), "d");
    EXPECT_TRUE(good[0].pass) << good[0].z;
    sc->model = HazardModel(cox(0.3));
    sc->functionals = PathFunctionals(sc->batch, sc->model);
    const auto bad = verify_density_formula(*sc, StateFunction::constant(1.0), "d");
    EXPECT_GT(std::abs(bad[0].z), 10.0);
    EXPECT_FALSE(bad[0].pass);
}

TEST(MarkMoments, MatchQuadrature) {
    const double mu = 0.7;
    for (auto mark : {MarkFunction::Mark::Zero, MarkFunction::Mark::Constant, MarkFunction::Mark::Linear,
                      MarkFunction::Mark::Indicator}) {
        const MarkFunction f{mark, MarkFunction::TimeWeight::One, 1.3, 0.4};
        // Simpson on [0, 40 mu] against the exponential density, split at the threshold
        const auto integrate = [&](int power) {
            double s = 0.0;
            for (auto [a, b] : {std::pair{0.0, 0.4}, std::pair{0.4, 40.0 * mu}}) {
                const int n = 20000;
                const double h = (b - a) / n;
                for (int k = 0; k <= n; ++k) {
                    const double e = a + h * k;
                    // one-sided value at the threshold
                    const double v = k == 0 ? f.mark_part(e + 1e-12) : (k == n ? f.mark_part(e - 1e-12) : f.mark_part(e));
                    const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
                    s += w * std::pow(v, power) * std::exp(-e / mu) / mu * h / 3.0;
                }
            }
            return s;
        };
        EXPECT_NEAR(f.mark_mean_value(mu), integrate(1), 1e-9);
        EXPECT_NEAR(f.mark_second_moment(mu), integrate(2), 1e-9);
    }
    const MarkFunction lin{MarkFunction::Mark::Constant, MarkFunction::TimeWeight::Linear, 1.0, 1.0};
    EXPECT_NEAR(lin.weight_square_integral(0.9) - lin.weight_square_integral(0.3), (0.729 - 0.027) / 3.0, 1e-15);
}

// With ~10 jumps expected per step some steps see none; the sample variance is
// then blind to the jump part and the per-step z test must use the true one.
TEST(JumpDriftTests, SparseJumpStepsDoNotFalselyReject) {
    const auto sc = Scenario::make(cox(0.2), TimeGrid::uniform(1.0, 200), 2000, 3);
    const auto es = run_transfer_suite(*sc);
    for (const char* id : {"jump_compensator.stock.stopped_martingale", "characteristics.drift_removed_full_basis",
                           "characteristics.drift_removed_reduced_basis"}) {
        EXPECT_TRUE(get(es, id).pass) << id << " z=" << get(es, id).z;
    }
}

TEST(JumpDriftTests, WrongJumpIntensityStillRejected) {
    auto sc = Scenario::make(cox(0.1), TimeGrid::uniform(1.0, 50), 40000, 95);
    sc->model = HazardModel(cox(0.1, 2.0));
    sc->functionals = PathFunctionals(sc->batch, sc->model);
    const auto es = run_transfer_suite(*sc);
    for (const char* id : {"jump_compensator.stock.stopped_martingale", "characteristics.drift_removed_full_basis"}) {
        EXPECT_FALSE(get(es, id).pass) << id;
        EXPECT_GT(std::abs(get(es, id).z), 8.0) << id;
    }
}

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "invlab/estimators.hpp"
#include "invlab/functionals.hpp"
#include "invlab/report.hpp"
#include "invlab/scenario.hpp"

namespace invlab {

/// F-stopping rule on the grid: a deterministic grid time, or the first grid
/// time at which m reaches a level (capped at T).
struct StoppingRule {
    enum class Kind { Deterministic, FirstHitting };
    Kind kind = Kind::Deterministic;
    double time = 1.0;
    double level = 0.5;

    static StoppingRule at(double t) { return {Kind::Deterministic, t, 0.0}; }
    static StoppingRule first_hitting(double level) { return {Kind::FirstHitting, 0.0, level}; }

    std::size_t index(const ScenarioBatch& b, std::size_t p) const {
        const TimeGrid& g = b.grid();
        if (kind == Kind::Deterministic) {
            INVLAB_REQUIRE(time >= 0.0 && time <= g.horizon(), DomainError, "stopping time outside [0, T]");
            return g.nearest_index(time);
        }
        for (std::size_t i = 0; i <= g.n_steps(); ++i) {
            if (b.m(p, i) >= level) return i;
        }
        return g.n_steps();
    }
};

struct TransferOptions {
    double threshold = 4.0;
    double relative_tolerance = 1e-10;
    int n_bins = 20;
    /// grid index of the conditional (binned) tests; 0 selects N/2
    std::size_t conditional_index = 0;
    StateFunction payoff = StateFunction::positive_indicator();
    double hitting_level = 0.5;
    MarkFunction mark_function{MarkFunction::Mark::Linear, MarkFunction::TimeWeight::One, 1.0, 1.0};
};

namespace detail {

inline bool alive_at(const ScenarioBatch& b, std::size_t p, std::size_t i) { return b.tau(p) > b.grid()[i]; }

/// Trapezoid of f(i) over grid indices [from, N].
template <class F>
double grid_integral(const TimeGrid& g, std::size_t from, F&& f) {
    double s = 0.0;
    double prev = f(from);
    for (std::size_t i = from; i < g.n_steps(); ++i) {
        const double next = f(i + 1);
        s += 0.5 * (prev + next) * g.dt(i);
        prev = next;
    }
    return s;
}

/// Conditional version of an identity at grid time t_c, one test per bin of
/// m_{t_c}. Bins are equal-mass over the survivors. With x the G-side sample,
/// y the F-side sample and Gc = Gamma_{t_c}, each bin compares
///   sum 1_{tau > t_c} x / sum 1_{tau > t_c}   with   sum Q_T y / sum Q_T e^{-Gc}
/// (F-side weights Q_T e^{-Gc}, values y e^{Gc}), the tower property applied to
/// E[. | tau > t_c, m_{t_c} in bin].
/// y2, when given, is the F-side sample of the same identity for x^2; its bin
/// average floors the lhs variance (see compare_paired).
inline ReportEntry binned_conditional(std::string id, const Scenario& sc, std::size_t c,
                                      const std::vector<double>& x, const std::vector<double>& y,
                                      const TransferOptions& opt, const std::vector<double>& y2 = {}) {
    const ScenarioBatch& b = sc.batch;
    const PathFunctionals& f = sc.functionals;
    const std::size_t n = b.n_paths();
    std::vector<double> mc(n);
    std::vector<unsigned char> alive(n);
    for (std::size_t p = 0; p < n; ++p) {
        mc[p] = b.m(p, c);
        alive[p] = alive_at(b, p, c);
    }
    const std::vector<double> edges = equal_mass_edges(mc, alive, opt.n_bins);
    const std::vector<int> bin = assign_bins(mc, edges);
    std::vector<double> yv(n), y2v(y2.empty() ? 0 : n), base(n);
    for (std::size_t p = 0; p < n; ++p) {
        base[p] = f.Q_T(p) * std::exp(-f.Gamma(p, c));
        yv[p] = y[p] * std::exp(f.Gamma(p, c));
        if (!y2.empty()) y2v[p] = y2[p] * std::exp(f.Gamma(p, c));
    }
    ReportEntry worst;
    worst.theorem_id = id;
    worst.z = 0.0;
    nlohmann::json bins = nlohmann::json::array();
    std::vector<double> wl(n), wr(n);
    bool any = false;
    for (int k = 0; k < opt.n_bins; ++k) {
        for (std::size_t p = 0; p < n; ++p) {
            const bool in = bin[p] == k;
            wl[p] = in && alive[p] ? 1.0 : 0.0;
            wr[p] = in ? base[p] : 0.0;
        }
        double m2 = std::numeric_limits<double>::quiet_NaN();
        if (!y2.empty()) {
            CompensatedSum num, den;
            for (std::size_t p = 0; p < n; ++p) {
                num.add(wr[p] * y2v[p]);
                den.add(wr[p]);
            }
            m2 = num.value() / den.value();
        }
        const PairedComparison cmp = compare_paired(x, wl, yv, wr, m2);
        bins.push_back({{"bin", k}, {"lhs", cmp.lhs}, {"rhs", cmp.rhs}, {"se", cmp.se_diff}, {"z", cmp.z}});
        if (!any || std::abs(cmp.z) > std::abs(worst.z)) {
            worst = ReportEntry::from_comparison(id, cmp, opt.threshold);
            any = true;
        }
    }
    worst.pass = std::abs(worst.z) <= opt.threshold;
    worst.details["conditional_time"] = b.grid()[c];
    worst.details["bins"] = bins;
    worst.details["reported_bin"] = "largest |z|";
    worst.details["statistic"] = "max_abs_z";
    worst.details["surrogate"] = "equal-mass bins of m_t over survivors";
    return worst;
}

inline std::size_t conditional_index(const TimeGrid& g, const TransferOptions& opt) {
    return opt.conditional_index == 0 ? g.n_steps() / 2 : std::min(opt.conditional_index, g.n_steps());
}

}  // namespace detail

/// E[chi 1_{sigma < tau}] = E'[chi e^{-Gamma_sigma}] with chi = payoff(sigma, m_sigma).
inline std::vector<ReportEntry> verify_survival_formula(const Scenario& sc, const StoppingRule& sigma,
                                                        const StateFunction& chi, const std::string& id,
                                                        const TransferOptions& opt = {}, bool conditional = false) {
    INVLAB_REQUIRE(chi.nonnegative(), PreconditionError, "survival formula needs a nonnegative payoff");
    const ScenarioBatch& b = sc.batch;
    const PathFunctionals& f = sc.functionals;
    const TimeGrid& g = b.grid();
    const std::size_t n = b.n_paths();
    std::vector<double> lhs(n), rhs(n), rhs2(n), qT = f.terminal_density();
    std::vector<std::size_t> idx(n);
    for (std::size_t p = 0; p < n; ++p) {
        const std::size_t k = sigma.index(b, p);
        idx[p] = k;
        const double value = chi(g[k], b.m(p, k));
        lhs[p] = b.tau(p) > g[k] ? value : 0.0;
        rhs[p] = value * std::exp(-f.Gamma(p, k));
        rhs2[p] = value * rhs[p];
    }
    std::vector<ReportEntry> out;
    out.push_back(ReportEntry::from_comparison(id, compare_paired(lhs, {}, rhs, qT), opt.threshold));
    if (conditional) {
        const std::size_t c = detail::conditional_index(g, opt);
        for (std::size_t p = 0; p < n; ++p) {
            INVLAB_REQUIRE(idx[p] >= c, PreconditionError, "conditional test needs sigma >= t");
        }
        out.push_back(detail::binned_conditional(id + ".conditional", sc, c, lhs, rhs, opt, rhs2));
    }
    return out;
}

/// E[K_tau 1_{tau <= T}] = E'[int_0^T K e^{-Gamma} gamma ds] for F-predictable K(t, m).
inline std::vector<ReportEntry> verify_density_formula(const Scenario& sc, const StateFunction& K,
                                                       const std::string& id, const TransferOptions& opt = {},
                                                       bool conditional = false) {
    const ScenarioBatch& b = sc.batch;
    const PathFunctionals& f = sc.functionals;
    const TimeGrid& g = b.grid();
    const std::size_t n = b.n_paths();
    const std::size_t c = detail::conditional_index(g, opt);
    std::vector<double> lhs(n), rhs(n), lhs_c(n), rhs_c(n), rhs2_c(conditional ? n : 0),
        qT = f.terminal_density();
    for (std::size_t p = 0; p < n; ++p) {
        const EventState& e = b.tau_state(p);
        lhs[p] = e.within_horizon() ? K(e.time, e.m) : 0.0;
        lhs_c[p] = e.within_horizon() && e.time > g[c] ? lhs[p] : 0.0;
        const auto integrand = [&](std::size_t i) {
            return K(g[i], b.m(p, i)) * std::exp(-f.Gamma(p, i)) * f.gamma(p, i);
        };
        rhs[p] = detail::grid_integral(g, 0, integrand);
        if (conditional) {
            rhs_c[p] = detail::grid_integral(g, c, integrand);
            rhs2_c[p] = detail::grid_integral(g, c, [&](std::size_t i) {
                const double k = K(g[i], b.m(p, i));
                return k * k * std::exp(-f.Gamma(p, i)) * f.gamma(p, i);
            });
        }
    }
    std::vector<ReportEntry> out;
    out.push_back(ReportEntry::from_comparison(id, compare_paired(lhs, {}, rhs, qT), opt.threshold));
    if (conditional) {
        out.push_back(detail::binned_conditional(id + ".conditional", sc, c, lhs_c, rhs_c, opt, rhs2_c));
    }
    return out;
}

/// Nondecreasing F-optional cashflow A with A_0 = 0.
struct Cashflow {
    enum class Kind { AbsolutelyContinuous, ClientLump };
    Kind kind = Kind::AbsolutelyContinuous;
    StateFunction density = StateFunction::constant(1.0);  // dA = a(t, m) dt
    StateFunction exposure = StateFunction::positive_indicator();  // lump size G(theta, m_theta)

    static Cashflow continuous(StateFunction a) { return {Kind::AbsolutelyContinuous, a, StateFunction::zero()}; }
    static Cashflow client_lump(StateFunction g) { return {Kind::ClientLump, StateFunction::zero(), g}; }

    void validate() const {
        if (kind == Kind::AbsolutelyContinuous) {
            INVLAB_REQUIRE(density.nonnegative(), PreconditionError, "cashflow density must be nonnegative");
        } else {
            INVLAB_REQUIRE(exposure.nonnegative(), PreconditionError, "lump cashflow must be nonnegative");
        }
    }

    std::string name() const { return kind == Kind::AbsolutelyContinuous ? "continuous" : "client_lump"; }
};

namespace detail {

/// A^{tau-} on [0, T] for one path (G side) and int_0^T e^{-Gamma} dA (F side),
/// both restricted to (t_c, T] when from > 0.
inline std::pair<double, double> cashflow_sides(const Scenario& sc, std::size_t p, const Cashflow& A,
                                                std::size_t from) {
    const ScenarioBatch& b = sc.batch;
    const PathFunctionals& f = sc.functionals;
    const TimeGrid& g = b.grid();
    if (A.kind == Cashflow::Kind::ClientLump) {
        const EventState& th = b.theta_state(p);
        if (!th.within_horizon() || th.time <= g[from]) return {0.0, 0.0};
        const double size = A.exposure(th.time, th.m);
        const double g_side = b.tau(p) > th.time ? size : 0.0;
        return {g_side, size * std::exp(-f.at_theta(p).Gamma)};
    }
    const auto a = [&](std::size_t i) { return A.density(g[i], b.m(p, i)); };
    const double f_side = grid_integral(g, from, [&](std::size_t i) { return a(i) * std::exp(-f.Gamma(p, i)); });
    // G side: int_{t_from}^{tau ^ T} a ds with the partial step ending at tau
    const EventState& e = b.tau_state(p);
    if (e.within_horizon() && e.time <= g[from]) return {0.0, f_side};
    double g_side = 0.0;
    const std::size_t last = e.within_horizon() ? e.step : g.n_steps();
    for (std::size_t i = from; i < last; ++i) g_side += 0.5 * (a(i) + a(i + 1)) * g.dt(i);
    if (e.within_horizon()) g_side += 0.5 * (a(e.step) + A.density(e.time, e.m)) * (e.time - g[e.step]);
    return {g_side, f_side};
}

}  // namespace detail

/// E[A^{tau-}_T] = E'[int_0^T e^{-Gamma} dA].
inline std::vector<ReportEntry> verify_dividend_formula(const Scenario& sc, const Cashflow& A, const std::string& id,
                                                        const TransferOptions& opt = {}, bool conditional = false) {
    A.validate();
    const ScenarioBatch& b = sc.batch;
    if (A.kind == Cashflow::Kind::ClientLump) {
        INVLAB_REQUIRE(b.has_client(), PreconditionError, "lump cashflow needs the client default clock");
    }
    const std::size_t n = b.n_paths();
    const std::size_t c = detail::conditional_index(b.grid(), opt);
    std::vector<double> lhs(n), rhs(n), lhs_c(n), rhs_c(n), qT = sc.functionals.terminal_density();
    for (std::size_t p = 0; p < n; ++p) {
        std::tie(lhs[p], rhs[p]) = detail::cashflow_sides(sc, p, A, 0);
        if (conditional) std::tie(lhs_c[p], rhs_c[p]) = detail::cashflow_sides(sc, p, A, c);
    }
    // the lump identity also holds for the squared lump, which floors the lhs variance
    std::vector<double> rhs2_c;
    if (conditional && A.kind == Cashflow::Kind::ClientLump) {
        rhs2_c.resize(n);
        for (std::size_t p = 0; p < n; ++p) {
            const EventState& th = b.theta_state(p);
            rhs2_c[p] = rhs_c[p] == 0.0 ? 0.0 : rhs_c[p] * A.exposure(th.time, th.m);
        }
    }
    std::vector<ReportEntry> out;
    out.push_back(ReportEntry::from_comparison(id, compare_paired(lhs, {}, rhs, qT), opt.threshold));
    if (conditional) {
        out.push_back(detail::binned_conditional(id + ".conditional", sc, c, lhs_c, rhs_c, opt, rhs2_c));
    }
    return out;
}

/// Test processes for the pathwise suites, each available as a (G, Q) process
/// stopped before tau and as its F-reduction on the whole grid.
enum class TestProcess { Zero, ReducedBrownian, Factor, CompensatedJumps };

inline std::string to_string(TestProcess x) {
    switch (x) {
        case TestProcess::Zero: return "zero";
        case TestProcess::ReducedBrownian: return "reduced_brownian";
        case TestProcess::Factor: return "factor";
        case TestProcess::CompensatedJumps: return "compensated_jumps";
    }
    return "zero";
}

namespace detail {

/// Increment of the F-reduction of X over [t_i, t_end], t_end in (t_i, t_{i+1}].
/// A partial step is only evaluated at tau, where the bridged state exists.
inline double reduced_increment(const Scenario& sc, TestProcess x, std::size_t p, std::size_t i, bool to_tau) {
    const ScenarioBatch& b = sc.batch;
    const TimeGrid& g = b.grid();
    const EventState& e = b.tau_state(p);
    const double t_end = to_tau ? e.time : g[i + 1];
    const double dt = t_end - g[i];
    switch (x) {
        case TestProcess::Zero: return 0.0;
        case TestProcess::ReducedBrownian: {
            const double db = to_tau ? e.db_partial : b.db(p, i);
            return db - sc.functionals.mu(p, i) * dt;
        }
        case TestProcess::Factor: return (to_tau ? e.m : b.m(p, i + 1)) - b.m(p, i);
        case TestProcess::CompensatedJumps: {
            const JumpSpec& js = sc.config().jumps;
            double s = 0.0;
            for (const JumpEvent& j : b.jumps(p)) {
                // jumps strictly before t_end; on a full step t_end itself counts
                if (j.time > g[i] && (to_tau ? j.time < t_end : j.time <= t_end)) s += j.mark;
            }
            return s - js.intensity * js.mark_mean * dt;
        }
    }
    return 0.0;
}

/// Increment over step i of the (G, Q) process X stopped before tau, built
/// from the pre-default drift mu 1_{s < tau}: the full step before tau, the
/// partial step [t_i, tau) in the step containing tau, zero afterwards.
inline double stopped_increment(const Scenario& sc, TestProcess x, std::size_t p, std::size_t i) {
    const EventState& e = sc.batch.tau_state(p);
    if (e.within_horizon() && i > e.step) return 0.0;
    return reduced_increment(sc, x, p, i, e.within_horizon() && i == e.step);
}

/// Fraction of paths with tau > t_{i+1}, per step.
inline std::vector<double> alive_after_step(const ScenarioBatch& b) {
    const std::size_t n = b.n_paths(), N = b.n_steps();
    std::vector<double> taus(n);
    for (std::size_t p = 0; p < n; ++p) taus[p] = b.tau(p);
    std::sort(taus.begin(), taus.end());
    std::vector<double> out(N);
    for (std::size_t i = 0; i < N; ++i) {
        const auto k = taus.end() - std::upper_bound(taus.begin(), taus.end(), b.grid()[i + 1]);
        out[i] = static_cast<double>(k) / static_cast<double>(n);
    }
    return out;
}

/// Per-step variance of a compensated marked-jump increment: when no jump
/// lands in a step the sample variance is zero while the true one is not.
inline std::vector<double> jump_variance_floor(const TimeGrid& g, double intensity, double second_moment,
                                               const MarkFunction& weight, std::span<const double> alive = {}) {
    std::vector<double> out(g.n_steps());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = intensity * second_moment * (weight.weight_square_integral(g[i + 1]) - weight.weight_square_integral(g[i]));
        if (!alive.empty()) out[i] *= alive[i];
    }
    return out;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace detail

/// [M, N] of the stopped processes against [M', N'] of the reductions at every
/// grid point before tau, and at tau itself.
inline std::vector<ReportEntry> verify_qv_transfer(const Scenario& sc, const TransferOptions& opt = {}) {
    const ScenarioBatch& b = sc.batch;
    const std::size_t n = b.n_paths();
    const std::size_t N = b.n_steps();
    const std::pair<TestProcess, TestProcess> pairs[] = {
        {TestProcess::Zero, TestProcess::Zero},
        {TestProcess::Factor, TestProcess::Factor},
        {TestProcess::ReducedBrownian, TestProcess::ReducedBrownian},
        {TestProcess::ReducedBrownian, TestProcess::Factor},
        {TestProcess::CompensatedJumps, TestProcess::CompensatedJumps},
        {TestProcess::Factor, TestProcess::CompensatedJumps},
    };
    std::vector<ReportEntry> out;
    for (const auto& [mx, nx] : pairs) {
        double worst = 0.0;
        double scale = 0.0;
        std::vector<double> terminal(n);
        for (std::size_t p = 0; p < n; ++p) {
            const EventState& e = b.tau_state(p);
            const std::size_t last = e.within_horizon() ? e.step : N;
            double qg = 0.0, qf = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                // grid points t_i < tau: compare before adding step i
                if (i <= last) worst = std::max(worst, detail::rel_diff(qg, qf));
                qg += detail::stopped_increment(sc, mx, p, i) * detail::stopped_increment(sc, nx, p, i);
                if (i < last) {
                    qf += detail::reduced_increment(sc, mx, p, i, false) * detail::reduced_increment(sc, nx, p, i, false);
                }
            }
            if (e.within_horizon()) {
                qf += detail::reduced_increment(sc, mx, p, last, true) * detail::reduced_increment(sc, nx, p, last, true);
            } else {
                worst = std::max(worst, detail::rel_diff(qg, qf));
            }
            // value at tau (or T): the stopped bracket equals the reduction's bracket at tau
            worst = std::max(worst, detail::rel_diff(qg, qf));
            scale = std::max(scale, std::abs(qg));
            terminal[p] = qg;
        }
        const std::string id = "qv_transfer." + to_string(mx) + "__" + to_string(nx);
        out.push_back(ReportEntry::pathwise(id, worst, 1.0, opt.relative_tolerance));
        out.back().details["max_abs_bracket"] = scale;
        if (mx == TestProcess::Factor && nx == TestProcess::CompensatedJumps) {
            // independent drivers: the covariation has mean zero
            const std::vector<double> zeros(n, 0.0);
            out.push_back(ReportEntry::from_comparison(id + ".mean_zero", compare_paired(terminal, {}, zeros, {}),
                                                       opt.threshold));
        }
    }
    return out;
}

/// Integrands for the stochastic-integral transfer, F-predictable before tau.
enum class TestIntegrand { Zero, One, SignOfFactor, SignOfFactorSevenAfterTau };

inline std::string to_string(TestIntegrand l) {
    switch (l) {
        case TestIntegrand::Zero: return "zero";
        case TestIntegrand::One: return "one";
        case TestIntegrand::SignOfFactor: return "sign_of_factor";
        case TestIntegrand::SignOfFactorSevenAfterTau: return "sign_of_factor_seven_after_tau";
    }
    return "zero";
}

/// (L . W)^{tau-} computed on the (G, Q) side against (L' . W')^{tau-} of the
/// reductions, at every grid point up to tau. The last integrand differs from
/// its reduction after tau, where the stopped integrator no longer moves.
inline std::vector<ReportEntry> verify_integral_transfer(const Scenario& sc, const TransferOptions& opt = {}) {
    const ScenarioBatch& b = sc.batch;
    const std::size_t n = b.n_paths();
    const std::size_t N = b.n_steps();
    const TimeGrid& g = b.grid();
    std::vector<ReportEntry> out;
    for (TestIntegrand L : {TestIntegrand::Zero, TestIntegrand::One, TestIntegrand::SignOfFactor,
                            TestIntegrand::SignOfFactorSevenAfterTau}) {
        const auto reduced_L = [&](std::size_t p, std::size_t i) {
            switch (L) {
                case TestIntegrand::Zero: return 0.0;
                case TestIntegrand::One: return 1.0;
                default: {
                    const double m = b.m(p, i);
                    return m > 0.0 ? 1.0 : (m < 0.0 ? -1.0 : 0.0);
                }
            }
        };
        const auto full_L = [&](std::size_t p, std::size_t i) {
            if (L == TestIntegrand::SignOfFactorSevenAfterTau && b.tau(p) <= g[i]) return 7.0;
            return reduced_L(p, i);
        };
        for (TestProcess W : {TestProcess::ReducedBrownian, TestProcess::CompensatedJumps}) {
            double worst = 0.0;
            for (std::size_t p = 0; p < n; ++p) {
                const EventState& e = b.tau_state(p);
                const std::size_t last = e.within_horizon() ? e.step : N;
                double ig = 0.0, iff = 0.0;
                for (std::size_t i = 0; i < N; ++i) {
                    if (i <= last) worst = std::max(worst, detail::rel_diff(ig, iff));
                    ig += full_L(p, i) * detail::stopped_increment(sc, W, p, i);
                    if (i < last) iff += reduced_L(p, i) * detail::reduced_increment(sc, W, p, i, false);
                }
                if (e.within_horizon()) iff += reduced_L(p, last) * detail::reduced_increment(sc, W, p, last, true);
                worst = std::max(worst, detail::rel_diff(ig, iff));
            }
            out.push_back(ReportEntry::pathwise("integral_transfer." + to_string(L) + "__" + to_string(W), worst, 1.0,
                                                opt.relative_tolerance));
        }
    }
    return out;
}

/// Jumps of the marked stream before tau ^ T against their compensator
/// int_0^{tau ^ T} int Psi zeta m(de) ds (MC), the pathwise transfer of the
/// compensated integral, and a (G, Q) drift test of that integral.
inline std::vector<ReportEntry> verify_jump_compensator(const Scenario& sc, const MarkFunction& psi,
                                                        const std::string& id, const TransferOptions& opt = {}) {
    const ScenarioBatch& b = sc.batch;
    const TimeGrid& g = b.grid();
    const std::size_t n = b.n_paths();
    const std::size_t N = b.n_steps();
    const JumpSpec& js = sc.config().jumps;
    const double mark_mean = psi.mark_mean_value(js.mark_mean);
    const double T = g.horizon();
    std::vector<double> lhs(n), rhs(n);
    for (std::size_t p = 0; p < n; ++p) {
        const double stop = std::min(b.tau(p), T);
        double s = 0.0;
        for (const JumpEvent& j : b.jumps(p)) {
            if (j.time < stop) s += psi(j.time, j.mark);
        }
        lhs[p] = s;
        rhs[p] = js.intensity * mark_mean * psi.weight_integral(stop);
    }
    std::vector<ReportEntry> out;
    out.push_back(ReportEntry::from_comparison(id, compare_paired(lhs, {}, rhs, {}), opt.threshold));

    // compensated integral, increments on step i and on [t_i, tau)
    const auto increment = [&](std::size_t p, std::size_t i, double t_end, bool open_end) {
        double s = 0.0;
        for (const JumpEvent& j : b.jumps(p)) {
            if (j.time > g[i] && (open_end ? j.time < t_end : j.time <= t_end)) s += psi(j.time, j.mark);
        }
        return s - js.intensity * mark_mean * (psi.weight_integral(t_end) - psi.weight_integral(g[i]));
    };
    double worst = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        const EventState& e = b.tau_state(p);
        const std::size_t last = e.within_horizon() ? e.step : N;
        // G side: jumps of the stopped measure minus its compensator, accumulated
        // as one sum per path; F side: the reduction accumulated step by step
        double g_side = 0.0;
        const double stop = std::min(b.tau(p), T);
        for (const JumpEvent& j : b.jumps(p)) {
            if (j.time < stop) g_side += psi(j.time, j.mark);
        }
        g_side -= js.intensity * mark_mean * psi.weight_integral(stop);
        double f_side = 0.0;
        for (std::size_t i = 0; i < last; ++i) f_side += increment(p, i, g[i + 1], false);
        if (e.within_horizon()) f_side += increment(p, last, e.time, true);
        worst = std::max(worst, detail::rel_diff(g_side, f_side));
    }
    out.push_back(ReportEntry::pathwise(id + ".pathwise", worst, 1.0, opt.relative_tolerance));

    const std::vector<double> unit;
    const auto r = martingale_drift_test(
        n, N,
        [&](std::size_t p, std::size_t i) {
            const EventState& e = b.tau_state(p);
            if (e.within_horizon() && i > e.step) return 0.0;
            if (e.within_horizon() && i == e.step) return increment(p, i, e.time, true);
            return increment(p, i, g[i + 1], false);
        },
        unit, opt.threshold,
        detail::jump_variance_floor(g, js.intensity, psi.mark_second_moment(js.mark_mean), psi,
                                    detail::alive_after_step(b)));
    out.push_back(ReportEntry::from_drift_test(id + ".stopped_martingale", r));
    return out;
}

/// Characteristic triplet of X = m^{tau-} + (compensated jumps)^{tau-} with
/// truncation h(x) = x 1_{|x| <= 1}:
///   drift      int_0^{t ^ tau} sigma mu ds - lambda E[e 1_{e > 1}] (t ^ tau)
///   diffusion  v(t ^ tau) = int_0^{t ^ tau} sigma^2 ds
///   jump mass  lambda (t ^ tau)
/// The (G, Q) side uses closed forms in t ^ tau; the (F, P) side accumulates
/// the reduction's per-step characteristics and is stopped before tau.
inline std::vector<ReportEntry> verify_characteristics(const Scenario& sc, const TransferOptions& opt = {}) {
    const ScenarioBatch& b = sc.batch;
    const HazardModel& model = sc.model;
    const TimeGrid& g = b.grid();
    const std::size_t n = b.n_paths();
    const std::size_t N = b.n_steps();
    const JumpSpec& js = sc.config().jumps;
    const double mu_e = js.mark_mean;
    const double big_jump_mean = js.intensity > 0.0 ? (1.0 + mu_e) * std::exp(-1.0 / mu_e) : 0.0;
    const double trunc_rate = js.intensity * big_jump_mean;
    std::vector<double> sigma(N + 1);
    for (std::size_t i = 0; i <= N; ++i) sigma[i] = model.sigma(g[i]);

    double worst_b = 0.0, worst_a = 0.0, worst_c = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        const EventState& e = b.tau_state(p);
        const std::size_t last = e.within_horizon() ? e.step : N;
        // F side, accumulated step by step
        double bf = 0.0, af = 0.0, cf = 0.0;
        // G side, drift integral accumulated over the stopped grid
        double bg_int = 0.0;
        for (std::size_t i = 0; i <= last; ++i) {
            const double t = g[i];
            const double bg = bg_int - trunc_rate * std::min(t, b.tau(p));
            const double ag = model.variance_between(0.0, std::min(t, b.tau(p)));
            const double cg = js.intensity * std::min(t, b.tau(p));
            worst_b = std::max(worst_b, detail::rel_diff(bg, bf));
            worst_a = std::max(worst_a, detail::rel_diff(ag, af));
            worst_c = std::max(worst_c, detail::rel_diff(cg, cf));
            if (i == N) break;
            const bool partial = i == last;
            const double t_end = partial ? e.time : g[i + 1];
            const double drift = sigma[i] * sc.functionals.mu(p, i) * (t_end - t);
            bg_int += drift;
            bf += drift - trunc_rate * (t_end - t);
            af += model.variance_between(t, t_end);
            cf += js.intensity * (t_end - t);
            if (partial) {
                const double ts = e.time;
                worst_b = std::max(worst_b, detail::rel_diff(bg_int - trunc_rate * ts, bf));
                worst_a = std::max(worst_a, detail::rel_diff(model.variance_between(0.0, ts), af));
                worst_c = std::max(worst_c, detail::rel_diff(js.intensity * ts, cf));
            }
        }
    }
    std::vector<ReportEntry> out;
    out.push_back(ReportEntry::pathwise("characteristics.drift", worst_b, 1.0, opt.relative_tolerance));
    out.push_back(ReportEntry::pathwise("characteristics.diffusion", worst_a, 1.0, opt.relative_tolerance));
    out.push_back(ReportEntry::pathwise("characteristics.jump_mass", worst_c, 1.0, opt.relative_tolerance));

    // drift-removed increments of X: (G, Q) stopped and (F, P) weighted by Q_T
    const auto removed = [&](std::size_t p, std::size_t i, bool to_tau) {
        const EventState& e = b.tau_state(p);
        const double t_end = to_tau ? e.time : g[i + 1];
        const double drift = sigma[i] * sc.functionals.mu(p, i) * (t_end - g[i]);
        return detail::reduced_increment(sc, TestProcess::Factor, p, i, to_tau) +
               detail::reduced_increment(sc, TestProcess::CompensatedJumps, p, i, to_tau) - drift;
    };
    const std::vector<double> unit;
    // jump part of the increment: marks e, unit time weight
    const MarkFunction flat{MarkFunction::Mark::Linear, MarkFunction::TimeWeight::One, 1.0, 1.0};
    const double e2 = flat.mark_second_moment(mu_e);
    const auto floor_g = detail::jump_variance_floor(g, js.intensity, e2, flat, detail::alive_after_step(b));
    const auto floor_f = detail::jump_variance_floor(g, js.intensity, e2, flat);
    const auto rg = martingale_drift_test(
        n, N,
        [&](std::size_t p, std::size_t i) {
            const EventState& e = b.tau_state(p);
            if (e.within_horizon() && i > e.step) return 0.0;
            return removed(p, i, e.within_horizon() && i == e.step);
        },
        unit, opt.threshold, floor_g);
    out.push_back(ReportEntry::from_drift_test("characteristics.drift_removed_full_basis", rg));
    const std::vector<double> qT = sc.functionals.terminal_density();
    const auto rf = martingale_drift_test(
        n, N, [&](std::size_t p, std::size_t i) { return removed(p, i, false); }, qT, opt.threshold, floor_f);
    out.push_back(ReportEntry::from_drift_test("characteristics.drift_removed_reduced_basis", rf));
    return out;
}

/// The stock transfer suite: every formula with its stock payoffs, conditional
/// versions at t = T/2, and the pathwise identities.
inline std::vector<ReportEntry> run_transfer_suite(const Scenario& sc, const TransferOptions& opt = {}) {
    std::vector<ReportEntry> out;
    const auto add = [&](std::vector<ReportEntry> v) {
        for (auto& e : v) out.push_back(std::move(e));
    };
    const double T = sc.grid().horizon();
    add(verify_survival_formula(sc, StoppingRule::at(T), StateFunction::zero(), "survival_formula.zero", opt));
    add(verify_survival_formula(sc, StoppingRule::at(T), StateFunction::constant(1.0), "survival_formula.constant",
                                opt, true));
    add(verify_survival_formula(sc, StoppingRule::at(T), opt.payoff, "survival_formula.payoff", opt, true));
    add(verify_survival_formula(sc, StoppingRule::first_hitting(opt.hitting_level), opt.payoff,
                                "survival_formula.hitting_time", opt));
    add(verify_density_formula(sc, StateFunction::zero(), "density_formula.zero", opt));
    add(verify_density_formula(sc, StateFunction::constant(1.0), "density_formula.constant", opt, true));
    add(verify_density_formula(sc, opt.payoff, "density_formula.payoff", opt, true));
    add(verify_dividend_formula(sc, Cashflow::continuous(StateFunction::zero()), "dividend_formula.zero", opt));
    add(verify_dividend_formula(sc, Cashflow::continuous(StateFunction::constant(1.0)), "dividend_formula.continuous",
                                opt, true));
    if (sc.batch.has_client()) {
        add(verify_dividend_formula(sc, Cashflow::client_lump(opt.payoff), "dividend_formula.client_lump", opt, true));
    }
    add(verify_qv_transfer(sc, opt));
    add(verify_integral_transfer(sc, opt));
    add(verify_jump_compensator(sc, opt.mark_function, "jump_compensator.stock", opt));
    add(verify_characteristics(sc, opt));
    return out;
}

/// Median |z| over the single-statistic Monte Carlo entries. Entries that
/// report a maximum over steps or bins are skipped, as are exact zero
/// identities with no sampling error. NaN when nothing qualifies.
inline double median_abs_z(const std::vector<ReportEntry>& entries) {
    std::vector<double> z;
    for (const ReportEntry& e : entries) {
        if (e.mode != EntryMode::MonteCarlo || !(e.se > 0.0) || !std::isfinite(e.z)) continue;
        if (e.details.contains("statistic") && e.details["statistic"] == "max_abs_z") continue;
        z.push_back(std::abs(e.z));
    }
    if (z.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(z.begin(), z.end());
    const std::size_t k = z.size() / 2;
    return z.size() % 2 ? z[k] : 0.5 * (z[k - 1] + z[k]);
}

}  // namespace invlab

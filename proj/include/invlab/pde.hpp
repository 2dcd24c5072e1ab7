#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "invlab/errors.hpp"
#include "invlab/estimators.hpp"
#include "invlab/functionals.hpp"
#include "invlab/hazard_model.hpp"
#include "invlab/report.hpp"
#include "invlab/scenario.hpp"
#include "invlab/time_grid.hpp"
#include "invlab/transfer.hpp"

namespace invlab {

struct PDEOptions {
    double theta = 0.5;             // 0.5 Crank-Nicolson, 1 implicit Euler, 0 explicit
    std::size_t n_m = 401;          // nodes in m
    double width_sd = 8.0;          // half-width of the domain in standard deviations of m_T
    std::size_t time_refinement = 1;
    bool rannacher = true;          // first step as two implicit half-steps

    void validate() const {
        INVLAB_REQUIRE(theta >= 0.0 && theta <= 1.0, ConfigError, "theta must lie in [0, 1]");
        INVLAB_REQUIRE(n_m >= 5, ConfigError, "need at least 5 nodes in m");
        INVLAB_REQUIRE(width_sd >= 6.0, ConfigError, "domain must cover at least 6 standard deviations of m_T");
        INVLAB_REQUIRE(time_refinement >= 1, ConfigError, "time refinement must be positive");
    }
};

/// Uniform nodes in m crossed with the time nodes (a refinement of the MC grid).
struct PDEGrid {
    double m_min = 0.0;
    double m_max = 0.0;
    std::size_t n_m = 0;
    std::vector<double> times;

    double dm() const { return (m_max - m_min) / static_cast<double>(n_m - 1); }
    double m(std::size_t j) const { return m_min + dm() * static_cast<double>(j); }
    std::size_t n_times() const { return times.size(); }

    static PDEGrid make(const HazardModel& model, const TimeGrid& g, const PDEOptions& opt) {
        opt.validate();
        PDEGrid p;
        const double sd = std::sqrt(model.variance_between(0.0, g.horizon()));
        p.m_min = -opt.width_sd * sd;
        p.m_max = opt.width_sd * sd;
        p.n_m = opt.n_m;
        for (std::size_t i = 0; i < g.n_steps(); ++i) {
            for (std::size_t r = 0; r < opt.time_refinement; ++r) {
                p.times.push_back(g[i] + g.dt(i) * static_cast<double>(r) / static_cast<double>(opt.time_refinement));
            }
        }
        p.times.push_back(g.horizon());
        return p;
    }
};

/// u on every (time node, m node); row k is time node k.
struct PDESolution {
    PDEGrid grid;
    std::vector<double> u;
    // largest |u_mm| seen at the two boundary rows, as a boundary diagnostic
    double boundary_curvature = 0.0;

    double at(std::size_t k, std::size_t j) const { return u[k * grid.n_m + j]; }

    /// Linear interpolation in m at time node k, flat outside the domain.
    double value(std::size_t k, double m) const {
        const double x = (m - grid.m_min) / grid.dm();
        if (x <= 0.0) return at(k, 0);
        if (x >= static_cast<double>(grid.n_m - 1)) return at(k, grid.n_m - 1);
        const auto j = static_cast<std::size_t>(x);
        const double w = x - static_cast<double>(j);
        return (1.0 - w) * at(k, j) + w * at(k, j + 1);
    }

    double max_abs() const {
        double s = 0.0;
        for (double v : u) s = std::max(s, std::abs(v));
        return s;
    }

    /// Columns t, m, u0; every stride-th time row.
    void write_csv(std::ostream& os, std::size_t stride = 1) const {
        os.precision(12);
        os << "t,m,u0\n";
        for (std::size_t k = 0; k < grid.n_times(); k += std::max<std::size_t>(stride, 1)) {
            for (std::size_t j = 0; j < grid.n_m; ++j) os << grid.times[k] << ',' << grid.m(j) << ',' << at(k, j) << '\n';
        }
    }
};

namespace detail {

/// Solves a general tridiagonal system in place (rhs becomes the solution).
inline void thomas_general(std::vector<double> lower, std::vector<double> diag, std::vector<double> upper,
                           std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        INVLAB_REQUIRE(diag[i - 1] != 0.0, NumericError, "singular tridiagonal system");
        const double f = lower[i] / diag[i - 1];
        diag[i] -= f * upper[i - 1];
        rhs[i] -= f * rhs[i - 1];
    }
    INVLAB_REQUIRE(diag[n - 1] != 0.0, NumericError, "singular tridiagonal system");
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

/// Generator rows at one time: L u = sigma mu u_m + sigma^2/2 u_mm - kill u,
/// central differences inside, u_mm = 0 with a one-sided u_m at the ends.
struct Operator {
    std::vector<double> lower, diag, upper, source;
};

inline Operator build_operator(const HazardModel& model, const PDEGrid& pg, double t, const StateFunction* G,
                               bool killing) {
    const std::size_t n = pg.n_m;
    const double dm = pg.dm();
    const double sig = model.sigma(t);
    const double b = 0.5 * sig * sig / (dm * dm);
    const auto slice = model.slice(t);
    Operator op{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                std::vector<double>(n, 0.0)};
    for (std::size_t j = 0; j < n; ++j) {
        const double m = pg.m(j);
        const auto v = slice.evaluate(m);
        const double a = sig * v.mu;
        const double kill = killing ? v.gamma : 0.0;
        if (j == 0) {
            op.diag[j] = -a / dm - kill;
            op.upper[j] = a / dm;
        } else if (j + 1 == n) {
            op.lower[j] = -a / dm;
            op.diag[j] = a / dm - kill;
        } else {
            op.lower[j] = b - 0.5 * a / dm;
            op.diag[j] = -2.0 * b - kill;
            op.upper[j] = b + 0.5 * a / dm;
        }
        // cell averages keep a jump of G between nodes from costing an order
        if (G != nullptr) {
            const double l = j == 0 ? m : m - 0.5 * dm, r = j + 1 == n ? m : m + 0.5 * dm;
            op.source[j] = v.gamma * G->cell_average(t, l, r);
        }
    }
    return op;
}

/// One theta step from u(t1) back to u(t0).
inline std::vector<double> theta_step(const Operator& L0, const Operator& L1, const std::vector<double>& u1,
                                      double dt, double theta) {
    const std::size_t n = u1.size();
    std::vector<double> rhs(n), lo(n), di(n), up(n);
    for (std::size_t j = 0; j < n; ++j) {
        double Lu = L1.diag[j] * u1[j];
        if (j > 0) Lu += L1.lower[j] * u1[j - 1];
        if (j + 1 < n) Lu += L1.upper[j] * u1[j + 1];
        rhs[j] = u1[j] + (1.0 - theta) * dt * Lu + dt * (theta * L0.source[j] + (1.0 - theta) * L1.source[j]);
        lo[j] = -theta * dt * L0.lower[j];
        di[j] = 1.0 - theta * dt * L0.diag[j];
        up[j] = -theta * dt * L0.upper[j];
    }
    if (theta == 0.0) return rhs;
    thomas_general(std::move(lo), std::move(di), std::move(up), rhs);
    return rhs;
}

/// Explicit steps are only stable when every diagonal weight stays nonnegative.
inline void check_explicit(const Operator& L, double dt, double t) {
    for (std::size_t j = 0; j < L.diag.size(); ++j) {
        if (1.0 + dt * L.diag[j] < 0.0) {
            throw PreconditionError("explicit scheme violates the CFL bound at t = " + std::to_string(t) +
                                    ": dt = " + std::to_string(dt) + " needs dt <= " +
                                    std::to_string(-1.0 / L.diag[j]));
        }
    }
}

/// Backward sweep over time nodes [k_from, k_to] with terminal values at k_to.
inline PDESolution backward(const HazardModel& model, const PDEGrid& pg, const StateFunction* G, bool killing,
                            std::vector<double> terminal, std::size_t k_from, std::size_t k_to,
                            const PDEOptions& opt) {
    const std::size_t n = pg.n_m;
    PDESolution sol;
    sol.grid = pg;
    sol.u.assign(pg.n_times() * n, 0.0);
    std::copy(terminal.begin(), terminal.end(), sol.u.begin() + static_cast<std::ptrdiff_t>(k_to * n));
    std::vector<double> u = std::move(terminal);
    Operator L1 = build_operator(model, pg, pg.times[k_to], G, killing);
    for (std::size_t k = k_to; k-- > k_from;) {
        const double t0 = pg.times[k], t1 = pg.times[k + 1], dt = t1 - t0;
        Operator L0 = build_operator(model, pg, t0, G, killing);
        if (opt.theta == 0.0) check_explicit(L1, dt, t1);
        if (opt.rannacher && opt.theta < 1.0 && k + 1 == k_to) {
            const double tm = 0.5 * (t0 + t1);
            const Operator Lm = build_operator(model, pg, tm, G, killing);
            u = theta_step(Lm, L1, u, 0.5 * dt, 1.0);
            u = theta_step(L0, Lm, u, 0.5 * dt, 1.0);
        } else {
            u = theta_step(L0, L1, u, dt, opt.theta);
        }
        std::copy(u.begin(), u.end(), sol.u.begin() + static_cast<std::ptrdiff_t>(k * n));
        L1 = std::move(L0);
    }
    for (std::size_t k = k_from; k <= k_to; ++k) {
        const double* r = sol.u.data() + k * n;
        const double c0 = std::abs(r[0] - 2.0 * r[1] + r[2]), c1 = std::abs(r[n - 1] - 2.0 * r[n - 2] + r[n - 3]);
        sol.boundary_curvature = std::max(sol.boundary_curvature, std::max(c0, c1) / (pg.dm() * pg.dm()));
    }
    return sol;
}

}  // namespace detail

/// Feynman-Kac for the reduced value of the payoff G at default:
///   du/dt + sigma mu u_m + sigma^2/2 u_mm - gamma u + gamma G = 0,  u(T, .) = 0,
/// so u(t, m) = E'[int_t^T e^{-int_t^s gamma} gamma G ds | m_t = m].
inline PDESolution solve_feynman_kac(const HazardModel& model, const StateFunction& G, const TimeGrid& g,
                                     const PDEOptions& opt = {}) {
    INVLAB_REQUIRE(std::isfinite(G.sup_abs()), PreconditionError, "payoff must be bounded");
    const PDEGrid pg = PDEGrid::make(model, g, opt);
    return detail::backward(model, pg, &G, true, std::vector<double>(pg.n_m, 0.0), 0, pg.n_times() - 1, opt);
}

/// Transition semigroup of the reduced diffusion: E'[h(m_{t_to}) | m_{t_from} = m]
/// at the nodes, for MC grid indices from < to.
inline PDESolution propagate(const HazardModel& model, const StateFunction& h, const TimeGrid& g, std::size_t from,
                             std::size_t to, const PDEOptions& opt = {}) {
    INVLAB_REQUIRE(from < to && to <= g.n_steps(), PreconditionError, "need 0 <= s < s + t <= T");
    const PDEGrid pg = PDEGrid::make(model, g, opt);
    const double t_to = g[to];
    std::vector<double> terminal(pg.n_m);
    const double dm = pg.dm();
    for (std::size_t j = 0; j < pg.n_m; ++j) {
        const double m = pg.m(j);
        terminal[j] = h.cell_average(t_to, j == 0 ? m : m - 0.5 * dm, j + 1 == pg.n_m ? m : m + 0.5 * dm);
    }
    const std::size_t r = opt.time_refinement;
    return detail::backward(model, pg, nullptr, false, std::move(terminal), from * r, to * r, opt);
}

/// u(0, 0) on the given grid and on the grid halved in t and m. The finer value
/// is returned together with |coarse - fine|, about three times its error for a
/// second-order scheme, which serves as the discretisation tolerance.
struct PDEValue {
    double value = 0.0;
    double tolerance = 0.0;
};

inline PDEOptions halved(PDEOptions opt) {
    opt.n_m = 2 * opt.n_m - 1;
    opt.time_refinement *= 2;
    return opt;
}

inline PDEValue pde_value_at_origin(const HazardModel& model, const StateFunction& G, const TimeGrid& g,
                                    const PDEOptions& opt = {}) {
    const double coarse = solve_feynman_kac(model, G, g, opt).value(0, 0.0);
    const double fine = solve_feynman_kac(model, G, g, halved(opt)).value(0, 0.0);
    return {fine, std::abs(coarse - fine)};
}

namespace detail {

inline double ratio_z(double d, double se) {
    if (se > 0.0) return d / se;
    return d == 0.0 ? 0.0 : std::copysign(INFINITY, d);
}

/// z of the part of a difference that the discretisation allowance does not cover.
inline double excess_z(double d, double se, double tol) {
    return ratio_z(std::copysign(std::max(0.0, std::abs(d) - tol), d), se);
}

}  // namespace detail

/// Monte Carlo estimate against a deterministic value with a discretisation
/// allowance: passes when |lhs - rhs| <= threshold se + tolerance. The raw
/// z is kept in the details.
inline ReportEntry mc_against_value(std::string id, const WeightedEstimator& est, double value, double disc_tol,
                                    double threshold) {
    ReportEntry e;
    e.theorem_id = std::move(id);
    e.mode = EntryMode::MonteCarlo;
    e.lhs = est.mean;
    e.rhs = value;
    e.se = est.std_error;
    const double d = est.mean - value;
    // z counts only the part of the gap beyond the allowance, so pass <=> |z| <= threshold
    e.z = detail::excess_z(d, est.std_error, disc_tol);
    e.tolerance = threshold;
    e.pass = std::abs(d) <= threshold * est.std_error + disc_tol;
    e.details["discretization_tolerance"] = disc_tol;
    e.details["raw_z"] = ReportEntry::finite_or_null(detail::ratio_z(d, est.std_error));
    e.details["weight_kind"] = to_string(est.weight_kind);
    e.details["n"] = est.n;
    return e;
}

// --- Richardson and maximum principle -----------------------------------------

/// Ratio |u_h - u_{h/2}| / |u_{h/2} - u_{h/4}| (max over interior nodes of the
/// coarse grid at t = 0, |m| <= 2 sd) for three levels halving t and m together.
inline ReportEntry pde_richardson_probe(const HazardModel& model, const StateFunction& G, const TimeGrid& g,
                                        const PDEOptions& opt = {}) {
    const PDEOptions o1 = halved(opt), o2 = halved(o1);
    const PDESolution s0 = solve_feynman_kac(model, G, g, opt);
    const PDESolution s1 = solve_feynman_kac(model, G, g, o1);
    const PDESolution s2 = solve_feynman_kac(model, G, g, o2);
    const double sd = std::sqrt(model.variance_between(0.0, g.horizon()));
    double d01 = 0.0, d12 = 0.0;
    for (std::size_t j = 0; j < s0.grid.n_m; ++j) {
        if (std::abs(s0.grid.m(j)) > 2.0 * sd) continue;
        const double a = s0.at(0, j), b = s1.at(0, 2 * j), c = s2.at(0, 4 * j);
        d01 = std::max(d01, std::abs(a - b));
        d12 = std::max(d12, std::abs(b - c));
    }
    auto e = ReportEntry::convergence("pde.richardson_ratio", d01 / d12, 4.0, 1.0);
    e.details["payoff"] = G.name();
    e.details["coarse_diff"] = d01;
    e.details["fine_diff"] = d12;
    e.details["n_m"] = opt.n_m;
    e.details["n_t"] = s0.grid.n_times() - 1;
    return e;
}

/// |u| <= sup |G| at every node.
inline ReportEntry maximum_principle_check(const PDESolution& s, const StateFunction& G) {
    ReportEntry e;
    e.theorem_id = "pde.maximum_principle";
    e.mode = EntryMode::Pathwise;
    const double m = s.max_abs(), bound = G.sup_abs();
    e.max_abs_discrepancy = std::max(0.0, m - bound);
    e.tolerance = 0.0;
    e.pass = m <= bound;
    e.details["max_abs_u"] = m;
    e.details["sup_abs_G"] = bound;
    e.details["payoff"] = G.name();
    return e;
}

/// G = 1: u(0, 0) is the default probability by T; compared with the MC frequency.
inline ReportEntry pde_default_probability_check(const Scenario& sc, const PDEOptions& opt = {},
                                                 double threshold = 4.0) {
    const auto v = pde_value_at_origin(sc.model, StateFunction::constant(1.0), sc.grid(), opt);
    std::vector<double> x(sc.n_paths());
    for (std::size_t p = 0; p < x.size(); ++p) x[p] = sc.batch.tau_state(p).within_horizon() ? 1.0 : 0.0;
    return mc_against_value("pde.default_probability_vs_mc", expect_Q(x), v.value, v.tolerance, threshold);
}

// --- semigroup ---------------------------------------------------------------

/// E'[h(m_{t_to}) | m_{t_from} in bin] against the PDE semigroup evaluated at
/// each path's m_{t_from}, P-weighted (Q_T) in equal-mass bins. A bin passes
/// when |lhs - rhs| <= threshold se + tol, tol the grid-halving difference.
/// z is that of the worst bin, counting only the part of the gap beyond tol.
inline ReportEntry semigroup_check(const Scenario& sc, const StateFunction& h, std::size_t from, std::size_t to,
                                   const PDEOptions& opt = {}, std::size_t n_bins = 10, double threshold = 4.0) {
    const PDESolution s0 = propagate(sc.model, h, sc.grid(), from, to, opt);
    const PDESolution s1 = propagate(sc.model, h, sc.grid(), from, to, halved(opt));
    const std::size_t k0 = from * opt.time_refinement, k1 = from * halved(opt).time_refinement;
    const std::size_t n = sc.n_paths();
    std::vector<double> x(n), y(n), ms(n), qT = sc.functionals.terminal_density();
    double tol = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        ms[p] = sc.batch.m(p, from);
        x[p] = h(sc.grid()[to], sc.batch.m(p, to));
        y[p] = s1.value(k1, ms[p]);
        tol = std::max(tol, std::abs(s0.value(k0, ms[p]) - y[p]));
    }
    const std::vector<unsigned char> all(n, 1);
    const auto bins = equal_mass_bins(ms, all, static_cast<int>(n_bins));
    ReportEntry e;
    e.theorem_id = "markov.semigroup";
    e.mode = EntryMode::MonteCarlo;
    e.tolerance = threshold;
    e.pass = true;
    e.z = 0.0;
    double worst = -1.0;
    e.details["statistic"] = "max_abs_z";
    e.details["discretization_tolerance"] = tol;
    e.details["bins"] = n_bins;
    e.details["s"] = sc.grid()[from];
    e.details["t"] = sc.grid()[to] - sc.grid()[from];
    for (std::size_t bin = 0; bin < n_bins; ++bin) {
        std::vector<double> bx, by, bw;
        for (std::size_t p = 0; p < n; ++p) {
            if (bins[p] != static_cast<int>(bin)) continue;
            bx.push_back(x[p]);
            by.push_back(y[p]);
            bw.push_back(qT[p]);
        }
        const auto c = compare_paired(bx, bw, by, bw);
        if (!(std::abs(c.diff()) <= threshold * c.se_diff + tol)) e.pass = false;
        // the worst bin is the one least covered by the allowance
        const double ex = detail::excess_z(c.diff(), c.se_diff, tol);
        if (std::abs(ex) > worst) {
            worst = std::abs(ex);
            e.z = ex;
            e.details["raw_z"] = ReportEntry::finite_or_null(c.z);
            e.lhs = c.lhs;
            e.rhs = c.rhs;
            e.se = c.se_diff;
            e.details["worst_bin"] = bin;
        }
    }
    return e;
}

// --- four-way comparison -----------------------------------------------------

struct FourWayComparison {
    WeightedEstimator direct, invariance, survival, naive;
    PDEValue pde;
    std::vector<ReportEntry> entries;

    /// Columns estimator, mean, std_error, n; the PDE row carries its
    /// discretisation tolerance in the std_error column.
    void write_csv(std::ostream& os, const std::string& label) const {
        os.precision(12);
        const std::pair<const char*, const WeightedEstimator*> rows[] = {
            {"direct", &direct}, {"invariance", &invariance}, {"survival", &survival}, {"naive", &naive}};
        for (const auto& [name, est] : rows) {
            os << label << ',' << name << ',' << est->mean << ',' << est->std_error << ',' << est->n << '\n';
        }
        os << label << ",pde," << pde.value << ',' << pde.tolerance << ",0\n";
    }
    static void write_csv_header(std::ostream& os) { os << "case,estimator,mean,std_error,n\n"; }
};

/// (a) direct E[1_{tau <= T} G(tau, m_tau)]; (b) E'[int e^{-Gamma} gamma G dt]
/// under P; (c) the same functional under the survival measure; (d) the same
/// functional under Q, i.e. the pre-default formulas continued past tau; and
/// the PDE value u(0, 0). (a), (b), (c) and the PDE must agree. Outside
/// immersion (d) differs from (a) unless G = 0; under immersion it coincides.
inline FourWayComparison compare_four_estimators(const Scenario& sc, const StateFunction& G,
                                                 const PDEOptions& pde_opt = {}, double threshold = 4.0,
                                                 double separation = 5.0, const std::string& prefix = "comparison") {
    const ScenarioBatch& b = sc.batch;
    const PathFunctionals& f = sc.functionals;
    const TimeGrid& g = b.grid();
    const std::size_t n = b.n_paths(), N = g.n_steps();
    std::vector<double> a(n), y(n), qT = f.terminal_density(), GT(n), surv_w(n);
    std::vector<unsigned char> alive(n);
    for (std::size_t p = 0; p < n; ++p) {
        const EventState& e = b.tau_state(p);
        a[p] = e.within_horizon() ? G(e.time, e.m) : 0.0;
        y[p] = detail::grid_integral(
            g, 0, [&](std::size_t i) { return G(g[i], b.m(p, i)) * std::exp(-f.Gamma(p, i)) * f.gamma(p, i); });
        GT[p] = f.Gamma(p, N);
        alive[p] = b.tau(p) > g.horizon();
        surv_w[p] = alive[p] ? std::exp(GT[p]) : 0.0;
    }
    FourWayComparison out;
    out.direct = expect_Q(a);
    out.invariance = expect_P(y, qT);
    out.survival = expect_survival(y, GT, alive);
    out.naive = expect_Q(y);
    out.pde = pde_value_at_origin(sc.model, G, g, pde_opt);

    const std::string payoff = G.name();
    const auto tag = [&](ReportEntry e) {
        e.details["payoff"] = payoff;
        return e;
    };
    out.entries.push_back(
        tag(ReportEntry::from_comparison(prefix + ".direct_vs_invariance", compare_paired(a, {}, y, qT), threshold)));
    out.entries.push_back(
        tag(ReportEntry::from_comparison(prefix + ".direct_vs_survival", compare_paired(a, {}, y, surv_w), threshold)));
    out.entries.push_back(tag(ReportEntry::from_comparison(prefix + ".invariance_vs_survival",
                                                           compare_paired(y, qT, y, surv_w), threshold)));
    out.entries.push_back(
        tag(mc_against_value(prefix + ".direct_vs_pde", out.direct, out.pde.value, out.pde.tolerance, threshold)));
    out.entries.push_back(tag(
        mc_against_value(prefix + ".invariance_vs_pde", out.invariance, out.pde.value, out.pde.tolerance, threshold)));
    out.entries.push_back(
        tag(mc_against_value(prefix + ".survival_vs_pde", out.survival, out.pde.value, out.pde.tolerance, threshold)));

    const bool collapse = sc.model.immersed() || G.kind == StateFunction::Kind::Zero;
    const auto c = compare_paired(a, {}, y, {});
    ReportEntry d = ReportEntry::from_comparison(
        collapse ? prefix + ".naive_collapses" : prefix + ".naive_separated", c, collapse ? threshold : separation);
    // a separation claim passes when |z| is at least the separation level
    if (!collapse) d.pass = std::abs(c.z) >= separation;
    d.details["criterion"] = collapse ? "abs_z_at_most" : "abs_z_at_least";
    out.entries.push_back(tag(std::move(d)));
    return out;
}

/// Reruns the naive separation on fresh seeds and on doubled path counts; the
/// gap is a model property, so every run must clear the separation level.
inline ReportEntry naive_separation_robustness(const ModelConfig& cfg, const TimeGrid& g, std::size_t n_paths,
                                               std::uint64_t seed, const StateFunction& G, double separation = 5.0) {
    ReportEntry e;
    e.theorem_id = "comparison.naive_separated_reseeded";
    e.mode = EntryMode::MonteCarlo;
    e.tolerance = separation;
    e.pass = true;
    e.details["statistic"] = "min_abs_z";
    e.details["runs"] = nlohmann::json::array();
    const std::pair<std::uint64_t, std::size_t> runs[] = {
        {seed + 1, n_paths}, {seed + 2, n_paths}, {seed + 3, 2 * n_paths}};
    double min_z = INFINITY;
    for (const auto& [s, np] : runs) {
        const auto sc = Scenario::make(cfg, g, np, s);
        const std::size_t n = sc->n_paths();
        std::vector<double> a(n), y(n);
        for (std::size_t p = 0; p < n; ++p) {
            const EventState& ev = sc->batch.tau_state(p);
            a[p] = ev.within_horizon() ? G(ev.time, ev.m) : 0.0;
            y[p] = detail::grid_integral(g, 0, [&](std::size_t i) {
                return G(g[i], sc->batch.m(p, i)) * std::exp(-sc->functionals.Gamma(p, i)) *
                       sc->functionals.gamma(p, i);
            });
        }
        const auto c = compare_paired(a, {}, y, {});
        e.details["runs"].push_back({{"seed", s}, {"n_paths", np}, {"z", c.z}, {"direct", c.lhs}, {"naive", c.rhs}});
        if (std::abs(c.z) < std::abs(min_z)) {
            min_z = c.z;
            e.lhs = c.lhs;
            e.rhs = c.rhs;
            e.se = c.se_diff;
        }
        if (!(std::abs(c.z) >= separation)) e.pass = false;
    }
    e.z = min_z;
    e.details["payoff"] = G.name();
    return e;
}

}  // namespace invlab

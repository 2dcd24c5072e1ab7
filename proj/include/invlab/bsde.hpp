#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "invlab/errors.hpp"
#include "invlab/estimators.hpp"
#include "invlab/report.hpp"
#include "invlab/scenario.hpp"
#include "invlab/transfer.hpp"

namespace invlab {

/// Reduced driver g'(t, m, v, k, phi) with gamma = gamma(t, m) passed in. The
/// full driver on [0, tau) is g = g' + gamma v: the jump of Z to zero at tau is
/// compensated by -gamma Z dt, which the reduced equation no longer carries.
struct DriverSpec {
    enum class Kind { Zero, Linear, IntensityDiscount, Funding, Cubic };
    Kind kind = Kind::Zero;
    double lambda = 0.1;   // linear rate
    double rate = 0.02;    // funding: -rate v
    double spread = 0.05;  // funding: -spread v^+
    double k_coef = 0.0;   // funding: + k_coef k
    // declared monotonicity constant in v and Lipschitz constants in (k, phi)
    double C_v = 0.0, C_k = 0.0, C_phi = 0.0;

    static DriverSpec zero() { return {}; }
    static DriverSpec linear(double lambda) {
        DriverSpec d;
        d.kind = Kind::Linear;
        d.lambda = lambda;
        d.C_v = std::max(lambda, 0.0);
        return d;
    }
    static DriverSpec intensity_discount() {
        DriverSpec d;
        d.kind = Kind::IntensityDiscount;
        return d;
    }
    static DriverSpec funding(double rate, double spread, double k_coef) {
        DriverSpec d;
        d.kind = Kind::Funding;
        d.rate = rate;
        d.spread = spread;
        d.k_coef = k_coef;
        d.C_v = std::max(0.0, -rate);
        d.C_k = std::abs(k_coef);
        return d;
    }
    static DriverSpec cubic() {
        DriverSpec d;
        d.kind = Kind::Cubic;
        return d;
    }

    static DriverSpec from_name(const std::string& name, double lambda = 0.1) {
        if (name == "zero") return zero();
        if (name == "linear") return linear(lambda);
        if (name == "intensity_discount") return intensity_discount();
        if (name == "funding") return funding(0.02, 0.05, 0.1);
        if (name == "cubic") return cubic();
        throw ConfigError("unknown driver '" + name + "'");
    }

    std::string name() const {
        switch (kind) {
            case Kind::Zero: return "zero";
            case Kind::Linear: return "linear";
            case Kind::IntensityDiscount: return "intensity_discount";
            case Kind::Funding: return "funding";
            case Kind::Cubic: return "cubic";
        }
        return "zero";
    }

    double reduced(double /*t*/, double /*m*/, double v, double k, double /*phi*/, double gamma) const {
        switch (kind) {
            case Kind::Zero: return 0.0;
            case Kind::Linear: return lambda * v;
            case Kind::IntensityDiscount: return -gamma * v;
            case Kind::Funding: return -rate * v - spread * std::max(v, 0.0) + k_coef * k;
            case Kind::Cubic: return -v * v * v;
        }
        return 0.0;
    }

    double full(double t, double m, double v, double k, double phi, double gamma) const {
        return reduced(t, m, v, k, phi, gamma) + gamma * v;
    }

    /// Sampled finite-difference probes of the declared constants. The growth
    /// condition on sup_{|v| <= c} is assumed, not probed.
    void validate() const {
        const double vs[] = {-5.0, -1.0, -0.3, 0.0, 0.2, 0.7, 2.0, 5.0};
        const double ks[] = {-2.0, 0.0, 1.5};
        const double gammas[] = {0.0, 0.5, 4.0};
        const double slack = 1e-9;
        for (double g : gammas) {
            for (double k : ks) {
                for (double v1 : vs) {
                    for (double v2 : vs) {
                        if (v1 == v2) continue;
                        const double d = (reduced(0.5, 0.0, v1, k, 0.0, g) - reduced(0.5, 0.0, v2, k, 0.0, g)) *
                                         (v1 - v2);
                        INVLAB_REQUIRE(d <= (C_v + slack) * (v1 - v2) * (v1 - v2), PreconditionError,
                                       "driver " + name() + " is not monotone with the declared constant");
                    }
                }
            }
            for (double v : vs) {
                for (double k1 : ks) {
                    for (double k2 : ks) {
                        const double dk = std::abs(reduced(0.5, 0.0, v, k1, 0.0, g) - reduced(0.5, 0.0, v, k2, 0.0, g));
                        INVLAB_REQUIRE(dk <= (C_k + slack) * std::abs(k1 - k2) + slack, PreconditionError,
                                       "driver " + name() + " violates its Lipschitz constant in k");
                        const double dp = std::abs(reduced(0.5, 0.0, v, 0.0, k1, g) - reduced(0.5, 0.0, v, 0.0, k2, g));
                        INVLAB_REQUIRE(dp <= (C_phi + slack) * std::abs(k1 - k2) + slack, PreconditionError,
                                       "driver " + name() + " violates its Lipschitz constant in phi");
                    }
                }
            }
        }
    }
};

/// Piecewise-linear function of m on sorted knots, flat outside them. An
/// empty function is zero, a single value a constant.
struct HatFunction {
    std::vector<double> knots;
    std::vector<double> values;

    double operator()(double m) const {
        if (values.empty()) return 0.0;
        if (values.size() == 1 || m <= knots.front()) return values.front();
        if (m >= knots.back()) return values.back();
        const std::size_t j = static_cast<std::size_t>(std::upper_bound(knots.begin(), knots.end(), m) -
                                                       knots.begin()) - 1;
        const double w = (m - knots[j]) / (knots[j + 1] - knots[j]);
        return (1.0 - w) * values[j] + w * values[j + 1];
    }
};

namespace detail {

/// Tridiagonal solve (Thomas); diag and rhs are overwritten.
inline void thomas(std::vector<double>& diag, const std::vector<double>& off, std::vector<double>& rhs,
                   double pivot_floor) {
    const std::size_t n = diag.size();
    for (std::size_t j = 1; j < n; ++j) {
        INVLAB_REQUIRE(diag[j - 1] > pivot_floor, NumericError,
                       "regression rank deficiency: empty hat function (reduce the number of bins)");
        const double f = off[j - 1] / diag[j - 1];
        diag[j] -= f * off[j - 1];
        rhs[j] -= f * rhs[j - 1];
    }
    INVLAB_REQUIRE(diag[n - 1] > pivot_floor, NumericError,
                   "regression rank deficiency: empty hat function (reduce the number of bins)");
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t j = n - 1; j-- > 0;) rhs[j] = (rhs[j] - off[j] * rhs[j + 1]) / diag[j];
}

}  // namespace detail

/// Weighted least squares of each target on hat functions over equal-mass
/// knots of x (n_bins intervals, positive-weight samples only). Returns one
/// HatFunction per target.
inline std::vector<HatFunction> fit_hat(std::span<const double> x, std::span<const double> w,
                                        const std::vector<std::span<const double>>& ys, int n_bins) {
    INVLAB_REQUIRE(n_bins >= 1, PreconditionError, "need at least one regression bin");
    std::vector<double> xs;
    xs.reserve(x.size());
    for (std::size_t p = 0; p < x.size(); ++p) {
        if (w[p] > 0.0) xs.push_back(x[p]);
    }
    std::vector<HatFunction> out(ys.size());
    if (xs.empty()) return out;
    std::sort(xs.begin(), xs.end());
    std::vector<double> knots;
    for (int j = 0; j <= n_bins; ++j) {
        const double k = xs[(static_cast<std::size_t>(j) * (xs.size() - 1)) / static_cast<std::size_t>(n_bins)];
        if (knots.empty() || k > knots.back()) knots.push_back(k);
    }
    if (knots.size() < 2) {
        double sw = 0.0;
        std::vector<double> sy(ys.size(), 0.0);
        for (std::size_t p = 0; p < x.size(); ++p) {
            if (!(w[p] > 0.0)) continue;
            sw += w[p];
            for (std::size_t r = 0; r < ys.size(); ++r) sy[r] += w[p] * ys[r][p];
        }
        for (std::size_t r = 0; r < ys.size(); ++r) out[r] = {{knots[0]}, {sy[r] / sw}};
        return out;
    }
    const std::size_t nk = knots.size();
    std::vector<double> diag(nk, 0.0), off(nk - 1, 0.0);
    std::vector<std::vector<double>> rhs(ys.size(), std::vector<double>(nk, 0.0));
    for (std::size_t p = 0; p < x.size(); ++p) {
        const double wp = w[p];
        if (!(wp > 0.0)) continue;
        const double m = std::clamp(x[p], knots.front(), knots.back());
        std::size_t j = static_cast<std::size_t>(std::upper_bound(knots.begin(), knots.end(), m) - knots.begin());
        j = std::min(j, nk - 1) - 1;
        const double b = (m - knots[j]) / (knots[j + 1] - knots[j]);
        const double a = 1.0 - b;
        diag[j] += wp * a * a;
        diag[j + 1] += wp * b * b;
        off[j] += wp * a * b;
        for (std::size_t r = 0; r < ys.size(); ++r) {
            rhs[r][j] += wp * a * ys[r][p];
            rhs[r][j + 1] += wp * b * ys[r][p];
        }
    }
    const double scale = *std::max_element(diag.begin(), diag.end());
    for (std::size_t r = 0; r < ys.size(); ++r) {
        std::vector<double> d = diag;
        detail::thomas(d, off, rhs[r], 1e-12 * scale);
        out[r] = {knots, std::move(rhs[r])};
    }
    return out;
}

struct BSDEOptions {
    int n_bins = 40;
    int max_iterations = 100;
    double fixed_point_tolerance = 1e-14;
    double threshold = 4.0;
};

/// Reduced solution (U, K, Phi) as per-step functions of m. For a lump
/// cashflow the state also carries theta: U, K and Phi vanish from theta on.
struct BSDESolution {
    DriverSpec driver;
    Cashflow cashflow;
    bool lump = false;
    std::vector<HatFunction> U, K, Phi;  // per grid point, U.back() empty (zero)
    double U0 = 0.0;
    double U0_se = 0.0;
    std::vector<double> step0_sample, step0_weight;  // per path, estimator of U0
    int max_iterations_used = 0;
    double max_contraction = 0.0;

    bool alive(const ScenarioBatch& b, std::size_t p, std::size_t i) const {
        return !lump || b.theta(p) > b.grid()[i];
    }
    double u(const ScenarioBatch& b, std::size_t p, std::size_t i) const {
        return alive(b, p, i) ? U[i](b.m(p, i)) : 0.0;
    }
    double k(const ScenarioBatch& b, std::size_t p, std::size_t i) const {
        return alive(b, p, i) ? K[i](b.m(p, i)) : 0.0;
    }
    double phi(const ScenarioBatch& b, std::size_t p, std::size_t i) const {
        return alive(b, p, i) ? Phi[i](b.m(p, i)) : 0.0;
    }

    /// Surface rows t, m, U, K at the regression knots.
    void write_surface_csv(std::ostream& out, const TimeGrid& g) const {
        out.precision(12);
        out << "t,m,U,K\n";
        for (std::size_t i = 0; i < U.size(); ++i) {
            if (U[i].values.empty()) {
                out << g[i] << ",0,0,0\n";
                continue;
            }
            for (std::size_t j = 0; j < U[i].knots.size(); ++j) {
                const double m = U[i].knots[j];
                out << g[i] << ',' << m << ',' << U[i].values[j] << ',' << K[i](m) << '\n';
            }
        }
    }
};

namespace detail {

/// Per-path cursor over jump events, so that a sweep over the grid visits each
/// jump once.
struct JumpCursor {
    std::vector<std::size_t> pos;
    explicit JumpCursor(std::size_t n, std::size_t fill = 0) : pos(n, fill) {}
};

/// E[int_{t0}^{upto} G(s, m_s) ds | m_{t0} = m0, m_{t1} = m1] for upto <= t1,
/// by 8-point Gauss-Legendre over the exact Gaussian bridge marginals. A
/// trapezoid on the endpoints is biased when G jumps where paths start.
inline double bridge_occupation(const HazardModel& model, const StateFunction& G, double t0, double m0, double t1,
                                double m1, double upto) {
    static constexpr double kNode[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                                        0.9602898564975363};
    static constexpr double kWeight[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                                          0.1012285362903763};
    if (!(upto > t0)) return 0.0;
    const double dv = model.variance_between(t0, t1);
    const double half = 0.5 * (upto - t0), mid = 0.5 * (upto + t0);
    double s = 0.0;
    for (int k = 0; k < 8; ++k) {
        const double u = mid + half * (k < 4 ? -kNode[k] : kNode[k - 4]);
        const double left = model.variance_between(t0, u);
        const double w = dv > 0.0 ? left / dv : 0.0;
        s += kWeight[k % 4] * G.gaussian_mean(u, m0 + w * (m1 - m0), left * (1.0 - w));
    }
    return s * half;
}

inline double mark_second_moment(const ModelConfig& c) { return 2.0 * c.jumps.mark_mean * c.jumps.mark_mean; }

}  // namespace detail

/// Backward regression scheme for the reduced equation
///   U_t = E'[int_t^T g'(s, m_s, U_s, K_s, Phi_s) ds + A'_T - A'_t | F_t],  U_T = 0.
/// E' is a weighted regression on m_{t_i} with one-step density ratios
/// Q_{t_{i+1}} / Q_{t_i}; the step is implicit in v, explicit in (k, phi). A
/// lump at the client default is replaced by its compensator h G 1_{s < theta} ds,
/// integrated over the Brownian bridge between grid values, the rest
/// being a martingale that does not move the conditional expectation.
inline BSDESolution solve_reduced(const Scenario& sc, const DriverSpec& driver, const Cashflow& A,
                                  const BSDEOptions& opt = {}) {
    driver.validate();
    A.validate();
    const ScenarioBatch& b = sc.batch;
    const PathFunctionals& f = sc.functionals;
    const TimeGrid& g = b.grid();
    const std::size_t n = b.n_paths();
    const std::size_t N = g.n_steps();
    const bool lump = A.kind == Cashflow::Kind::ClientLump;
    if (lump) INVLAB_REQUIRE(b.has_client(), PreconditionError, "lump cashflow needs the client default clock");
    INVLAB_REQUIRE(std::isfinite(A.density.sup_abs()) && std::isfinite(A.exposure.sup_abs()), PreconditionError,
                   "cashflow must be square integrable");
    const double h_client = sc.config().client_hazard;
    const double lambda = sc.config().jumps.intensity;
    const double jump_mean = lambda * sc.config().jumps.mark_mean;
    const double jump_var_rate = lambda * detail::mark_second_moment(sc.config());

    BSDESolution sol;
    sol.driver = driver;
    sol.cashflow = A;
    sol.lump = lump;
    sol.U.resize(N + 1);
    sol.K.resize(N + 1);
    sol.Phi.resize(N + 1);

    std::vector<double> x(n), w(n), y(n), ky(n), py(n);
    detail::JumpCursor cur(n);
    for (std::size_t p = 0; p < n; ++p) cur.pos[p] = b.jumps(p).size();

    for (std::size_t i = N; i-- > 0;) {
        const double t0 = g[i], t1 = g[i + 1], dt = g.dt(i);
        for (std::size_t p = 0; p < n; ++p) {
            x[p] = b.m(p, i);
            const bool alive = !lump || b.theta(p) > t0;
            w[p] = alive ? f.Q(p, i + 1) / f.Q(p, i) : 0.0;
            const bool alive_next = !lump || b.theta(p) > t1;
            const double m1 = b.m(p, i + 1);
            double target = alive_next ? sol.U[i + 1](m1) : 0.0;
            if (lump) {
                if (alive) {
                    target += h_client * detail::bridge_occupation(sc.model, A.exposure, t0, x[p], t1, m1,
                                                                   std::min(b.theta(p), t1));
                }
            } else {
                target += 0.5 * (A.density(t0, x[p]) + A.density(t1, m1)) * dt;
            }
            y[p] = target;
        }
        const auto c = fit_hat(x, w, {std::span<const double>(y)}, opt.n_bins)[0];
        for (std::size_t p = 0; p < n; ++p) {
            const double r = y[p] - c(x[p]);
            ky[p] = r * (b.db(p, i) - f.mu(p, i) * dt) / dt;
            double jumps = 0.0;
            const auto js = b.jumps(p);
            std::size_t& k = cur.pos[p];
            while (k > 0 && js[k - 1].time > t0) {
                if (js[k - 1].time <= t1) jumps += js[k - 1].mark;
                --k;
            }
            py[p] = jump_var_rate > 0.0 ? r * (jumps - jump_mean * dt) / (jump_var_rate * dt) : 0.0;
        }
        auto kp = fit_hat(x, w, {std::span<const double>(ky), std::span<const double>(py)}, opt.n_bins);
        sol.K[i] = std::move(kp[0]);
        sol.Phi[i] = std::move(kp[1]);

        // implicit step at the knots: v = c + g'(v, k, phi) dt
        HatFunction u = c;
        for (std::size_t j = 0; j < u.values.size(); ++j) {
            const double m = u.knots[j];
            const double kj = sol.K[i](m), pj = sol.Phi[i](m);
            const double gam = sc.model.intensity_gamma(t0, m);
            double v = c.values[j];
            double prev_step = 0.0;
            int it = 0;
            for (;; ++it) {
                INVLAB_REQUIRE(it < opt.max_iterations, NumericError,
                               "driver fixed point did not converge within the iteration limit");
                const double next = c.values[j] + driver.reduced(t0, m, v, kj, pj, gam) * dt;
                const double step = std::abs(next - v);
                // ratios of steps near round-off say nothing about the contraction
                if (prev_step > 1e-10 * std::max(1.0, std::abs(v))) {
                    sol.max_contraction = std::max(sol.max_contraction, step / prev_step);
                }
                v = next;
                if (step <= opt.fixed_point_tolerance * std::max(1.0, std::abs(v))) break;
                prev_step = step;
            }
            sol.max_iterations_used = std::max(sol.max_iterations_used, it + 1);
            u.values[j] = v;
        }
        sol.U[i] = std::move(u);

        if (i == 0) {
            sol.step0_sample.resize(n);
            sol.step0_weight = w;
            for (std::size_t p = 0; p < n; ++p) {
                const double m = x[p];
                sol.step0_sample[p] =
                    y[p] + driver.reduced(t0, m, sol.U[0](m), sol.K[0](m), sol.Phi[0](m), f.gamma(p, 0)) * dt;
            }
            const auto est = expect_P(sol.step0_sample, sol.step0_weight);
            sol.U0 = sol.U[0](0.0);
            sol.U0_se = est.std_error;
        }
    }
    return sol;
}

/// Full solution by the lift Z = U 1_{t < tau ^ T}, L = K, Psi = Phi before tau.
struct LiftedSolution {
    const Scenario& sc;
    const BSDESolution& sol;

    bool before_tau(std::size_t p, std::size_t i) const {
        return i < sc.grid().n_steps() && sc.grid()[i] < sc.batch.tau(p);
    }
    double Z(std::size_t p, std::size_t i) const { return before_tau(p, i) ? sol.u(sc.batch, p, i) : 0.0; }
    double L(std::size_t p, std::size_t i) const { return before_tau(p, i) ? sol.k(sc.batch, p, i) : 0.0; }
    double Psi(std::size_t p, std::size_t i) const { return before_tau(p, i) ? sol.phi(sc.batch, p, i) : 0.0; }
};

inline LiftedSolution lift_to_full(const Scenario& sc, const BSDESolution& sol) { return {sc, sol}; }

/// Residual increments of the full equation, stopped at tau ^ T:
///   dZ + g dt + dA^{tau-},
/// a martingale under (G, Q) when the reduced solve is right. The stochastic
/// integrals L dW* + Psi dJ~ are left in: they are martingale increments, and
/// since L is fitted on these same paths subtracting it couples the test to
/// the regression.
inline std::vector<ReportEntry> verify_full_residual(const LiftedSolution& z, const BSDEOptions& opt = {}) {
    const Scenario& sc = z.sc;
    const BSDESolution& sol = z.sol;
    const ScenarioBatch& b = sc.batch;
    const PathFunctionals& f = sc.functionals;
    const TimeGrid& g = b.grid();
    const std::size_t n = b.n_paths(), N = g.n_steps();
    const DriverSpec& drv = sol.driver;
    const Cashflow& A = sol.cashflow;

    std::vector<double> inc(n * N, 0.0), total(n, 0.0), jump_var(N, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
        const double tau = b.tau(p);
        const EventState& e = b.tau_state(p);
        for (std::size_t i = 0; i < N && g[i] < tau; ++i) {
            const double t0 = g[i], t1 = g[i + 1];
            const bool defaults = tau <= t1;
            const double end = defaults ? tau : t1;
            const double span = end - t0;
            const double m0 = b.m(p, i);
            const double m_end = defaults ? e.m : b.m(p, i + 1);
            const double Zi = z.Z(p, i), Li = z.L(p, i), Pi = z.Psi(p, i);
            double Z_end = 0.0;
            if (!defaults && (!sol.lump || b.theta(p) > t1)) Z_end = sol.u(b, p, i + 1);
            if (i + 1 == N && !defaults) Z_end = 0.0;
            double dA = 0.0;
            if (sol.lump) {
                const double th = b.theta(p);
                if (th > t0 && th <= t1 && th < tau) dA = A.exposure(th, b.theta_state(p).m);
            } else {
                dA = 0.5 * (A.density(t0, m0) + A.density(end, m_end)) * span;
            }
            // g = g' + gamma v. The gamma part int gamma Z ds must match the jump
            // -Z(tau-), so Z is taken trapezoidal against the exact dGamma, with
            // Z(tau-) interpolated in time at the bridged factor value.
            const double dGamma = (defaults ? f.at_tau(p).Gamma : f.Gamma(p, i + 1)) - f.Gamma(p, i);
            double Z_pre = Z_end;
            if (defaults && (!sol.lump || b.theta(p) > tau)) {
                const double w = span / g.dt(i);
                Z_pre = (1.0 - w) * sol.U[i](e.m) + w * sol.U[i + 1](e.m);
            }
            const double r = Z_end - Zi + drv.reduced(t0, m0, Zi, Li, Pi, f.gamma(p, i)) * span +
                             0.5 * (Zi + Z_pre) * dGamma + dA;
            jump_var[i] += Zi * Zi * dGamma;
            inc[p * N + i] = r;
            total[p] += r;
        }
    }
    // Variance floor per step: the default jump -Z 1_{tau in step} has conditional
    // variance ~ Z^2 dGamma, which a step without observed defaults cannot show;
    // below that, rounding of increments that are differences of values of size |U|.
    std::vector<double> floor(N);
    for (std::size_t i = 0; i < N; ++i) {
        double scale = 1.0;
        for (double v : sol.U[i].values) scale = std::max(scale, std::abs(v));
        floor[i] = std::max(jump_var[i] / static_cast<double>(n),
                            std::pow(64.0 * std::numeric_limits<double>::epsilon() * scale, 2));
    }
    std::vector<ReportEntry> out;
    const std::vector<double> unit;
    const auto dt = martingale_drift_test(
        n, N, [&](std::size_t p, std::size_t i) { return inc[p * N + i]; }, unit, opt.threshold, floor);
    ReportEntry e = ReportEntry::from_drift_test("bsde.full_residual_martingale", dt);
    e.details["driver"] = drv.name();
    e.details["cashflow"] = A.name();
    out.push_back(e);
    const std::vector<double> zero(n, 0.0);
    ReportEntry t = ReportEntry::from_comparison("bsde.full_residual_terminal_mean", compare_paired(total, {}, zero, {}),
                                                 opt.threshold);
    out.push_back(t);

    // U_T = 0 and Z = 0 on [tau ^ T, infinity), read back through the lift
    double worst = 0.0;
    for (double v : sol.U[N].values) worst = std::max(worst, std::abs(v));
    for (std::size_t p = 0; p < n; ++p) {
        worst = std::max(worst, std::abs(z.Z(p, N)));
        for (std::size_t i = 0; i < N; ++i) {
            if (g[i] >= b.tau(p)) worst = std::max(worst, std::abs(z.Z(p, i)));
        }
    }
    out.push_back(ReportEntry::pathwise("bsde.terminal_conditions", worst, 1.0, 0.0));
    return out;
}

/// Transfer of norms: E[int_0^{tau ^ T} e^{Gamma}(Z^2 + L^2 + Psi^2) dt] on the
/// full side against E'[int_0^T (U^2 + K^2 + Phi^2) dt], left-point sums.
inline ReportEntry norm_transfer_check(const LiftedSolution& z, const BSDEOptions& opt = {}) {
    const Scenario& sc = z.sc;
    const ScenarioBatch& b = sc.batch;
    const TimeGrid& g = b.grid();
    const std::size_t n = b.n_paths(), N = g.n_steps();
    std::vector<double> full(n, 0.0), reduced(n, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t i = 0; i < N; ++i) {
            const double dt = g.dt(i);
            const double u = z.sol.u(b, p, i), k = z.sol.k(b, p, i), ph = z.sol.phi(b, p, i);
            reduced[p] += (u * u + k * k + ph * ph) * dt;
            if (z.before_tau(p, i)) {
                const double Zi = z.Z(p, i), Li = z.L(p, i), Pi = z.Psi(p, i);
                full[p] += std::exp(sc.functionals.Gamma(p, i)) * (Zi * Zi + Li * Li + Pi * Pi) * dt;
            }
        }
    }
    const auto qT = sc.functionals.terminal_density();
    return ReportEntry::from_comparison("bsde.norm_transfer", compare_paired(full, {}, reduced, qT), opt.threshold);
}

/// With the intensity-discount driver the full driver is zero, so U_0 must
/// equal the direct Q-side value E[A^{tau-}_T]; for the client lump this is
/// the CVA E[1_{theta < tau ^ T} G(theta, m_theta)].
inline ReportEntry verify_value_vs_direct(const Scenario& sc, const BSDESolution& sol, const BSDEOptions& opt = {}) {
    INVLAB_REQUIRE(sol.driver.kind == DriverSpec::Kind::IntensityDiscount, PreconditionError,
                   "the direct value check needs the intensity-discount driver");
    const std::size_t n = sc.n_paths();
    std::vector<double> direct(n);
    for (std::size_t p = 0; p < n; ++p) direct[p] = detail::cashflow_sides(sc, p, sol.cashflow, 0).first;
    ReportEntry e = ReportEntry::from_comparison(
        sol.lump ? "bsde.cva_vs_direct" : "bsde.value_vs_direct",
        compare_paired(direct, {}, sol.step0_sample, sol.step0_weight), opt.threshold);
    e.details["U0"] = sol.U0;
    return e;
}

/// U_0 for g' = lambda v and dA' = a dt: a (e^{lambda T} - 1) / lambda.
inline double linear_closed_form(double a, double lambda, double T) {
    return lambda == 0.0 ? a * T : a * std::expm1(lambda * T) / lambda;
}

/// First-order check: bias of U_0 against the linear closed form on the grid
/// and on its halving; the ratio should be close to 2.
inline ReportEntry bsde_halving_probe(const ModelConfig& config, const TimeGrid& grid, std::size_t n_paths,
                                      std::uint64_t seed, double lambda = 0.1, double a = 1.0,
                                      const BSDEOptions& opt = {}) {
    const double exact = linear_closed_form(a, lambda, grid.horizon());
    const auto bias = [&](const TimeGrid& tg) {
        const auto sc = Scenario::make(config, tg, n_paths, seed);
        const auto sol = solve_reduced(*sc, DriverSpec::linear(lambda), Cashflow::continuous(StateFunction::constant(a)),
                                       opt);
        return sol.U0 - exact;
    };
    const double b1 = bias(grid), b2 = bias(grid.refined());
    ReportEntry e = ReportEntry::convergence("bsde.grid_halving_bias_ratio", b1 / b2, 2.0, 0.5);
    e.details["bias_coarse"] = b1;
    e.details["bias_fine"] = b2;
    e.details["closed_form"] = exact;
    return e;
}

}  // namespace invlab

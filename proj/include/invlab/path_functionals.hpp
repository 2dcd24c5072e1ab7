#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "invlab/hazard_model.hpp"
#include "invlab/path_engine.hpp"

namespace invlab {

/// Closed-form model quantities evaluated along every simulated path:
/// gamma, mu, Gamma and the invariance density Q = S e^{Gamma} at each grid point,
/// plus their values at tau and theta when those fall in [0, T].
/// Gamma integrates the bridge-conditional mean of gamma(s, m_s) over each step
/// with Simpson's rule, switching to Gauss-Legendre nodes on sub-intervals graded
/// towards t = 0 where gamma varies like 1/t. Cox uses the closed form.
class PathFunctionals {
public:
    PathFunctionals(const ScenarioBatch& batch, const HazardModel& model)
        : n_points_(batch.grid().n_points()),
          gamma_(batch.n_paths() * n_points_),
          Gamma_(batch.n_paths() * n_points_),
          Q_(batch.n_paths() * n_points_),
          mu_(batch.n_paths() * n_points_),
          tau_values_(batch.n_paths()),
          theta_values_(batch.n_paths()) {
        INVLAB_REQUIRE(batch.tau_sampled(), PreconditionError, "default times must be sampled first");
        const TimeGrid& grid = batch.grid();
        const bool cox = model.kind() == ModelKind::Cox;
        const auto n_paths = static_cast<std::ptrdiff_t>(batch.n_paths());
        // Simpson is used on steps away from the singular start
        std::vector<unsigned char> simpson(grid.n_steps());
        std::vector<HazardModel::TimeSlice> at_point, at_mid;
        std::vector<double> mid_weight(grid.n_steps()), mid_var(grid.n_steps());
        for (std::size_t i = 0; i < n_points_; ++i) at_point.push_back(model.slice(grid[i]));
        for (std::size_t i = 0; i < grid.n_steps(); ++i) {
            simpson[i] = subintervals(grid[i], grid[i + 1]) == 1;
            const double u = 0.5 * (grid[i] + grid[i + 1]);
            const double left = model.variance_between(grid[i], u);
            mid_weight[i] = left / model.variance_between(grid[i], grid[i + 1]);
            mid_var[i] = left * (1.0 - mid_weight[i]);
            at_mid.push_back(model.slice(u));
        }

#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t sp = 0; sp < n_paths; ++sp) {
            const auto p = static_cast<std::size_t>(sp);
            double* g = gamma_.data() + p * n_points_;
            double* G = Gamma_.data() + p * n_points_;
            double* q = Q_.data() + p * n_points_;
            double* mu = mu_.data() + p * n_points_;
            for (std::size_t i = 0; i < n_points_; ++i) {
                const double t = grid[i];
                const double m = batch.m(p, i);
                const auto [S, gam, drift] = at_point[i].evaluate(m);
                g[i] = gam;
                mu[i] = drift;
                if (i == 0) {
                    G[i] = 0.0;
                } else if (cox) {
                    G[i] = model.cox_cumulative_hazard(t);
                } else if (simpson[i - 1]) {
                    const double m0 = batch.m(p, i - 1);
                    const auto [gm, curv] = at_mid[i - 1].intensity_and_curvature(m0 + mid_weight[i - 1] * (m - m0));
                    const double mid = gm + 0.5 * mid_var[i - 1] * curv;
                    // Simpson; the bridge variance vanishes at the endpoints
                    G[i] = G[i - 1] + grid.dt(i - 1) / 6.0 * (g[i - 1] + 4.0 * mid + gam);
                } else {
                    G[i] = G[i - 1] + integrate_gamma(model, grid[i - 1], batch.m(p, i - 1), t, m);
                }
                // Cox: S = e^{-Gamma} by construction, so the density is exactly one
                q[i] = cox ? 1.0 : S * std::exp(G[i]);
            }
            tau_values_[p] = at_event(batch.tau_state(p), p, batch.m(p, batch.tau_state(p).step), model, grid, cox);
            theta_values_[p] = at_event(batch.theta_state(p), p, batch.m(p, batch.theta_state(p).step), model, grid, cox);
        }
    }

    struct EventValues {
        double gamma = 0.0;
        double Gamma = 0.0;
        double S = 1.0;
        double Q = 1.0;
    };

    double gamma(std::size_t p, std::size_t i) const { return gamma_[p * n_points_ + i]; }
    double Gamma(std::size_t p, std::size_t i) const { return Gamma_[p * n_points_ + i]; }
    double Q(std::size_t p, std::size_t i) const { return Q_[p * n_points_ + i]; }
    /// Pre-default drift mu(t_i, m_{t_i}).
    double mu(std::size_t p, std::size_t i) const { return mu_[p * n_points_ + i]; }
    double Q_T(std::size_t p) const { return Q_[p * n_points_ + n_points_ - 1]; }
    /// S recovered from the multiplicative decomposition S = Q e^{-Gamma}.
    double S(std::size_t p, std::size_t i) const { return Q(p, i) * std::exp(-Gamma(p, i)); }
    const EventValues& at_tau(std::size_t p) const { return tau_values_[p]; }
    const EventValues& at_theta(std::size_t p) const { return theta_values_[p]; }

    /// Q_T for every path, the invariance-measure weights.
    std::vector<double> terminal_density() const {
        std::vector<double> w(tau_values_.size());
        for (std::size_t p = 0; p < w.size(); ++p) w[p] = Q_T(p);
        return w;
    }

    /// Approximates E[int_{t0}^{t1} gamma(s, m_s) ds | m_{t0} = m0, m_{t1} = m1].
    /// Given the endpoints m_s is Gaussian with mean linear in v(s) = int_0^s sigma^2
    /// and variance V(s); gamma is expanded to second order around the mean.
    static double integrate_gamma(const HazardModel& model, double t0, double m0, double t1, double m1) {
        if (!(t1 > t0)) return 0.0;
        static constexpr double kNode[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
        static constexpr double kWeight[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
        const double dv = model.variance_between(t0, t1);
        const auto panel = [&](double a, double b) {
            const double half = 0.5 * (b - a);
            const double mid = 0.5 * (a + b);
            double s = 0.0;
            for (int k = 0; k < 3; ++k) {
                const double u = mid + half * kNode[k];
                const double left = model.variance_between(t0, u);
                const double w = left / dv;
                const double var = left * (1.0 - w);
                const double mbar = m0 + w * (m1 - m0);
                const auto [gam, curv] = model.intensity_and_curvature(u, mbar);
                s += kWeight[k] * (gam + 0.5 * var * curv);
            }
            return s * half;
        };
        double total = 0.0;
        if (t0 == 0.0) {
            // dyadic panels [t1 2^{-j-1}, t1 2^{-j}]; below 2^{-40} t1 gamma underflows
            double b = t1;
            for (int j = 0; j < 40; ++j) {
                total += panel(0.5 * b, b);
                b *= 0.5;
            }
            return total;
        }
        const int n_sub = subintervals(t0, t1);
        const double h = (t1 - t0) / n_sub;
        for (int k = 0; k < n_sub; ++k) total += panel(t0 + k * h, k + 1 == n_sub ? t1 : t0 + (k + 1) * h);
        return total;
    }

    static int subintervals(double t0, double t1) {
        if (t0 == 0.0) return 0;
        return std::clamp(static_cast<int>(std::ceil(4.0 * (t1 - t0) / t0)), 1, 64);
    }

private:
    EventValues at_event(const EventState& e, std::size_t p, double m_left, const HazardModel& model, const TimeGrid& grid,
                         bool cox) const {
        EventValues v;
        if (!e.within_horizon()) return v;
        const std::size_t i = e.step;
        v.gamma = model.intensity_gamma(e.time, e.m);
        v.Gamma = cox ? model.cox_cumulative_hazard(e.time)
                      : Gamma(p, i) + integrate_gamma(model, grid[i], m_left, e.time, e.m);
        v.S = model.azema_S(e.time, e.m);
        v.Q = cox ? 1.0 : v.S * std::exp(v.Gamma);
        return v;
    }

    std::size_t n_points_;
    std::vector<double> gamma_;
    std::vector<double> Gamma_;
    std::vector<double> Q_;
    std::vector<double> mu_;
    std::vector<EventValues> tau_values_;
    std::vector<EventValues> theta_values_;
};

}  // namespace invlab

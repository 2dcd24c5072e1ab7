#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <vector>

#include "invlab/errors.hpp"
#include "invlab/hazard_model.hpp"
#include "invlab/model_config.hpp"
#include "invlab/rng.hpp"
#include "invlab/time_grid.hpp"

namespace invlab {

struct JumpEvent {
    double time = 0.0;
    double mark = 0.0;
    bool operator==(const JumpEvent&) const = default;
};

/// Value of (m, B) at an event time inside a grid step, obtained by bridge sampling.
struct EventState {
    double time = std::numeric_limits<double>::infinity();
    std::size_t step = 0;       // t_step < time <= t_{step+1}
    double m = 0.0;
    double db_partial = 0.0;    // B(time) - B(t_step)
    bool within_horizon() const { return std::isfinite(time); }
    bool operator==(const EventState&) const = default;
};

/// A batch of simulated scenarios on a fixed grid. Per-path arrays are stored
/// path-major: element (p, i) of an (N+1)-point array lives at p*(N+1) + i.
class ScenarioBatch {
public:
    ScenarioBatch(TimeGrid grid, std::size_t n_paths)
        : grid_(std::move(grid)),
          n_paths_(n_paths),
          factor_m_(n_paths * grid_.n_points(), 0.0),
          brownian_increments_(n_paths * grid_.n_steps(), 0.0),
          tail_gaussian_(n_paths, 0.0),
          bridge_normals_(n_paths * kBridgeNormals, 0.0),
          tau_clock_(n_paths, 0.0),
          theta_clock_(n_paths, 0.0),
          jump_offsets_(n_paths + 1, 0),
          xi_(n_paths, 0.0),
          tau_(n_paths, std::numeric_limits<double>::infinity()),
          theta_(n_paths, std::numeric_limits<double>::infinity()),
          tau_state_(n_paths),
          theta_state_(n_paths) {}

    static constexpr std::size_t kBridgeNormals = 4;

    const TimeGrid& grid() const { return grid_; }
    std::size_t n_paths() const { return n_paths_; }
    std::size_t n_steps() const { return grid_.n_steps(); }
    double horizon() const { return grid_.horizon(); }

    double m(std::size_t p, std::size_t i) const { return factor_m_[p * grid_.n_points() + i]; }
    double db(std::size_t p, std::size_t i) const { return brownian_increments_[p * grid_.n_steps() + i]; }
    std::span<const double> factor_path(std::size_t p) const {
        return {factor_m_.data() + p * grid_.n_points(), grid_.n_points()};
    }
    std::span<const double> brownian_path_increments(std::size_t p) const {
        return {brownian_increments_.data() + p * grid_.n_steps(), grid_.n_steps()};
    }

    double tail_gaussian(std::size_t p) const { return tail_gaussian_[p]; }
    double xi(std::size_t p) const { return xi_[p]; }
    double tau(std::size_t p) const { return tau_[p]; }
    double theta(std::size_t p) const { return theta_[p]; }
    bool has_client() const { return has_client_; }
    bool tau_sampled() const { return tau_sampled_; }

    /// Bridge state at tau when tau <= T (time = +inf otherwise).
    const EventState& tau_state(std::size_t p) const { return tau_state_[p]; }
    const EventState& theta_state(std::size_t p) const { return theta_state_[p]; }

    std::span<const JumpEvent> jumps(std::size_t p) const {
        return {jump_events_.data() + jump_offsets_[p], jump_offsets_[p + 1] - jump_offsets_[p]};
    }
    std::size_t total_jumps() const { return jump_events_.size(); }

    /// Index of the first grid point at or after tau (N+1 when tau > T).
    std::size_t first_index_not_before_tau(std::size_t p) const {
        const EventState& e = tau_state_[p];
        return e.within_horizon() ? e.step + 1 : grid_.n_points();
    }

    bool operator==(const ScenarioBatch& other) const = default;

private:
    friend ScenarioBatch simulate_batch(const ModelConfig&, const TimeGrid&, std::size_t, const RngSpec&);
    friend void sample_tau(ScenarioBatch&, const HazardModel&);

    TimeGrid grid_;
    std::size_t n_paths_;
    std::vector<double> factor_m_;
    std::vector<double> brownian_increments_;
    std::vector<double> tail_gaussian_;
    std::vector<double> bridge_normals_;
    std::vector<double> tau_clock_;
    std::vector<double> theta_clock_;
    std::vector<std::size_t> jump_offsets_;
    std::vector<JumpEvent> jump_events_;
    std::vector<double> xi_;
    std::vector<double> tau_;
    std::vector<double> theta_;
    std::vector<EventState> tau_state_;
    std::vector<EventState> theta_state_;
    bool has_client_ = false;
    bool tau_sampled_ = false;
};

/// Simulates B, m (exact Gaussian stepping), the tail Gaussian, the bridge
/// normals, the exponential clocks and the marked Poisson stream. Path p only
/// reads the counter-based streams keyed by (master_seed, p), so the result
/// does not depend on the execution schedule.
inline ScenarioBatch simulate_batch(const ModelConfig& config, const TimeGrid& grid, std::size_t n_paths,
                                    const RngSpec& rng) {
    config.validate();
    INVLAB_REQUIRE(n_paths >= 1, ConfigError, "n_paths must be at least 1");
    INVLAB_REQUIRE(std::abs(grid.horizon() - config.horizon) <= 1e-12 * config.horizon, ConfigError,
                   "grid horizon must match the model horizon");
    ModelConfig resolved = config;
    resolved.sign = SignConvention::FirstPrinciples;
    const HazardModel vol(resolved);
    INVLAB_REQUIRE(std::abs(vol.sigma_normalization() - 1.0) <= 1e-12, ConfigError,
                   "volatility normalization int sigma^2 = 1 violated");

    ScenarioBatch batch(grid, n_paths);
    const std::size_t n_steps = grid.n_steps();
    const std::size_t n_points = grid.n_points();

    // per-step moments of (dB, dm): Var dB = dt, Var dm = int sigma^2, Cov = int sigma
    std::vector<double> m_sd(n_steps), b_on_m(n_steps), b_resid_sd(n_steps);
    for (std::size_t i = 0; i < n_steps; ++i) {
        const double dv = vol.variance_between(grid[i], grid[i + 1]);
        const double c = vol.sigma_integral(grid[i], grid[i + 1]);
        m_sd[i] = std::sqrt(dv);
        b_on_m[i] = c / dv;
        b_resid_sd[i] = std::sqrt(std::max(grid.dt(i) - c * c / dv, 0.0));
    }

    const double horizon = grid.horizon();
    const double lambda = config.jumps.intensity;
    const double mark_mean = config.jumps.mark_mean;
    std::vector<std::vector<JumpEvent>> jumps(n_paths);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t sp = 0; sp < static_cast<std::ptrdiff_t>(n_paths); ++sp) {
        const auto p = static_cast<std::size_t>(sp);
        PathRng diffusion(rng.master_seed, p, RngPurpose::Diffusion);
        double* m = batch.factor_m_.data() + p * n_points;
        double* db = batch.brownian_increments_.data() + p * n_steps;
        m[0] = 0.0;
        for (std::size_t i = 0; i < n_steps; ++i) {
            const double z1 = diffusion.normal();
            const double z2 = diffusion.normal();
            const double dm = m_sd[i] * z1;
            m[i + 1] = m[i] + dm;
            db[i] = b_on_m[i] * dm + b_resid_sd[i] * z2;
        }
        PathRng tail(rng.master_seed, p, RngPurpose::Tail);
        batch.tail_gaussian_[p] = tail.normal();
        PathRng bridge(rng.master_seed, p, RngPurpose::Bridge);
        for (std::size_t k = 0; k < ScenarioBatch::kBridgeNormals; ++k) {
            batch.bridge_normals_[p * ScenarioBatch::kBridgeNormals + k] = bridge.normal();
        }
        PathRng clocks(rng.master_seed, p, RngPurpose::Clocks);
        batch.tau_clock_[p] = clocks.exponential();
        batch.theta_clock_[p] = clocks.exponential();
        if (lambda > 0.0) {
            PathRng jr(rng.master_seed, p, RngPurpose::Jumps);
            double t = jr.exponential() / lambda;
            while (t <= horizon) {
                jumps[p].push_back({t, mark_mean * jr.exponential()});
                t += jr.exponential() / lambda;
            }
        }
    }

    for (std::size_t p = 0; p < n_paths; ++p) {
        batch.jump_offsets_[p] = batch.jump_events_.size();
        batch.jump_events_.insert(batch.jump_events_.end(), jumps[p].begin(), jumps[p].end());
    }
    batch.jump_offsets_[n_paths] = batch.jump_events_.size();
    return batch;
}

namespace detail {

/// Samples (m, B) at time s in (a, b] given their values at a and b. The m
/// bridge runs in the intrinsic clock v(t) = int_0^t sigma^2; the B bridge in
/// calendar time. Each coordinate has the exact conditional marginal law.
struct BridgePoint {
    double time;
    double m;
    double b;
};

inline BridgePoint bridge(const HazardModel& vol, const BridgePoint& a, const BridgePoint& b, double s,
                          double z_m, double z_b) {
    if (s >= b.time) return {s, b.m, b.b};
    const double dv_total = vol.variance_between(a.time, b.time);
    const double dv_left = vol.variance_between(a.time, s);
    const double w_m = dv_left / dv_total;
    const double var_m = dv_left * vol.variance_between(s, b.time) / dv_total;
    const double dt_total = b.time - a.time;
    const double w_b = (s - a.time) / dt_total;
    const double var_b = (s - a.time) * (b.time - s) / dt_total;
    return {s, a.m + w_m * (b.m - a.m) + std::sqrt(std::max(var_m, 0.0)) * z_m,
            a.b + w_b * (b.b - a.b) + std::sqrt(std::max(var_b, 0.0)) * z_b};
}

}  // namespace detail

/// Samples the default time tau and, when enabled, the client default theta.
/// DGC: xi = m_T + nu(T) * tail_gaussian and tau = Psi(xi), exact in law.
/// Cox: tau = inf{t : Gamma_t >= E} with E the unit exponential clock.
/// Event states at tau and theta inside [0, T] come from bridges between the
/// surrounding grid points; when both fall in one step the later one is
/// bridged from the earlier.
inline void sample_tau(ScenarioBatch& batch, const HazardModel& model) {
    const ModelConfig& cfg = model.config();
    const TimeGrid& grid = batch.grid_;
    const double T = grid.horizon();
    const std::size_t n_paths = batch.n_paths_;
    const double nu_T = model.nu(T);
    batch.has_client_ = cfg.client_hazard > 0.0;

    if (cfg.kind == ModelKind::DGC) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t p = 0; p < n_paths; ++p) {
            const double xi = batch.m(p, grid.n_steps()) + nu_T * batch.tail_gaussian_[p];
            batch.xi_[p] = xi;
            lo = std::min(lo, xi);
            hi = std::max(hi, xi);
        }
        // the sampled range must be mapped injectively
        constexpr int kProbe = 1024;
        double prev = cfg.psi(lo);
        for (int k = 1; k <= kProbe; ++k) {
            const double x = lo + (hi - lo) * k / kProbe;
            const double cur = cfg.psi(x);
            if (!(cur > prev) && hi > lo) throw ModelError("Psi is not strictly increasing on the sampled range");
            prev = cur;
        }
    }

    bool positive = true;
#pragma omp parallel for schedule(static) reduction(&& : positive)
    for (std::ptrdiff_t sp = 0; sp < static_cast<std::ptrdiff_t>(n_paths); ++sp) {
        const auto p = static_cast<std::size_t>(sp);
        double tau;
        if (cfg.kind == ModelKind::DGC) {
            tau = cfg.psi(batch.xi_[p]);
        } else {
            tau = cfg.cox_hazard.inverse_cumulative(batch.tau_clock_[p]);
            batch.xi_[p] = std::numeric_limits<double>::quiet_NaN();
        }
        positive = positive && (tau > 0.0);
        batch.tau_[p] = tau;
        batch.theta_[p] = batch.has_client_ ? batch.theta_clock_[p] / cfg.client_hazard
                                            : std::numeric_limits<double>::infinity();

        batch.tau_state_[p] = EventState{};
        batch.theta_state_[p] = EventState{};
        const double* z = batch.bridge_normals_.data() + p * ScenarioBatch::kBridgeNormals;

        struct Pending {
            double time;
            EventState* out;
        };
        Pending events[2] = {{batch.tau_[p], &batch.tau_state_[p]}, {batch.theta_[p], &batch.theta_state_[p]}};
        if (events[1].time < events[0].time) std::swap(events[0], events[1]);
        std::size_t used = 0;
        std::size_t last_step = grid.n_steps() + 1;
        detail::BridgePoint anchor{};
        for (const Pending& ev : events) {
            if (!(ev.time > 0.0 && ev.time <= T)) continue;
            const std::size_t i = grid.step_containing(ev.time);
            const detail::BridgePoint right{grid[i + 1], batch.m(p, i + 1), batch.db(p, i)};
            if (i != last_step) anchor = {grid[i], batch.m(p, i), 0.0};
            const detail::BridgePoint at = detail::bridge(model, anchor, right, ev.time, z[used], z[used + 1]);
            used += 2;
            *ev.out = EventState{ev.time, i, at.m, at.b};
            anchor = at;
            last_step = i;
        }
    }
    if (!positive) throw ModelError("sampled default time is not strictly positive");
    batch.tau_sampled_ = true;
}

/// Debug export: one row per (path, grid point) and one summary row per path.
inline void export_batch_csv(const ScenarioBatch& batch, const std::filesystem::path& paths_csv,
                             const std::filesystem::path& summary_csv, std::size_t max_paths) {
    const std::size_t n = std::min(max_paths, batch.n_paths());
    std::ofstream out(paths_csv);
    out.precision(17);
    out << "path,index,t,m,dB\n";
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t i = 0; i < batch.grid().n_points(); ++i) {
            out << p << ',' << i << ',' << batch.grid()[i] << ',' << batch.m(p, i) << ',';
            if (i < batch.n_steps()) out << batch.db(p, i);
            out << '\n';
        }
    }
    std::ofstream sum(summary_csv);
    sum.precision(17);
    sum << "path,tau,xi,theta,n_jumps\n";
    for (std::size_t p = 0; p < n; ++p) {
        sum << p << ',' << batch.tau(p) << ',' << batch.xi(p) << ',' << batch.theta(p) << ','
            << batch.jumps(p).size() << '\n';
    }
}

}  // namespace invlab

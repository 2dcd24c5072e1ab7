#pragma once

#include <cmath>
#include <limits>
#include <utility>

#include "invlab/errors.hpp"
#include "invlab/model_config.hpp"
#include "invlab/special_functions.hpp"

namespace invlab {

/// Snapshot of the closed-form quantities at one (t, m) on a path.
struct HazardState {
    double S = 1.0;        // Azema supermartingale Q(tau > t | F_t)
    double gamma = 0.0;    // intensity
    double Gamma = 0.0;    // cumulative hazard
    double mu = 0.0;       // pre-default drift of the driving Brownian motion
    double Q_density = 1.0;
    double D_decay = 1.0;  // exp(-Gamma)
};

/// Closed-form package for the Cox baseline (immersion, P = Q) and the
/// univariate dynamic Gaussian copula (DGC) model
///   m_t = int_0^t sigma dB,  tau = Psi(m_inf),  sigma(s) = sqrt(kappa) exp(-kappa s / 2),
/// for which nu^2(t) = exp(-kappa t) is the residual variance of m_inf given F_t.
///
/// With h = sign * (m - Psi^{-1}(t)) / nu(t):
///   S     = Phi(h)
///   gamma = sign * phi(h) (Psi^{-1})'(t) / (nu(t) Phi(h))    (drift of S over S)
///   mu    = sign * sigma(t) phi(h) / (nu(t) Phi(h))           (d<B,S>/dt over S)
class HazardModel {
public:
    explicit HazardModel(ModelConfig config) : cfg_(config) {
        cfg_.validate();
        INVLAB_REQUIRE(cfg_.sign != SignConvention::Auto, ConfigError,
                       "hazard model needs a resolved sign convention");
        sign_ = cfg_.sign == SignConvention::FirstPrinciples ? 1.0 : -1.0;
    }

    const ModelConfig& config() const { return cfg_; }
    ModelKind kind() const { return cfg_.kind; }
    bool immersed() const { return cfg_.kind == ModelKind::Cox; }
    double horizon() const { return cfg_.horizon; }
    double sign() const { return sign_; }

    // --- factor volatility ---------------------------------------------------

    double sigma(double t) const { return std::sqrt(cfg_.kappa) * std::exp(-0.5 * cfg_.kappa * t); }

    /// nu(t) = sqrt(int_t^inf sigma^2).
    double nu(double t) const { return std::exp(-0.5 * cfg_.kappa * t); }

    /// int_s^t sigma^2(u) du.
    double variance_between(double s, double t) const {
        return std::exp(-cfg_.kappa * s) * -std::expm1(-cfg_.kappa * (t - s));
    }

    /// int_s^t sigma(u) du.
    double sigma_integral(double s, double t) const {
        const double k = cfg_.kappa;
        return 2.0 / std::sqrt(k) * std::exp(-0.5 * k * s) * -std::expm1(-0.5 * k * (t - s));
    }

    /// int_0^inf sigma^2; equal to one for every admissible kappa.
    double sigma_normalization() const { return variance_between(0.0, std::numeric_limits<double>::infinity()); }

    // --- closed forms ----------------------------------------------------------

    double azema_S(double t, double m) const {
        check_time(t);
        if (cfg_.kind == ModelKind::Cox) return std::exp(-cfg_.cox_hazard.cumulative(t));
        if (t == 0.0) return 1.0;
        return special::norm_cdf(standardized(t, m));
    }

    double intensity_gamma(double t, double m) const {
        check_time(t);
        if (cfg_.kind == ModelKind::Cox) return cfg_.cox_hazard.rate(t);
        if (t == 0.0) return 0.0;
        const double h = standardized(t, m);
        check_survival(h);
        return sign_ * special::inverse_mills(h) * cfg_.psi.inverse_derivative(t) / nu(t);
    }

    double drift_mu(double t, double m) const {
        check_time(t);
        if (cfg_.kind == ModelKind::Cox) return 0.0;
        if (t == 0.0) return 0.0;
        const double h = standardized(t, m);
        check_survival(h);
        return sign_ * sigma(t) * special::inverse_mills(h) / nu(t);
    }

    /// The model frozen at one time: everything that depends only on t is
    /// evaluated once, leaving one cdf/pdf pair per factor value.
    class TimeSlice {
    public:
        struct Values {
            double S;
            double gamma;
            double mu;
        };

        Values evaluate(double m) const {
            if (!copula_) return {cox_S_, cox_rate_, 0.0};
            if (at_zero_) return {1.0, 0.0, 0.0};
            const double h = sign_ * (m - a_) * inv_nu_;
            if (!(h > -38.4)) throw NumericError("Azema supermartingale vanished");
            const double S = special::norm_cdf(h);
            const double r = special::norm_pdf(h) / S;
            return {S, coef_ * r, sign_ * sigma_ * inv_nu_ * r};
        }

        std::pair<double, double> survival_and_intensity(double m) const {
            if (!copula_) return {cox_S_, cox_rate_};
            if (at_zero_) return {1.0, 0.0};
            const double h = sign_ * (m - a_) * inv_nu_;
            if (!(h > -38.4)) throw NumericError("Azema supermartingale vanished");
            const double S = special::norm_cdf(h);
            return {S, coef_ * special::norm_pdf(h) / S};
        }

        std::pair<double, double> intensity_and_curvature(double m) const {
            if (!copula_) return {cox_rate_, 0.0};
            if (at_zero_) return {0.0, 0.0};
            const double h = sign_ * (m - a_) * inv_nu_;
            if (!(h > -38.4)) throw NumericError("Azema supermartingale vanished");
            const double r = special::inverse_mills(h);
            const double hr = h + r;
            return {coef_ * r, coef_ * r * (hr * hr + r * hr - 1.0) * inv_nu_ * inv_nu_};
        }

    private:
        friend class HazardModel;
        bool copula_ = false;
        bool at_zero_ = false;
        double sign_ = 1.0;
        double a_ = 0.0;
        double inv_nu_ = 1.0;
        double coef_ = 0.0;
        double sigma_ = 0.0;
        double cox_S_ = 1.0;
        double cox_rate_ = 0.0;
    };

    TimeSlice slice(double t) const {
        check_time(t);
        TimeSlice s;
        s.copula_ = cfg_.kind == ModelKind::DGC;
        s.at_zero_ = t == 0.0;
        s.sign_ = sign_;
        if (s.copula_ && !s.at_zero_) {
            s.a_ = cfg_.psi.inverse(t);
            s.inv_nu_ = 1.0 / nu(t);
            s.coef_ = sign_ * cfg_.psi.inverse_derivative(t) * s.inv_nu_;
            s.sigma_ = sigma(t);
        }
        s.cox_S_ = std::exp(-cfg_.cox_hazard.cumulative(t));
        s.cox_rate_ = cfg_.cox_hazard.rate(t);
        return s;
    }

    /// gamma and d^2 gamma / dm^2 from one evaluation of the Mills ratio.
    std::pair<double, double> intensity_and_curvature(double t, double m) const {
        check_time(t);
        if (cfg_.kind == ModelKind::Cox) return {cfg_.cox_hazard.rate(t), 0.0};
        if (t == 0.0) return {0.0, 0.0};
        const double h = standardized(t, m);
        check_survival(h);
        const double r = special::inverse_mills(h);
        const double hr = h + r;
        const double n = nu(t);
        const double c = sign_ * cfg_.psi.inverse_derivative(t) / n;
        return {c * r, c * r * (hr * hr + r * hr - 1.0) / (n * n)};
    }

    /// S and gamma sharing the standardized argument.
    std::pair<double, double> survival_and_intensity(double t, double m) const {
        check_time(t);
        if (cfg_.kind == ModelKind::Cox) {
            return {std::exp(-cfg_.cox_hazard.cumulative(t)), cfg_.cox_hazard.rate(t)};
        }
        if (t == 0.0) return {1.0, 0.0};
        const double h = standardized(t, m);
        check_survival(h);
        const double S = special::norm_cdf(h);
        return {S, sign_ * special::norm_pdf(h) / S * cfg_.psi.inverse_derivative(t) / nu(t)};
    }

    /// d^2 gamma / dm^2. With r = phi/Phi, r' = -r (h + r) and
    /// r'' = r ((h + r)^2 + r (h + r) - 1).
    double intensity_curvature(double t, double m) const {
        check_time(t);
        if (cfg_.kind == ModelKind::Cox || t == 0.0) return 0.0;
        const double h = standardized(t, m);
        check_survival(h);
        const double r = special::inverse_mills(h);
        const double hr = h + r;
        const double n = nu(t);
        return sign_ * cfg_.psi.inverse_derivative(t) * r * (hr * hr + r * hr - 1.0) / (n * n * n);
    }

    /// Instantaneous volatility of S divided by sigma(t): phi(h)/nu. This is
    /// the bracket density d<m,S>/dt / sigma^2 and peaks at m = Psi^{-1}(t).
    double survival_volatility(double t, double m) const {
        check_time(t);
        if (cfg_.kind == ModelKind::Cox || t == 0.0) return 0.0;
        return special::norm_pdf(standardized(t, m)) / nu(t);
    }

    /// Deterministic cumulative hazard of the Cox baseline.
    double cox_cumulative_hazard(double t) const { return cfg_.cox_hazard.cumulative(t); }

    HazardState state(double t, double m, double Gamma) const {
        HazardState s;
        s.S = azema_S(t, m);
        s.gamma = intensity_gamma(t, m);
        s.Gamma = Gamma;
        s.mu = drift_mu(t, m);
        s.D_decay = std::exp(-Gamma);
        s.Q_density = s.S * std::exp(Gamma);
        return s;
    }

    /// Standardized argument h of the Gaussian cdf in S.
    double standardized(double t, double m) const {
        return sign_ * (m - cfg_.psi.inverse(t)) / nu(t);
    }

private:
    void check_time(double t) const {
        if (!(t >= 0.0) || t > cfg_.horizon * (1.0 + 1e-12)) {
            throw DomainError("time " + std::to_string(t) + " outside [0, T]");
        }
    }

    static void check_survival(double h) {
        // Phi(h) == 0 in double precision: the survival probability vanished.
        if (!(h > -38.4)) throw NumericError("Azema supermartingale vanished (h = " + std::to_string(h) + ")");
    }

    ModelConfig cfg_;
    double sign_ = 1.0;
};

}  // namespace invlab

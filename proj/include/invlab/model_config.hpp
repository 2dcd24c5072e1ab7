#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "invlab/errors.hpp"

namespace invlab {

enum class ModelKind { Cox, DGC };

/// Sign inside the Gaussian cdf of the Azema supermartingale of the Gaussian
/// copula model: FirstPrinciples uses Phi((m - Psi^{-1}(t))/nu), Mirrored the
/// mirrored argument. Auto defers the choice to the binned survival oracle.
enum class SignConvention { FirstPrinciples, Mirrored, Auto };

inline std::string to_string(ModelKind k) { return k == ModelKind::Cox ? "cox" : "dgc"; }

inline std::string to_string(SignConvention s) {
    switch (s) {
        case SignConvention::FirstPrinciples: return "first_principles";
        case SignConvention::Mirrored: return "mirrored";
        case SignConvention::Auto: return "auto";
    }
    return "auto";
}

/// Increasing map R -> (0, inf) turning the terminal Gaussian into a default time.
struct PsiFamily {
    enum class Kind { Exp, Softplus };
    Kind kind = Kind::Exp;
    /// Exp: Psi(x) = exp((x - shift)/scale). Softplus: Psi(x) = scale * log(1 + exp(x - shift)).
    double scale = 1.0;
    double shift = 0.0;

    double operator()(double x) const {
        if (kind == Kind::Exp) return std::exp((x - shift) / scale);
        const double z = x - shift;
        // log1p(exp(z)) without overflow
        return scale * (z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)));
    }

    double inverse(double t) const {
        if (t <= 0.0) return -std::numeric_limits<double>::infinity();
        if (kind == Kind::Exp) return shift + scale * std::log(t);
        const double y = t / scale;
        // log(expm1(y)), stable for large y
        return shift + (y > 30.0 ? y + std::log1p(-std::exp(-y)) : std::log(std::expm1(y)));
    }

    /// d/dt Psi^{-1}(t).
    double inverse_derivative(double t) const {
        if (kind == Kind::Exp) return scale / t;
        const double y = t / scale;
        return 1.0 / (scale * (y > 30.0 ? 1.0 - std::exp(-y) : -std::expm1(-y)));
    }

    void validate() const {
        INVLAB_REQUIRE(scale > 0.0 && std::isfinite(scale), ConfigError, "psi scale must be positive");
        INVLAB_REQUIRE(std::isfinite(shift), ConfigError, "psi shift must be finite");
    }
};

/// Deterministic Cox hazard c(t) = c0 + c1 t.
struct CoxHazard {
    double c0 = 0.0;
    double c1 = 0.0;

    double rate(double t) const { return c0 + c1 * t; }
    double cumulative(double t) const { return c0 * t + 0.5 * c1 * t * t; }

    /// Smallest t with cumulative(t) >= level, +inf if never reached.
    double inverse_cumulative(double level) const {
        if (c1 == 0.0) {
            return c0 > 0.0 ? level / c0 : std::numeric_limits<double>::infinity();
        }
        if (c1 > 0.0) {
            return 2.0 * level / (c0 + std::sqrt(c0 * c0 + 2.0 * c1 * level));
        }
        // decreasing hazard: the cumulative is capped at its peak c0^2 / (2|c1|)
        const double disc = c0 * c0 + 2.0 * c1 * level;
        if (disc < 0.0) return std::numeric_limits<double>::infinity();
        return 2.0 * level / (c0 + std::sqrt(disc));
    }
};

/// Independent marked Poisson stream with unit-free exponential marks on (0, inf).
struct JumpSpec {
    double intensity = 0.0;
    double mark_mean = 1.0;
};

struct ModelConfig {
    ModelKind kind = ModelKind::DGC;
    double horizon = 1.0;
    double kappa = 1.0;
    PsiFamily psi{};
    CoxHazard cox_hazard{};
    JumpSpec jumps{};
    /// Hazard of the independent client default clock; 0 disables it.
    double client_hazard = 0.0;
    SignConvention sign = SignConvention::FirstPrinciples;

    void validate() const {
        INVLAB_REQUIRE(horizon > 0.0 && std::isfinite(horizon), ConfigError,
                       "model horizon must be positive");
        INVLAB_REQUIRE(kappa > 0.0 && std::isfinite(kappa), ConfigError,
                       "kappa must be positive: the volatility must integrate to one");
        psi.validate();
        INVLAB_REQUIRE(cox_hazard.c0 >= 0.0 && cox_hazard.rate(horizon) >= 0.0, ConfigError,
                       "cox hazard must be nonnegative on [0, T]");
        INVLAB_REQUIRE(jumps.intensity >= 0.0 && std::isfinite(jumps.intensity), ConfigError,
                       "jump intensity must be nonnegative");
        INVLAB_REQUIRE(jumps.mark_mean > 0.0, ConfigError, "jump mark mean must be positive");
        INVLAB_REQUIRE(client_hazard >= 0.0 && std::isfinite(client_hazard), ConfigError,
                       "client hazard must be nonnegative");
    }
};

}  // namespace invlab

#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "invlab/errors.hpp"
#include "invlab/special_functions.hpp"

namespace invlab {

/// Named bounded functions of (t, m), used as payoffs G, predictable
/// integrands K, exposures and test functions h.
struct StateFunction {
    enum class Kind { Zero, Constant, PositiveIndicator, SmoothStep, CappedPositive, Sign };
    Kind kind = Kind::Zero;
    double level = 1.0;  // constant value / cap / amplitude
    double width = 1.0;  // smooth step width

    double operator()(double /*t*/, double m) const {
        switch (kind) {
            case Kind::Zero: return 0.0;
            case Kind::Constant: return level;
            case Kind::PositiveIndicator: return m > 0.0 ? level : 0.0;
            case Kind::SmoothStep: return level * special::norm_cdf(m / width);
            case Kind::CappedPositive: return std::clamp(m, 0.0, level);
            case Kind::Sign: return m > 0.0 ? 1.0 : (m < 0.0 ? -1.0 : 0.0);
        }
        return 0.0;
    }

    double sup_abs() const {
        switch (kind) {
            case Kind::Zero: return 0.0;
            case Kind::Sign: return 1.0;
            default: return std::abs(level);
        }
    }

    /// Average of G(t, .) over [l, r]; exact for the piecewise families, the
    /// midpoint value for the smooth step.
    double cell_average(double t, double l, double r) const {
        if (!(r > l)) return (*this)(t, l);
        const double len = r - l;
        const auto above = [&](double k) { return std::clamp((r - k) / len, 0.0, 1.0); };
        const auto ramp = [&](double x) {
            // antiderivative of clamp(x, 0, level)
            if (x <= 0.0) return 0.0;
            if (x <= level) return 0.5 * x * x;
            return 0.5 * level * level + level * (x - level);
        };
        switch (kind) {
            case Kind::Zero: return 0.0;
            case Kind::Constant: return level;
            case Kind::PositiveIndicator: return level * above(0.0);
            case Kind::SmoothStep: return (*this)(t, 0.5 * (l + r));
            case Kind::CappedPositive: return (ramp(r) - ramp(l)) / len;
            case Kind::Sign: return 2.0 * above(0.0) - 1.0;
        }
        return 0.0;
    }

    /// E[G(t, X)] for X ~ N(mean, var).
    double gaussian_mean(double t, double mean, double var) const {
        if (!(var > 0.0)) return (*this)(t, mean);
        const double sd = std::sqrt(var);
        const auto call = [&](double k) {
            const double d = (mean - k) / sd;
            return (mean - k) * special::norm_cdf(d) + sd * special::norm_pdf(d);
        };
        switch (kind) {
            case Kind::Zero: return 0.0;
            case Kind::Constant: return level;
            case Kind::PositiveIndicator: return level * special::norm_cdf(mean / sd);
            case Kind::SmoothStep: return level * special::norm_cdf(mean / std::sqrt(width * width + var));
            case Kind::CappedPositive: return call(0.0) - call(level);
            case Kind::Sign: return 2.0 * special::norm_cdf(mean / sd) - 1.0;
        }
        return 0.0;
    }

    bool nonnegative() const { return kind != Kind::Sign && level >= 0.0; }

    static StateFunction zero() { return {}; }
    static StateFunction constant(double c) { return {Kind::Constant, c, 1.0}; }
    static StateFunction positive_indicator(double amplitude = 1.0) {
        return {Kind::PositiveIndicator, amplitude, 1.0};
    }
    static StateFunction smooth_step(double width, double amplitude = 1.0) {
        return {Kind::SmoothStep, amplitude, width};
    }
    static StateFunction capped_positive(double cap) { return {Kind::CappedPositive, cap, 1.0}; }
    static StateFunction sign() { return {Kind::Sign, 1.0, 1.0}; }

    std::string name() const {
        switch (kind) {
            case Kind::Zero: return "zero";
            case Kind::Constant: return "constant";
            case Kind::PositiveIndicator: return "positive_indicator";
            case Kind::SmoothStep: return "smooth_step";
            case Kind::CappedPositive: return "capped_positive";
            case Kind::Sign: return "sign";
        }
        return "zero";
    }

    static StateFunction from_name(const std::string& name, double level = 1.0, double width = 1.0) {
        if (name == "zero") return zero();
        if (name == "constant") return constant(level);
        if (name == "positive_indicator") return positive_indicator(level);
        if (name == "smooth_step") return smooth_step(width, level);
        if (name == "capped_positive") return capped_positive(level);
        if (name == "sign") return sign();
        throw ConfigError("unknown state function family '" + name + "'");
    }
};

/// Mark functions Psi(t, e) = w(t) h(e) for the jump stream, with closed-form
/// integrals against exponential marks.
struct MarkFunction {
    enum class Mark { Zero, Constant, Linear, Indicator };
    enum class TimeWeight { One, Linear };
    Mark mark = Mark::Zero;
    TimeWeight time_weight = TimeWeight::One;
    double coefficient = 1.0;
    double threshold = 1.0;

    double operator()(double t, double e) const { return weight(t) * mark_part(e); }

    /// Integral of h(e) against the exponential mark law with the given mean.
    double mark_mean_value(double mark_mean) const {
        switch (mark) {
            case Mark::Zero: return 0.0;
            case Mark::Constant: return coefficient;
            case Mark::Linear: return coefficient * mark_mean;
            case Mark::Indicator: return coefficient * std::exp(-threshold / mark_mean);
        }
        return 0.0;
    }

    /// Integral of h(e)^2 against the exponential mark law.
    double mark_second_moment(double mark_mean) const {
        const double c2 = coefficient * coefficient;
        switch (mark) {
            case Mark::Zero: return 0.0;
            case Mark::Constant: return c2;
            case Mark::Linear: return 2.0 * c2 * mark_mean * mark_mean;
            case Mark::Indicator: return c2 * std::exp(-threshold / mark_mean);
        }
        return 0.0;
    }

    /// Integral of w^2 over [0, t].
    double weight_square_integral(double t) const {
        return time_weight == TimeWeight::One ? t : t * t * t / 3.0;
    }

    /// Integral of w over [0, t].
    double weight_integral(double t) const {
        return time_weight == TimeWeight::One ? t : 0.5 * t * t;
    }

    double weight(double t) const { return time_weight == TimeWeight::One ? 1.0 : t; }

    double mark_part(double e) const {
        switch (mark) {
            case Mark::Zero: return 0.0;
            case Mark::Constant: return coefficient;
            case Mark::Linear: return coefficient * e;
            case Mark::Indicator: return e > threshold ? coefficient : 0.0;
        }
        return 0.0;
    }
};

}  // namespace invlab

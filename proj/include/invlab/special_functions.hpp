#pragma once

#include <cmath>
#include <numbers>

namespace invlab::special {

inline double norm_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Standard normal cdf through erfc, accurate in both tails.
inline double norm_cdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// phi(x) / Phi(x). For very negative x the direct quotient underflows, so an
/// asymptotic series of the Mills ratio is used instead.
inline double inverse_mills(double x) {
    if (x > -30.0) {
        return norm_pdf(x) / norm_cdf(x);
    }
    const double y = 1.0 / (x * x);
    // Phi(x) ~ phi(x)/|x| * (1 - y + 3y^2 - 15y^3 + 105y^4)
    const double series = 1.0 - y + 3.0 * y * y - 15.0 * y * y * y + 105.0 * y * y * y * y;
    return -x / series;
}

}  // namespace invlab::special

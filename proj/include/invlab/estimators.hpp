#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "invlab/errors.hpp"

namespace invlab {

/// Neumaier-compensated running sum; the result depends only on the order of
/// the added terms, which callers keep fixed (ascending path index).
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double pairwise_sum(std::span<const double> x) {
    if (x.size() <= 16) {
        double s = 0.0;
        for (double v : x) s += v;
        return s;
    }
    const std::size_t half = x.size() / 2;
    return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

enum class WeightKind { None, Invariance, Survival };

inline std::string to_string(WeightKind k) {
    switch (k) {
        case WeightKind::None: return "none";
        case WeightKind::Invariance: return "invariance";
        case WeightKind::Survival: return "survival";
    }
    return "none";
}

struct WeightedEstimator {
    std::size_t n = 0;
    double mean = 0.0;
    double std_error = 0.0;
    WeightKind weight_kind = WeightKind::None;

    nlohmann::json to_json(const std::string& name) const {
        return {{"name", name}, {"mean", mean}, {"std_error", std_error}, {"n", n},
                {"weight_kind", to_string(weight_kind)}};
    }
};

namespace detail {

/// Self-normalized mean sum(w x)/sum(w) with the delta-method standard error
/// sqrt(sum (w (x - r))^2 * n/(n-1)) / sum(w).
inline WeightedEstimator ratio_estimate(std::span<const double> x, std::span<const double> w, WeightKind kind) {
    const std::size_t n = x.size();
    std::vector<double> wx(n);
    for (std::size_t i = 0; i < n; ++i) wx[i] = w[i] * x[i];
    const double sw = pairwise_sum(w);
    INVLAB_REQUIRE(sw > 0.0, NumericError, "weights sum to zero");
    const double r = pairwise_sum(wx) / sw;
    std::vector<double> dev(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = w[i] * (x[i] - r);
        dev[i] = d * d;
    }
    const double corr = n > 1 ? static_cast<double>(n) / static_cast<double>(n - 1) : 0.0;
    return {n, r, std::sqrt(pairwise_sum(dev) * corr) / sw, kind};
}

inline void require_finite(std::span<const double> x, const char* what) {
    for (double v : x) {
        if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what);
    }
}

}  // namespace detail

/// Plain Monte Carlo mean under Q.
inline WeightedEstimator expect_Q(std::span<const double> samples) {
    INVLAB_REQUIRE(!samples.empty(), PreconditionError, "empty sample");
    detail::require_finite(samples, "sample");
    const std::vector<double> ones(samples.size(), 1.0);
    return detail::ratio_estimate(samples, ones, WeightKind::None);
}

/// Expectation under the invariance measure P, Bayes-weighted by the density Q_T.
inline WeightedEstimator expect_P(std::span<const double> samples, std::span<const double> density_at_T) {
    INVLAB_REQUIRE(!samples.empty(), PreconditionError, "empty sample");
    INVLAB_REQUIRE(samples.size() == density_at_T.size(), PreconditionError, "sample/weight size mismatch");
    detail::require_finite(samples, "sample");
    for (double w : density_at_T) {
        if (!(w > 0.0) || !std::isfinite(w)) throw ModelError("invariance density must be positive");
    }
    return detail::ratio_estimate(samples, density_at_T, WeightKind::Invariance);
}

/// Expectation under the survival measure, weights e^{Gamma_{t^T}} 1_{tau > t^T}.
inline WeightedEstimator expect_survival(std::span<const double> samples, std::span<const double> Gamma_at,
                                         std::span<const unsigned char> alive) {
    INVLAB_REQUIRE(!samples.empty(), PreconditionError, "empty sample");
    INVLAB_REQUIRE(samples.size() == Gamma_at.size() && samples.size() == alive.size(), PreconditionError,
                   "sample/weight size mismatch");
    detail::require_finite(samples, "sample");
    std::vector<double> w(samples.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        INVLAB_REQUIRE(Gamma_at[i] >= 0.0 && std::isfinite(Gamma_at[i]), ModelError,
                       "cumulative hazard must be nonnegative");
        w[i] = alive[i] ? std::exp(Gamma_at[i]) : 0.0;
    }
    return detail::ratio_estimate(samples, w, WeightKind::Survival);
}

/// Two estimators of the same quantity computed on the same paths.
struct PairedComparison {
    double lhs = 0.0;
    double rhs = 0.0;
    double se_lhs = 0.0;
    double se_rhs = 0.0;
    double se_diff = 0.0;  // standard error of lhs - rhs, accounting for the pairing
    double z = 0.0;
    std::size_t n = 0;

    double diff() const { return lhs - rhs; }
};

/// Compares two self-normalized estimators evaluated on identical paths. An
/// empty weight span means unit weights. The error of the difference comes
/// from the per-path influence terms w_i (x_i - r) / mean(w) of both sides.
/// lhs_second_moment, when finite, is a model estimate of E[x^2] on the lhs
/// measure. It bounds the lhs variance from below by m2 - rhs^2, which keeps
/// the error honest when the lhs is a rare event that was barely observed.
inline PairedComparison compare_paired(std::span<const double> lhs_x, std::span<const double> lhs_w,
                                       std::span<const double> rhs_x, std::span<const double> rhs_w,
                                       double lhs_second_moment = std::numeric_limits<double>::quiet_NaN()) {
    const std::size_t n = lhs_x.size();
    INVLAB_REQUIRE(n >= 2 && rhs_x.size() == n, PreconditionError, "paired samples must share their paths");
    INVLAB_REQUIRE(lhs_w.empty() || lhs_w.size() == n, PreconditionError, "lhs weight size mismatch");
    INVLAB_REQUIRE(rhs_w.empty() || rhs_w.size() == n, PreconditionError, "rhs weight size mismatch");
    detail::require_finite(lhs_x, "lhs sample");
    detail::require_finite(rhs_x, "rhs sample");
    const std::vector<double> ones(n, 1.0);
    const std::span<const double> wl = lhs_w.empty() ? std::span<const double>(ones) : lhs_w;
    const std::span<const double> wr = rhs_w.empty() ? std::span<const double>(ones) : rhs_w;
    const WeightedEstimator l = detail::ratio_estimate(lhs_x, wl, WeightKind::None);
    const WeightedEstimator r = detail::ratio_estimate(rhs_x, wr, WeightKind::None);
    const double mean_wl = pairwise_sum(wl) / static_cast<double>(n);
    const double mean_wr = pairwise_sum(wr) / static_cast<double>(n);
    std::vector<double> psi(n);
    for (std::size_t i = 0; i < n; ++i) {
        psi[i] = wl[i] * (lhs_x[i] - l.mean) / mean_wl - wr[i] * (rhs_x[i] - r.mean) / mean_wr;
    }
    const double psi_mean = pairwise_sum(psi) / static_cast<double>(n);
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) sq[i] = (psi[i] - psi_mean) * (psi[i] - psi_mean);
    double var = pairwise_sum(sq) / static_cast<double>(n - 1);
    if (std::isfinite(lhs_second_moment)) {
        std::vector<double> wl2(n), rr(n);
        for (std::size_t i = 0; i < n; ++i) {
            wl2[i] = wl[i] * wl[i];
            const double d = wr[i] * (rhs_x[i] - r.mean) / mean_wr;
            rr[i] = d * d;
        }
        const double floor_l = std::max(lhs_second_moment - r.mean * r.mean, 0.0) *
                               (pairwise_sum(wl2) / static_cast<double>(n)) / (mean_wl * mean_wl);
        var = std::max(var, floor_l + pairwise_sum(rr) / static_cast<double>(n - 1));
    }
    PairedComparison c;
    c.lhs = l.mean;
    c.rhs = r.mean;
    c.se_lhs = l.std_error;
    c.se_rhs = r.std_error;
    c.se_diff = std::sqrt(var / static_cast<double>(n));
    c.n = n;
    const double d = c.lhs - c.rhs;
    if (c.se_diff > 0.0) {
        c.z = d / c.se_diff;
    } else {
        c.z = d == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), d);
    }
    return c;
}

struct DriftTestResult {
    std::vector<double> z;  // per step
    double max_abs_z = 0.0;
    double threshold = 4.0;
    std::size_t inconclusive_steps = 0;
    bool pass = false;

    /// Probability of at least one false alarm over all steps at this threshold
    /// under independence (Bonferroni upper bound).
    double family_false_alarm_bound() const {
        const double per_test = std::erfc(threshold / std::sqrt(2.0));
        return std::min(1.0, per_test * static_cast<double>(z.size()));
    }
};

/// Per-step zero-mean test of process increments. increment(p, i) returns the
/// increment of path p over step i; weights (empty for unit weights) give a
/// self-normalized weighted mean per step. A step whose increments are all
/// identical has zero standard error: z = 0 when that common value is zero,
/// infinite otherwise. A step with fewer than two samples of positive weight is
/// inconclusive and makes the whole test fail.
///
/// variance_floor (empty or one value per step) is a lower bound on the
/// variance of a single increment. Counting-process increments need it: when
/// no event is observed in a step the sample variance misses the jump part.
template <class IncrementFn>
DriftTestResult martingale_drift_test(std::size_t n_paths, std::size_t n_steps, IncrementFn&& increment,
                                      std::span<const double> weights, double threshold = 4.0,
                                      std::span<const double> variance_floor = {}) {
    INVLAB_REQUIRE(variance_floor.empty() || variance_floor.size() == n_steps, PreconditionError,
                   "variance floor size mismatch");
    INVLAB_REQUIRE(weights.empty() || weights.size() == n_paths, PreconditionError, "weight size mismatch");
    struct Acc {
        CompensatedSum w, wx, w2, w2x, w2x2, w3, w3x, w3x2, w3x3;
        std::size_t positive = 0;
    };
    std::vector<Acc> acc(n_steps);
    for (std::size_t p = 0; p < n_paths; ++p) {
        const double w = weights.empty() ? 1.0 : weights[p];
        if (w < 0.0 || !std::isfinite(w)) throw ModelError("drift test weights must be nonnegative");
        for (std::size_t i = 0; i < n_steps; ++i) {
            const double x = increment(p, i);
            Acc& a = acc[i];
            a.w.add(w);
            a.wx.add(w * x);
            a.w2.add(w * w);
            a.w2x.add(w * w * x);
            a.w2x2.add(w * w * x * x);
            const double w3 = w * w * w;
            a.w3.add(w3);
            a.w3x.add(w3 * x);
            a.w3x2.add(w3 * x * x);
            a.w3x3.add(w3 * x * x * x);
            if (w > 0.0) ++a.positive;
        }
    }
    DriftTestResult res;
    res.threshold = threshold;
    res.z.resize(n_steps);
    const double corr = n_paths > 1 ? static_cast<double>(n_paths) / static_cast<double>(n_paths - 1) : 0.0;
    for (std::size_t i = 0; i < n_steps; ++i) {
        const Acc& a = acc[i];
        if (a.positive < 2) {
            ++res.inconclusive_steps;
            res.z[i] = 0.0;
            continue;
        }
        const double sw = a.w.value();
        const double r = a.wx.value() / sw;
        const double ss_raw = std::max(a.w2x2.value() - 2.0 * r * a.w2x.value() + r * r * a.w2.value(), 0.0);
        double ss = ss_raw;
        if (!variance_floor.empty()) ss = std::max(ss, variance_floor[i] * a.w2.value());
        const double se = std::sqrt(ss * corr) / sw;
        // relative floor: rounding leaves ss ~ eps * scale for constant increments
        const double scale = std::sqrt(a.w2x2.value()) / sw;
        if (se <= 1e-13 * scale || se == 0.0) {
            res.z[i] = std::abs(r) <= 1e-13 * std::max(scale, 1e-300) || r == 0.0
                           ? 0.0
                           : std::copysign(std::numeric_limits<double>::infinity(), r);
        } else {
            const double t = r / se;
            // Hall's transform removes the skewness term of the studentized mean;
            // jump increments on fine steps are far from symmetric.
            double g = 0.0;
            if (ss == ss_raw && ss_raw > 0.0) {
                const double s3 = a.w3x3.value() - 3.0 * r * a.w3x2.value() + 3.0 * r * r * a.w3x.value() -
                                  r * r * r * a.w3.value();
                g = s3 / std::pow(ss_raw, 1.5);
            }
            res.z[i] = t + g * t * t / 3.0 + g * g * t * t * t / 27.0 + g / 6.0;
        }
        res.max_abs_z = std::max(res.max_abs_z, std::abs(res.z[i]));
    }
    res.pass = res.inconclusive_steps == 0 && res.max_abs_z <= threshold;
    return res;
}

/// Equal-mass bins over the selected values; returns a bin index per entry,
/// -1 for unselected entries. Ties are ordered by position, so the assignment
/// is deterministic.
inline std::vector<int> equal_mass_bins(std::span<const double> values, std::span<const unsigned char> selected,
                                        int n_bins) {
    INVLAB_REQUIRE(n_bins >= 1, PreconditionError, "need at least one bin");
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (selected.empty() || selected[i]) idx.push_back(i);
    }
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<int> bins(values.size(), -1);
    const std::size_t count = idx.size();
    for (std::size_t r = 0; r < count; ++r) {
        bins[idx[r]] = static_cast<int>((r * static_cast<std::size_t>(n_bins)) / count);
    }
    return bins;
}

/// Inner edges (n_bins - 1 of them) of equal-mass bins over the selected values.
inline std::vector<double> equal_mass_edges(std::span<const double> values, std::span<const unsigned char> selected,
                                            int n_bins) {
    INVLAB_REQUIRE(n_bins >= 1, PreconditionError, "need at least one bin");
    std::vector<double> v;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (selected.empty() || selected[i]) v.push_back(values[i]);
    }
    INVLAB_REQUIRE(v.size() >= static_cast<std::size_t>(n_bins), PreconditionError, "fewer samples than bins");
    std::sort(v.begin(), v.end());
    std::vector<double> edges;
    for (int b = 1; b < n_bins; ++b) edges.push_back(v[(v.size() * static_cast<std::size_t>(b)) / n_bins]);
    return edges;
}

/// Bin index of every value for the given inner edges; bin b holds
/// edges[b-1] <= x < edges[b].
inline std::vector<int> assign_bins(std::span<const double> values, std::span<const double> edges) {
    std::vector<int> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = static_cast<int>(std::upper_bound(edges.begin(), edges.end(), values[i]) - edges.begin());
    }
    return out;
}

}  // namespace invlab

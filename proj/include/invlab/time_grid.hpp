#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "invlab/errors.hpp"

namespace invlab {

/// Ordered instants 0 = t_0 < t_1 < ... < t_N = T.
class TimeGrid {
public:
    explicit TimeGrid(std::vector<double> times) : times_(std::move(times)) { validate(); }

    static TimeGrid uniform(double horizon, std::size_t n_steps) {
        INVLAB_REQUIRE(n_steps >= 1, ConfigError, "time grid needs at least one step");
        INVLAB_REQUIRE(horizon > 0.0 && std::isfinite(horizon), ConfigError,
                       "time grid horizon must be positive and finite");
        std::vector<double> t(n_steps + 1);
        for (std::size_t i = 0; i <= n_steps; ++i) {
            t[i] = horizon * static_cast<double>(i) / static_cast<double>(n_steps);
        }
        t.back() = horizon;
        return TimeGrid(std::move(t));
    }

    /// Every step split in two; grid points of the original grid are kept.
    TimeGrid refined() const {
        std::vector<double> t;
        t.reserve(2 * n_steps() + 1);
        for (std::size_t i = 0; i < n_steps(); ++i) {
            t.push_back(times_[i]);
            t.push_back(0.5 * (times_[i] + times_[i + 1]));
        }
        t.push_back(times_.back());
        return TimeGrid(std::move(t));
    }

    double horizon() const { return times_.back(); }
    std::size_t n_steps() const { return times_.size() - 1; }
    std::size_t n_points() const { return times_.size(); }
    double operator[](std::size_t i) const { return times_[i]; }
    double dt(std::size_t i) const { return times_[i + 1] - times_[i]; }
    std::span<const double> times() const { return times_; }
    bool operator==(const TimeGrid&) const = default;

    /// Index i with t_i < s <= t_{i+1}; a value on a grid point is attributed to
    /// the step that ends there. Requires 0 < s <= T.
    std::size_t step_containing(double s) const {
        INVLAB_REQUIRE(s > 0.0 && s <= horizon(), DomainError, "time outside (0, T]");
        std::size_t lo = 0;
        std::size_t hi = n_steps();
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            if (times_[mid] < s) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return lo;
    }

    /// Nearest grid index to s (ties towards the earlier point).
    std::size_t nearest_index(double s) const {
        if (s <= 0.0) return 0;
        if (s >= horizon()) return n_steps();
        const std::size_t i = step_containing(s);
        return (s - times_[i] <= times_[i + 1] - s) ? i : i + 1;
    }

private:
    void validate() const {
        INVLAB_REQUIRE(times_.size() >= 2, ConfigError, "time grid needs at least two instants");
        INVLAB_REQUIRE(times_.front() == 0.0, ConfigError, "time grid must start at 0");
        for (std::size_t i = 0; i + 1 < times_.size(); ++i) {
            INVLAB_REQUIRE(std::isfinite(times_[i + 1]) && times_[i + 1] > times_[i], ConfigError,
                           "time grid must be strictly increasing (violated at index " +
                               std::to_string(i + 1) + ")");
        }
    }

    std::vector<double> times_;
};

}  // namespace invlab

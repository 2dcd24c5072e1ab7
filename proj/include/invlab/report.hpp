#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "invlab/estimators.hpp"

namespace invlab {

enum class EntryMode { MonteCarlo, Pathwise, Convergence };

inline std::string to_string(EntryMode m) {
    switch (m) {
        case EntryMode::MonteCarlo: return "MC";
        case EntryMode::Pathwise: return "pathwise";
        case EntryMode::Convergence: return "convergence";
    }
    return "MC";
}

/// One verified statement. MC entries carry both sides, the combined standard
/// error and z; pathwise entries carry the largest discrepancy and its tolerance.
/// Convergence entries carry an observed ratio (lhs) against its target (rhs).
struct ReportEntry {
    std::string theorem_id;
    EntryMode mode = EntryMode::MonteCarlo;
    double lhs = 0.0;
    double rhs = 0.0;
    double se = 0.0;
    double z = std::numeric_limits<double>::quiet_NaN();
    double max_abs_discrepancy = std::numeric_limits<double>::quiet_NaN();
    double tolerance = 4.0;
    bool pass = false;
    nlohmann::json details = nlohmann::json::object();

    static ReportEntry from_comparison(std::string id, const PairedComparison& c, double threshold) {
        ReportEntry e;
        e.theorem_id = std::move(id);
        e.mode = EntryMode::MonteCarlo;
        e.lhs = c.lhs;
        e.rhs = c.rhs;
        e.se = c.se_diff;
        e.z = c.z;
        e.tolerance = threshold;
        e.pass = std::abs(c.z) <= threshold;
        e.details["se_lhs"] = c.se_lhs;
        e.details["se_rhs"] = c.se_rhs;
        e.details["n"] = c.n;
        return e;
    }

    static ReportEntry pathwise(std::string id, double max_abs, double scale, double rel_tol) {
        ReportEntry e;
        e.theorem_id = std::move(id);
        e.mode = EntryMode::Pathwise;
        e.max_abs_discrepancy = max_abs;
        e.tolerance = rel_tol * std::max(scale, 1.0);
        e.pass = max_abs <= e.tolerance;
        e.details["scale"] = scale;
        e.details["relative_tolerance"] = rel_tol;
        return e;
    }

    static ReportEntry from_drift_test(std::string id, const DriftTestResult& r) {
        ReportEntry e;
        e.theorem_id = std::move(id);
        e.mode = EntryMode::MonteCarlo;
        e.z = r.max_abs_z;
        e.tolerance = r.threshold;
        e.pass = r.pass;
        e.details["statistic"] = "max_abs_z";
        e.details["steps_tested"] = r.z.size();
        if (!r.z.empty()) {
            std::size_t worst = 0;
            for (std::size_t i = 1; i < r.z.size(); ++i) {
                if (std::abs(r.z[i]) > std::abs(r.z[worst])) worst = i;
            }
            e.details["worst_step"] = worst;
            e.details["worst_step_z"] = finite_or_null(r.z[worst]);
        }
        e.details["inconclusive_steps"] = r.inconclusive_steps;
        e.details["family_false_alarm_bound"] = r.family_false_alarm_bound();
        return e;
    }

    /// Observed grid-refinement ratio against a target, within an absolute band.
    static ReportEntry convergence(std::string id, double ratio, double target, double band) {
        ReportEntry e;
        e.theorem_id = std::move(id);
        e.mode = EntryMode::Convergence;
        e.lhs = ratio;
        e.rhs = target;
        e.max_abs_discrepancy = std::abs(ratio - target);
        e.tolerance = band;
        e.pass = std::isfinite(ratio) && e.max_abs_discrepancy <= band;
        return e;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["theorem_id"] = theorem_id;
        j["mode"] = to_string(mode);
        j["pass"] = pass;
        j["tolerance"] = tolerance;
        if (mode == EntryMode::MonteCarlo) {
            j["lhs"] = lhs;
            j["rhs"] = rhs;
            j["combined_std_error"] = se;
            j["z"] = finite_or_null(z);
        } else if (mode == EntryMode::Convergence) {
            j["lhs"] = finite_or_null(lhs);
            j["rhs"] = rhs;
            j["max_abs_discrepancy"] = finite_or_null(max_abs_discrepancy);
        } else {
            j["max_abs_discrepancy"] = max_abs_discrepancy;
        }
        j["details"] = details;
        return j;
    }

    static nlohmann::json finite_or_null(double x) {
        if (std::isfinite(x)) return x;
        if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
        return nullptr;
    }
};

class VerificationReport {
public:
    void add(ReportEntry e) { entries_.push_back(std::move(e)); }
    void add_all(std::vector<ReportEntry> es) {
        for (auto& e : es) entries_.push_back(std::move(e));
    }
    void note(const std::string& key, nlohmann::json value) { notes_[key] = std::move(value); }
    void set_fingerprint(std::string f) { fingerprint_ = std::move(f); }
    void set_seed(std::uint64_t s) { seed_ = s; }

    const std::vector<ReportEntry>& entries() const { return entries_; }
    const nlohmann::json& notes() const { return notes_; }

    bool all_pass() const {
        return std::all_of(entries_.begin(), entries_.end(), [](const ReportEntry& e) { return e.pass; });
    }

    const ReportEntry* find(const std::string& id) const {
        for (const auto& e : entries_) {
            if (e.theorem_id == id) return &e;
        }
        return nullptr;
    }

    /// Entries whose id starts with the prefix.
    std::vector<const ReportEntry*> with_prefix(const std::string& prefix) const {
        std::vector<const ReportEntry*> out;
        for (const auto& e : entries_) {
            if (e.theorem_id.rfind(prefix, 0) == 0) out.push_back(&e);
        }
        return out;
    }

    /// Entries sorted by theorem id (stable), so report assembly order never
    /// depends on the order suites were run in.
    std::vector<ReportEntry> sorted_entries() const {
        std::vector<ReportEntry> s = entries_;
        std::stable_sort(s.begin(), s.end(),
                         [](const ReportEntry& a, const ReportEntry& b) { return a.theorem_id < b.theorem_id; });
        return s;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["config_fingerprint"] = fingerprint_;
        j["seed"] = seed_;
        j["all_pass"] = all_pass();
        j["entries"] = nlohmann::json::array();
        for (const auto& e : sorted_entries()) j["entries"].push_back(e.to_json());
        j["notes"] = notes_;
        return j;
    }

    void write_csv(std::ostream& out) const {
        out.precision(17);
        out << "theorem_id,mode,lhs,rhs,se,z,pass\n";
        for (const auto& e : sorted_entries()) {
            out << e.theorem_id << ',' << to_string(e.mode) << ',';
            if (e.mode == EntryMode::MonteCarlo) {
                out << e.lhs << ',' << e.rhs << ',' << e.se << ',' << e.z;
            } else if (e.mode == EntryMode::Convergence) {
                out << e.lhs << ',' << e.rhs << ",,";
            } else {
                out << ",," << e.max_abs_discrepancy << ',';
            }
            out << ',' << (e.pass ? "true" : "false") << '\n';
        }
    }

private:
    std::vector<ReportEntry> entries_;
    nlohmann::json notes_ = nlohmann::json::object();
    std::string fingerprint_;
    std::uint64_t seed_ = 0;
};

}  // namespace invlab

#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <omp.h>

#include "json.hpp"

#include "invlab/bsde.hpp"
#include "invlab/errors.hpp"
#include "invlab/hazard_oracle.hpp"
#include "invlab/pde.hpp"
#include "invlab/report.hpp"
#include "invlab/scenario.hpp"
#include "invlab/transfer.hpp"

namespace invlab {

using nlohmann::json;

namespace detail {

/// Reads one JSON object, rejecting keys nobody asked for.
class StrictObject {
public:
    StrictObject(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
    }

    template <class T>
    T get(const std::string& key, T fallback) {
        seen_.insert(key);
        if (!j_.contains(key)) return fallback;
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& child(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) throw ConfigError("unknown key '" + where_ + "." + k + "'");
        }
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline StateFunction parse_function(const json& j, const std::string& where) {
    StrictObject o(j, where);
    const auto family = o.get<std::string>("family", "positive_indicator");
    const double level = o.get<double>("level", 1.0);
    const double width = o.get<double>("width", 1.0);
    o.finish();
    INVLAB_REQUIRE(std::isfinite(level), ConfigError, where + ".level must be finite");
    INVLAB_REQUIRE(width > 0.0 && std::isfinite(width), ConfigError, where + ".width must be positive");
    return StateFunction::from_name(family, level, width);
}

inline json function_json(const StateFunction& f) {
    return {{"family", f.name()}, {"level", f.level}, {"width", f.width}};
}

inline SignConvention parse_sign(const std::string& s) {
    if (s == "first_principles") return SignConvention::FirstPrinciples;
    if (s == "mirrored") return SignConvention::Mirrored;
    if (s == "auto") return SignConvention::Auto;
    throw ConfigError("unknown sign convention '" + s + "'");
}

}  // namespace detail

inline const std::vector<std::string>& known_suites() {
    static const std::vector<std::string> s{"hazard", "transfer", "bsde", "pde", "compare"};
    return s;
}

/// Copula model with kappa = 1, Psi = exp, a client clock at rate 0.5 and the
/// Cox hazard 0.1 used when the kind is switched to cox.
inline ModelConfig default_model() {
    ModelConfig m;
    m.client_hazard = 0.5;
    m.sign = SignConvention::Auto;
    m.cox_hazard.c0 = 0.1;
    m.jumps.intensity = 1.0;
    return m;
}

struct ExperimentConfig {
    ModelConfig model = default_model();
    std::size_t steps = 200;
    std::size_t n_paths = 100000;
    std::uint64_t seed = 2024;
    std::vector<std::string> suites = known_suites();
    double threshold = 4.0;
    double relative_tolerance = 1e-10;
    double separation = 5.0;
    std::string output_dir = "out";
    StateFunction payoff = StateFunction::positive_indicator();
    std::size_t oracle_draws = 4'000'000;
    // bsde
    std::string driver = "intensity_discount";
    double driver_lambda = 0.1;
    Cashflow cashflow = Cashflow::client_lump(StateFunction::positive_indicator());
    std::size_t halving_paths = 5000;
    int regression_bins = 40;
    // pde
    PDEOptions pde;
    std::size_t richardson_steps = 50;
    std::size_t richardson_nodes = 101;
    std::size_t surface_stride = 1;
    // compare
    bool reseed = true;

    static ExperimentConfig from_json(const json& j) {
        ExperimentConfig c;
        detail::StrictObject root(j, "config");
        if (root.has("model")) {
            detail::StrictObject m(root.child("model"), "model");
            const auto kind = m.get<std::string>("kind", "dgc");
            INVLAB_REQUIRE(kind == "dgc" || kind == "cox", ConfigError, "model.kind must be 'dgc' or 'cox'");
            c.model.kind = kind == "cox" ? ModelKind::Cox : ModelKind::DGC;
            c.model.horizon = m.get<double>("horizon", c.model.horizon);
            c.model.kappa = m.get<double>("kappa", c.model.kappa);
            c.model.client_hazard = m.get<double>("client_hazard", c.model.client_hazard);
            c.model.sign = detail::parse_sign(m.get<std::string>("sign", to_string(c.model.sign)));
            if (m.has("psi")) {
                detail::StrictObject p(m.child("psi"), "model.psi");
                const auto fam = p.get<std::string>("family", "exp");
                INVLAB_REQUIRE(fam == "exp" || fam == "softplus", ConfigError, "model.psi.family must be exp or softplus");
                c.model.psi.kind = fam == "exp" ? PsiFamily::Kind::Exp : PsiFamily::Kind::Softplus;
                c.model.psi.scale = p.get<double>("scale", c.model.psi.scale);
                c.model.psi.shift = p.get<double>("shift", c.model.psi.shift);
                p.finish();
            }
            if (m.has("cox_hazard")) {
                detail::StrictObject h(m.child("cox_hazard"), "model.cox_hazard");
                c.model.cox_hazard.c0 = h.get<double>("c0", c.model.cox_hazard.c0);
                c.model.cox_hazard.c1 = h.get<double>("c1", c.model.cox_hazard.c1);
                h.finish();
            }
            if (m.has("jumps")) {
                detail::StrictObject h(m.child("jumps"), "model.jumps");
                c.model.jumps.intensity = h.get<double>("intensity", c.model.jumps.intensity);
                c.model.jumps.mark_mean = h.get<double>("mark_mean", c.model.jumps.mark_mean);
                h.finish();
            }
            m.finish();
        }
        if (root.has("grid")) {
            detail::StrictObject g(root.child("grid"), "grid");
            c.steps = g.get<std::size_t>("steps", c.steps);
            g.finish();
        }
        c.n_paths = root.get<std::size_t>("n_paths", c.n_paths);
        c.seed = root.get<std::uint64_t>("seed", c.seed);
        c.suites = root.get<std::vector<std::string>>("suites", c.suites);
        c.output_dir = root.get<std::string>("output_dir", c.output_dir);
        if (root.has("payoff")) c.payoff = detail::parse_function(root.child("payoff"), "payoff");
        if (root.has("tolerances")) {
            detail::StrictObject t(root.child("tolerances"), "tolerances");
            c.threshold = t.get<double>("threshold", c.threshold);
            c.relative_tolerance = t.get<double>("relative_tolerance", c.relative_tolerance);
            c.separation = t.get<double>("separation", c.separation);
            t.finish();
        }
        if (root.has("hazard")) {
            detail::StrictObject h(root.child("hazard"), "hazard");
            c.oracle_draws = h.get<std::size_t>("oracle_draws", c.oracle_draws);
            h.finish();
        }
        if (root.has("bsde")) {
            detail::StrictObject b(root.child("bsde"), "bsde");
            c.driver = b.get<std::string>("driver", c.driver);
            c.driver_lambda = b.get<double>("lambda", c.driver_lambda);
            c.halving_paths = b.get<std::size_t>("halving_paths", c.halving_paths);
            c.regression_bins = b.get<int>("regression_bins", c.regression_bins);
            if (b.has("cashflow")) {
                detail::StrictObject a(b.child("cashflow"), "bsde.cashflow");
                const auto kind = a.get<std::string>("kind", "client_lump");
                INVLAB_REQUIRE(kind == "client_lump" || kind == "continuous", ConfigError,
                               "bsde.cashflow.kind must be 'client_lump' or 'continuous'");
                const StateFunction f = a.has("function") ? detail::parse_function(a.child("function"), "bsde.cashflow.function")
                                                          : StateFunction::positive_indicator();
                a.finish();
                c.cashflow = kind == "client_lump" ? Cashflow::client_lump(f) : Cashflow::continuous(f);
            }
            b.finish();
        }
        if (root.has("pde")) {
            detail::StrictObject p(root.child("pde"), "pde");
            c.pde.theta = p.get<double>("theta", c.pde.theta);
            c.pde.n_m = p.get<std::size_t>("n_m", c.pde.n_m);
            c.pde.width_sd = p.get<double>("width_sd", c.pde.width_sd);
            c.pde.time_refinement = p.get<std::size_t>("time_refinement", c.pde.time_refinement);
            c.pde.rannacher = p.get<bool>("rannacher", c.pde.rannacher);
            c.richardson_steps = p.get<std::size_t>("richardson_steps", c.richardson_steps);
            c.richardson_nodes = p.get<std::size_t>("richardson_nodes", c.richardson_nodes);
            c.surface_stride = p.get<std::size_t>("surface_stride", c.surface_stride);
            p.finish();
        }
        if (root.has("compare")) {
            detail::StrictObject p(root.child("compare"), "compare");
            c.reseed = p.get<bool>("reseed", c.reseed);
            p.finish();
        }
        root.finish();
        c.validate();
        return c;
    }

    static ExperimentConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read config '" + path + "'");
        json j;
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError("malformed JSON in '" + path + "': " + e.what());
        }
        return from_json(j);
    }

    void validate() const {
        model.validate();
        INVLAB_REQUIRE(steps >= 4, ConfigError, "grid.steps must be at least 4");
        INVLAB_REQUIRE(n_paths >= 100, ConfigError, "n_paths must be at least 100");
        for (const auto& s : suites) {
            INVLAB_REQUIRE(std::find(known_suites().begin(), known_suites().end(), s) != known_suites().end(),
                           ConfigError, "unknown suite '" + s + "'");
        }
        INVLAB_REQUIRE(threshold > 0.0 && separation > 0.0, ConfigError, "thresholds must be positive");
        INVLAB_REQUIRE(relative_tolerance > 0.0, ConfigError, "relative tolerance must be positive");
        INVLAB_REQUIRE(std::isfinite(payoff.sup_abs()), ConfigError, "payoff must be bounded");
        try {
            DriverSpec::from_name(driver, driver_lambda).validate();
            cashflow.validate();
        } catch (const PreconditionError& e) {
            throw ConfigError(e.what());
        }
        INVLAB_REQUIRE(cashflow.kind != Cashflow::Kind::ClientLump || model.client_hazard > 0.0, ConfigError,
                       "a client lump cashflow needs model.client_hazard > 0");
        INVLAB_REQUIRE(halving_paths >= 100, ConfigError, "bsde.halving_paths must be at least 100");
        INVLAB_REQUIRE(regression_bins >= 2, ConfigError, "bsde.regression_bins must be at least 2");
        pde.validate();
        INVLAB_REQUIRE(richardson_steps >= 4 && richardson_nodes >= 5, ConfigError, "Richardson grid too small");
        INVLAB_REQUIRE(surface_stride >= 1, ConfigError, "pde.surface_stride must be positive");
    }

    bool runs(const std::string& suite) const { return std::find(suites.begin(), suites.end(), suite) != suites.end(); }

    /// Canonical content with every default filled in; keys are sorted.
    json to_json() const {
        json m = {{"kind", to_string(model.kind)},
                  {"horizon", model.horizon},
                  {"kappa", model.kappa},
                  {"client_hazard", model.client_hazard},
                  {"sign", to_string(model.sign)},
                  {"psi",
                   {{"family", model.psi.kind == PsiFamily::Kind::Exp ? "exp" : "softplus"},
                    {"scale", model.psi.scale},
                    {"shift", model.psi.shift}}},
                  {"cox_hazard", {{"c0", model.cox_hazard.c0}, {"c1", model.cox_hazard.c1}}},
                  {"jumps", {{"intensity", model.jumps.intensity}, {"mark_mean", model.jumps.mark_mean}}}};
        json cf = {{"kind", cashflow.name()},
                   {"function", detail::function_json(cashflow.kind == Cashflow::Kind::ClientLump ? cashflow.exposure
                                                                                                 : cashflow.density)}};
        return {{"model", m},
                {"grid", {{"steps", steps}}},
                {"n_paths", n_paths},
                {"seed", seed},
                {"suites", suites},
                {"output_dir", output_dir},
                {"payoff", detail::function_json(payoff)},
                {"tolerances",
                 {{"threshold", threshold}, {"relative_tolerance", relative_tolerance}, {"separation", separation}}},
                {"hazard", {{"oracle_draws", oracle_draws}}},
                {"bsde",
                 {{"driver", driver},
                  {"lambda", driver_lambda},
                  {"cashflow", cf},
                  {"halving_paths", halving_paths},
                  {"regression_bins", regression_bins}}},
                {"pde",
                 {{"theta", pde.theta},
                  {"n_m", pde.n_m},
                  {"width_sd", pde.width_sd},
                  {"time_refinement", pde.time_refinement},
                  {"rannacher", pde.rannacher},
                  {"richardson_steps", richardson_steps},
                  {"richardson_nodes", richardson_nodes},
                  {"surface_stride", surface_stride}}},
                {"compare", {{"reseed", reseed}}}};
    }

    /// FNV-1a of the canonical dump, as 16 hex digits. The output directory is
    /// not part of the content.
    std::string fingerprint() const {
        json j = to_json();
        j.erase("output_dir");
        std::ostringstream os;
        os << std::hex << std::setw(16) << std::setfill('0') << detail::fnv1a64(j.dump());
        return os.str();
    }
};

/// Files produced by one run, kept in memory until everything has finished.
struct ExperimentOutput {
    VerificationReport report;
    std::vector<std::pair<std::string, std::string>> artifacts;  // file name, content
    double runtime_seconds = 0.0;

    /// report.json text. Canonical mode leaves out wall-clock data and the
    /// thread count, so equal configs give equal bytes.
    std::string report_json(bool canonical) const {
        json j = report.to_json();
        if (!canonical) {
            const std::time_t now = std::time(nullptr);
            char buf[32];
            std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
            j["run"] = {{"generated_at", buf}, {"runtime_seconds", runtime_seconds}, {"threads", omp_get_max_threads()}};
        }
        return j.dump(2) + "\n";
    }

    std::string entries_csv() const {
        std::ostringstream os;
        report.write_csv(os);
        return os.str();
    }

    std::vector<const ReportEntry*> failures() const {
        std::vector<const ReportEntry*> out;
        for (const auto& e : report.entries()) {
            if (!e.pass) out.push_back(&e);
        }
        return out;
    }

    void write(const std::filesystem::path& dir, bool canonical) const {
        std::filesystem::create_directories(dir);
        const auto put = [&](const std::string& name, const std::string& content) {
            std::ofstream f(dir / name, std::ios::binary);
            if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
            f << content;
        };
        put("report.json", report_json(canonical));
        put("entries.csv", entries_csv());
        for (const auto& [name, content] : artifacts) put(name, content);
    }
};

namespace detail {

/// Half a unit in the given significant figure of the exact value.
inline ReportEntry significant_figures(std::string id, double value, double exact, int figures) {
    const double unit = std::pow(10.0, std::floor(std::log10(std::abs(exact))) - (figures - 1));
    ReportEntry e = ReportEntry::pathwise(std::move(id), std::abs(value - exact), 1.0, 0.5 * unit);
    e.details["value"] = value;
    e.details["closed_form"] = exact;
    e.details["significant_figures"] = figures;
    e.details.erase("scale");
    e.details.erase("relative_tolerance");
    return e;
}

inline const ReportEntry& find_entry(const std::vector<ReportEntry>& v, const std::string& id) {
    for (const auto& e : v) {
        if (e.theorem_id == id) return e;
    }
    throw std::logic_error("missing entry " + id);
}

inline std::string convergence_csv(const VerificationReport& r) {
    std::ostringstream os;
    os.precision(12);
    os << "theorem_id,ratio,target,band,pass\n";
    for (const auto& e : r.sorted_entries()) {
        if (e.mode != EntryMode::Convergence) continue;
        os << e.theorem_id << ',' << e.lhs << ',' << e.rhs << ',' << e.tolerance << ',' << (e.pass ? "true" : "false")
           << '\n';
    }
    return os.str();
}

}  // namespace detail

/// Builds the scenario with the sign convention resolved. tau does not depend
/// on the sign, so the batch is simulated once and only rebuilt when the
/// oracle picks the mirrored argument.
inline std::unique_ptr<Scenario> resolved_scenario(const ExperimentConfig& cfg, SignResolution& res) {
    const TimeGrid grid = TimeGrid::uniform(cfg.model.horizon, cfg.steps);
    ModelConfig m = cfg.model;
    if (m.sign == SignConvention::Auto) m.sign = SignConvention::FirstPrinciples;
    auto sc = Scenario::make(m, grid, cfg.n_paths, cfg.seed);
    res = resolve_sign(sc->batch, cfg.model, cfg.steps / 2);
    if (res.chosen != m.sign) {
        m.sign = res.chosen;
        sc.reset();
        sc = Scenario::make(m, grid, cfg.n_paths, cfg.seed);
    }
    return sc;
}

/// Runs the selected suites in dependency order (hazard gate, transfer, bsde,
/// pde, compare). A suite that throws contributes a failing "<suite>.error".
inline ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    ExperimentOutput out;
    VerificationReport& rep = out.report;
    rep.set_fingerprint(cfg.fingerprint());
    rep.set_seed(cfg.seed);
    json content = cfg.to_json();
    content.erase("output_dir");
    rep.note("config", content);
    if (cfg.suites.empty()) return out;

    const auto guarded = [&](const std::string& suite, auto&& body) {
        if (!cfg.runs(suite)) return;
        try {
            body();
        } catch (const std::exception& e) {
            ReportEntry err;
            err.theorem_id = suite + ".error";
            err.mode = EntryMode::Pathwise;
            err.max_abs_discrepancy = INFINITY;
            err.tolerance = 0.0;
            err.pass = false;
            err.details["message"] = e.what();
            rep.add(std::move(err));
        }
    };

    SignResolution sign;
    std::unique_ptr<Scenario> sc = resolved_scenario(cfg, sign);
    json sign_note = sign.to_json();
    sign_note["resolved_argument"] = sign.chosen == SignConvention::FirstPrinciples ? "(m - Psi^{-1}(t)) / nu(t)"
                                                                                    : "(Psi^{-1}(t) - m) / nu(t)";
    rep.note("sign_resolution", sign_note);
    const TimeGrid grid = sc->grid();
    const std::size_t N = grid.n_steps();

    guarded("hazard", [&] {
        HazardGateOptions o;
        o.threshold = cfg.threshold;
        o.oracle_draws = cfg.oracle_draws;
        const auto gate = hazard_gate(*sc, cfg.seed ^ 0x9e3779b97f4a7c15ull, o);
        bool pass = true;
        for (const auto& e : gate) pass = pass && e.pass;
        rep.add_all(gate);
        rep.note("hazard_gate", {{"pass", pass}, {"downstream_valid", pass}});
    });

    guarded("transfer", [&] {
        TransferOptions o;
        o.threshold = cfg.threshold;
        o.relative_tolerance = cfg.relative_tolerance;
        o.payoff = cfg.payoff;
        auto entries = run_transfer_suite(*sc, o);
        rep.note("transfer_median_abs_z", ReportEntry::finite_or_null(median_abs_z(entries)));
        const auto& c = cfg.model.cox_hazard;
        if (cfg.model.kind == ModelKind::Cox && c.c1 == 0.0 && c.c0 > 0.0) {
            const double T = cfg.model.horizon, q = std::exp(-c.c0 * T);
            const auto rhs = [&](const char* id) { return detail::find_entry(entries, id).rhs; };
            entries.push_back(detail::significant_figures("closed_form.survival_probability",
                                                          rhs("survival_formula.constant"), q, 3));
            entries.push_back(detail::significant_figures("closed_form.default_probability",
                                                          rhs("density_formula.constant"), 1.0 - q, 3));
            entries.push_back(detail::significant_figures("closed_form.expected_stopped_time",
                                                          rhs("dividend_formula.continuous"), (1.0 - q) / c.c0, 3));
        }
        rep.add_all(std::move(entries));
    });

    guarded("bsde", [&] {
        BSDEOptions o;
        o.threshold = cfg.threshold;
        o.n_bins = cfg.regression_bins;
        const DriverSpec drv = DriverSpec::from_name(cfg.driver, cfg.driver_lambda);
        {
            const auto sol = solve_reduced(*sc, drv, cfg.cashflow, o);
            const auto lifted = lift_to_full(*sc, sol);
            auto res = verify_full_residual(lifted, o);
            res.push_back(norm_transfer_check(lifted, o));
            if (drv.kind == DriverSpec::Kind::IntensityDiscount) res.push_back(verify_value_vs_direct(*sc, sol, o));
            for (auto& e : res) {
                e.details["driver"] = drv.name();
                e.details["cashflow"] = cfg.cashflow.name();
            }
            rep.add_all(std::move(res));
            std::ostringstream os;
            sol.write_surface_csv(os, grid);
            out.artifacts.emplace_back("bsde_surface.csv", os.str());
            rep.note("bsde", {{"U0", sol.U0},
                              {"U0_std_error", sol.U0_se},
                              {"max_fixed_point_iterations", sol.max_iterations_used},
                              {"max_contraction", sol.max_contraction},
                              {"monotonicity_constant", drv.C_v}});
        }
        const double lambda = 0.1, a = 1.0;
        const auto lin = solve_reduced(*sc, DriverSpec::linear(lambda), Cashflow::continuous(StateFunction::constant(a)), o);
        rep.add(detail::significant_figures("closed_form.linear_bsde", lin.U0,
                                            linear_closed_form(a, lambda, cfg.model.horizon), 3));
        const std::size_t coarse = std::max<std::size_t>(N / 4, 2);
        rep.add(bsde_halving_probe(sc->config(), TimeGrid::uniform(cfg.model.horizon, coarse), cfg.halving_paths,
                                   cfg.seed + 17, lambda, a, o));
    });

    guarded("pde", [&] {
        rep.add(pde_default_probability_check(*sc, cfg.pde, cfg.threshold));
        PDEOptions ro = cfg.pde;
        ro.n_m = cfg.richardson_nodes;
        ro.time_refinement = 1;
        rep.add(pde_richardson_probe(sc->model, StateFunction::smooth_step(0.5),
                                     TimeGrid::uniform(cfg.model.horizon, cfg.richardson_steps), ro));
        const auto u = solve_feynman_kac(sc->model, cfg.payoff, grid, cfg.pde);
        rep.add(maximum_principle_check(u, cfg.payoff));
        rep.add(semigroup_check(*sc, cfg.payoff, N / 2, N, cfg.pde, 10, cfg.threshold));
        std::ostringstream os;
        u.write_csv(os, cfg.surface_stride);
        out.artifacts.emplace_back("pde_u0.csv", os.str());
        rep.note("pde", {{"boundary_curvature", u.boundary_curvature},
                         {"domain", {u.grid.m_min, u.grid.m_max}},
                         {"n_m", u.grid.n_m}});
    });

    bool robustness = false;
    guarded("compare", [&] {
        std::ostringstream os;
        FourWayComparison::write_csv_header(os);
        const auto main = compare_four_estimators(*sc, cfg.payoff, cfg.pde, cfg.threshold, cfg.separation);
        main.write_csv(os, cfg.payoff.name());
        rep.add_all(main.entries);
        const auto zero = compare_four_estimators(*sc, StateFunction::zero(), cfg.pde, cfg.threshold, cfg.separation,
                                                  "comparison.zero_payoff");
        zero.write_csv(os, "zero");
        rep.add_all(zero.entries);
        out.artifacts.emplace_back("comparison.csv", os.str());
        robustness = cfg.reseed && !sc->model.immersed() && cfg.payoff.kind != StateFunction::Kind::Zero;
    });
    // the reseeded runs need the memory of the main batch
    const ModelConfig resolved = sc->config();
    sc.reset();
    if (robustness) {
        guarded("compare", [&] {
            rep.add(naive_separation_robustness(resolved, grid, cfg.n_paths, cfg.seed, cfg.payoff, cfg.separation));
        });
    }

    out.artifacts.emplace_back("convergence.csv", detail::convergence_csv(rep));
    out.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

}  // namespace invlab

// invlab: runs the verification suites described by a JSON config.
//
// Exit status: 0 all entries pass, 1 some entry fails, 2 bad config or usage.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <omp.h>

#include "CLI11.hpp"
#include "invlab.hpp"

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    std::optional<std::string> out;
    int threads = 0;
    bool canonical = false;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("config", c.config, "experiment config (JSON)")->required();
    sub->add_option("--seed", c.seed, "override the master seed");
    sub->add_option("--paths", c.paths, "override the number of paths");
    sub->add_option("--out", c.out, "override the output directory");
    sub->add_option("--threads", c.threads, "OpenMP threads (0 keeps the default)")->check(CLI::NonNegativeNumber);
    sub->add_flag("--canonical", c.canonical, "omit timestamps, runtime and thread count from report.json");
}

invlab::ExperimentConfig load(const Common& c, const std::vector<std::string>* suites) {
    auto cfg = invlab::ExperimentConfig::from_file(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (c.paths) cfg.n_paths = *c.paths;
    if (c.out) cfg.output_dir = *c.out;
    if (suites) cfg.suites = *suites;
    cfg.validate();
    return cfg;
}

int run(const Common& c, const std::vector<std::string>* suites) {
    invlab::ExperimentConfig cfg;
    try {
        cfg = load(c, suites);
    } catch (const invlab::ConfigError& e) {
        std::cerr << "invalid config: " << e.what() << '\n';
        return 2;
    }
    if (c.threads > 0) omp_set_num_threads(c.threads);
    const auto out = invlab::run_experiment(cfg);
    out.write(cfg.output_dir, c.canonical);
    const auto failed = out.failures();
    std::cout << "fingerprint " << cfg.fingerprint() << ", " << out.report.entries().size() << " entries, "
              << failed.size() << " failing, written to " << cfg.output_dir << '\n';
    for (const auto* e : failed) {
        std::cerr << "FAIL " << e->theorem_id << " (" << invlab::to_string(e->mode) << ")";
        if (e->mode == invlab::EntryMode::MonteCarlo) std::cerr << " z=" << e->z;
        else std::cerr << " discrepancy=" << e->max_abs_discrepancy;
        std::cerr << " tolerance=" << e->tolerance << '\n';
    }
    return failed.empty() ? 0 : 1;
}

struct ProbeTable {
    bool enabled = false;
    std::vector<double> times{0.1, 0.25, 0.5, 0.75, 0.9};
    double m_min = -3.0, m_max = 3.0;
    std::size_t m_points = 61;
};

// Q = S e^{Gamma} depends on the path; the table uses the frozen path m_s = m.
void write_probe_table(std::ostream& os, const invlab::HazardModel& model, const ProbeTable& tab) {
    os.precision(12);
    os << "t,m,S,gamma,mu,Q_frozen_path\n";
    for (double t : tab.times) {
        for (std::size_t j = 0; j < tab.m_points; ++j) {
            const double m = tab.m_points == 1 ? tab.m_min
                                               : tab.m_min + (tab.m_max - tab.m_min) * static_cast<double>(j) /
                                                                 static_cast<double>(tab.m_points - 1);
            // composite 3-point Gauss-Legendre, which never evaluates s = 0
            const std::size_t n = 200;
            const double h = t / static_cast<double>(n), r = std::sqrt(0.6);
            double Gamma = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double c = h * (static_cast<double>(k) + 0.5);
                Gamma += h / 18.0 *
                         (5.0 * model.intensity_gamma(c - 0.5 * h * r, m) + 8.0 * model.intensity_gamma(c, m) +
                          5.0 * model.intensity_gamma(c + 0.5 * h * r, m));
            }
            const double S = model.azema_S(t, m);
            os << t << ',' << m << ',' << S << ',' << model.intensity_gamma(t, m) << ',' << model.drift_mu(t, m) << ','
               << S * std::exp(Gamma) << '\n';
        }
    }
}

int probe(const Common& c, double t, double m, std::size_t draws, double step, const ProbeTable& tab) {
    invlab::ExperimentConfig cfg;
    try {
        cfg = load(c, nullptr);
    } catch (const invlab::ConfigError& e) {
        std::cerr << "invalid config: " << e.what() << '\n';
        return 2;
    }
    if (c.threads > 0) omp_set_num_threads(c.threads);
    invlab::ModelConfig mc = cfg.model;
    if (mc.sign == invlab::SignConvention::Auto) mc.sign = invlab::SignConvention::FirstPrinciples;
    const invlab::HazardModel model(mc);
    if (tab.enabled) {
        for (double u : tab.times) {
            if (!(u > 0.0 && u <= mc.horizon)) {
                std::cerr << "invalid probe: table times must lie in (0, horizon]\n";
                return 2;
            }
        }
        if (c.out) {
            std::filesystem::create_directories(*c.out);
            std::ofstream f(std::filesystem::path(*c.out) / "model_probe.csv");
            write_probe_table(f, model, tab);
        } else {
            write_probe_table(std::cout, model, tab);
        }
        return 0;
    }
    if (!(t > 0.0 && t < mc.horizon)) {
        std::cerr << "invalid probe: t must lie in (0, horizon)\n";
        return 2;
    }
    nlohmann::json j = {{"model", invlab::to_string(mc.kind)},
                        {"sign", invlab::to_string(mc.sign)},
                        {"t", t},
                        {"m", m},
                        {"S", model.azema_S(t, m)},
                        {"gamma", model.intensity_gamma(t, m)},
                        {"mu", model.drift_mu(t, m)}};
    if (mc.kind == invlab::ModelKind::DGC) {
        const auto est = invlab::nested_mc_hazard(model, t, m, draws, cfg.seed, step);
        j["nested_oracle"] = {{"gamma", est.gamma_mc},  {"gamma_std_error", est.gamma_se}, {"gamma_z", est.gamma_z()},
                              {"mu", est.mu_mc},        {"mu_std_error", est.mu_se},       {"mu_z", est.mu_z()},
                              {"draws", est.n_draws},   {"step", est.step}};
    }
    std::cout << j.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Invariance-time verification lab"};
    app.require_subcommand(1);

    Common run_opts, verify_opts, bsde_opts, pde_opts, compare_opts, probe_opts;
    auto* run_cmd = app.add_subcommand("run", "run the suites listed in the config");
    add_common(run_cmd, run_opts);
    auto* verify_cmd = app.add_subcommand("verify", "hazard gate and transfer identities");
    add_common(verify_cmd, verify_opts);
    auto* bsde_cmd = app.add_subcommand("bsde", "reduced BSDE solve and its checks");
    add_common(bsde_cmd, bsde_opts);
    auto* pde_cmd = app.add_subcommand("pde", "Feynman-Kac solver checks");
    add_common(pde_cmd, pde_opts);
    auto* compare_cmd = app.add_subcommand("compare", "four-way estimator comparison");
    add_common(compare_cmd, compare_opts);

    auto* model_cmd = app.add_subcommand("model", "model utilities");
    model_cmd->require_subcommand(1);
    auto* probe_cmd = model_cmd->add_subcommand("probe", "closed-form hazard state and nested oracle at (t, m)");
    add_common(probe_cmd, probe_opts);
    double t = 0.5, m = 0.0, step = 0.01;
    std::size_t draws = 1'000'000;
    probe_cmd->add_option("--t", t, "time");
    probe_cmd->add_option("--m", m, "state");
    probe_cmd->add_option("--draws", draws, "nested oracle draws");
    probe_cmd->add_option("--step", step, "oracle look-ahead");
    ProbeTable table;
    probe_cmd->add_flag("--table", table.enabled, "write a (t, m, S, gamma, mu, Q) CSV table instead");
    probe_cmd->add_option("--times", table.times, "table times")->delimiter(',');
    probe_cmd->add_option("--m-min", table.m_min, "table lower m");
    probe_cmd->add_option("--m-max", table.m_max, "table upper m");
    probe_cmd->add_option("--m-points", table.m_points, "table m nodes")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    static const std::vector<std::string> verify_suites{"hazard", "transfer"};
    static const std::vector<std::string> bsde_suites{"hazard", "bsde"};
    static const std::vector<std::string> pde_suites{"pde"};
    static const std::vector<std::string> compare_suites{"compare"};
    try {
        if (*run_cmd) return run(run_opts, nullptr);
        if (*verify_cmd) return run(verify_opts, &verify_suites);
        if (*bsde_cmd) return run(bsde_opts, &bsde_suites);
        if (*pde_cmd) return run(pde_opts, &pde_suites);
        if (*compare_cmd) return run(compare_opts, &compare_suites);
        if (*probe_cmd) return probe(probe_opts, t, m, draws, step, table);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

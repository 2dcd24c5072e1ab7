#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "invlab.hpp"

using namespace invlab;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text) { return ExperimentConfig::from_json(json::parse(text)); }

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("invlab_test_" + name);
    fs::remove_all(p);
    return p;
}

int cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(INVLAB_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream f(p);
    f << text;
}

ExperimentConfig small_cox() {
    ExperimentConfig c;
    c.model.kind = ModelKind::Cox;
    c.model.cox_hazard = {0.1, 0.0};
    c.n_paths = 10000;
    c.steps = 100;
    c.seed = 7;
    c.halving_paths = 1000;
    c.pde.n_m = 201;
    return c;
}

}  // namespace

TEST(Config, DefaultsAreValidAndEmptyObjectGivesDefaults) {
    ExperimentConfig d;
    EXPECT_NO_THROW(d.validate());
    const auto c = parse("{}");
    EXPECT_EQ(c.fingerprint(), d.fingerprint());
    EXPECT_EQ(c.model.kind, ModelKind::DGC);
    EXPECT_EQ(c.model.sign, SignConvention::Auto);
    EXPECT_EQ(c.suites.size(), known_suites().size());
}

TEST(Config, UnknownKeysRejectedAtEveryLevel) {
    for (const char* bad : {R"({"nope": 1})", R"({"model": {"kappa": 1, "nope": 1}})",
                            R"({"model": {"psi": {"family": "exp", "nope": 0}}})", R"({"grid": {"dt": 0.1}})",
                            R"({"tolerances": {"z": 4}})", R"({"bsde": {"cashflow": {"kind": "continuous", "x": 1}}})",
                            R"({"bsde": {"cashflow": {"function": {"family": "sign", "x": 1}}}})",
                            R"({"pde": {"nodes": 3}})", R"({"compare": {"reseeds": 2}})",
                            R"({"payoff": {"family": "sign", "shift": 1}})"}) {
        EXPECT_THROW(parse(bad), ConfigError) << bad;
    }
}

TEST(Config, InvalidValuesRejected) {
    for (const char* bad : {R"({"model": {"kind": "heston"}})", R"({"model": {"kappa": -1}})",
                            R"({"model": {"sign": "maybe"}})", R"({"model": {"horizon": "one"}})",
                            R"({"suites": ["hazard", "everything"]})", R"({"grid": {"steps": 1}})",
                            R"({"n_paths": 5})", R"({"payoff": {"family": "cubic"}})",
                            R"({"bsde": {"driver": "quadratic"}})", R"({"pde": {"width_sd": 2}})",
                            R"({"model": {"client_hazard": 0}})", R"({"tolerances": {"threshold": 0}})", "[]"}) {
        EXPECT_THROW(parse(bad), ConfigError) << bad;
    }
    EXPECT_THROW(ExperimentConfig::from_file("/nonexistent/config.json"), ConfigError);
}

TEST(Config, FingerprintIgnoresKeyOrderAndOutputDirButNotContent) {
    const auto a = parse(R"({"seed": 5, "n_paths": 2000, "output_dir": "x"})");
    const auto b = parse(R"({"output_dir": "y", "n_paths": 2000, "seed": 5})");
    const auto c = parse(R"({"seed": 6, "n_paths": 2000})");
    const auto d = parse(R"({"seed": 5, "n_paths": 2000, "payoff": {"family": "smooth_step", "width": 0.5}})");
    EXPECT_EQ(a.fingerprint(), b.fingerprint());
    EXPECT_NE(a.fingerprint(), c.fingerprint());
    EXPECT_NE(a.fingerprint(), d.fingerprint());
    EXPECT_EQ(a.fingerprint().size(), 16u);
    // canonical dump round-trips
    EXPECT_EQ(ExperimentConfig::from_json(d.to_json()).fingerprint(), d.fingerprint());
}

TEST(Config, FnvMatchesReferenceVectors) {
    EXPECT_EQ(detail::fnv1a64(""), 0xcbf29ce484222325ull);
    EXPECT_EQ(detail::fnv1a64("a"), 0xaf63dc4c8601ec8cull);
    EXPECT_EQ(detail::fnv1a64("foobar"), 0x85944171f73967e8ull);
}

TEST(Runner, EmptySuiteListGivesEmptyPassingReport) {
    ExperimentConfig c;
    c.suites.clear();
    const auto out = run_experiment(c);
    EXPECT_TRUE(out.report.entries().empty());
    const auto j = json::parse(out.report_json(true));
    EXPECT_TRUE(j["all_pass"].get<bool>());
    EXPECT_TRUE(j["entries"].empty());
}

TEST(Runner, CoxSmokePassesWithClosedFormsAndArtifacts) {
    const auto c = small_cox();
    const auto out = run_experiment(c);
    for (const auto& e : out.report.entries()) EXPECT_TRUE(e.pass) << e.theorem_id;
    for (const char* id : {"closed_form.survival_probability", "closed_form.default_probability",
                           "closed_form.expected_stopped_time", "closed_form.linear_bsde", "comparison.naive_collapses",
                           "pde.richardson_ratio", "bsde.grid_halving_bias_ratio"}) {
        EXPECT_NE(out.report.find(id), nullptr) << id;
    }
    EXPECT_EQ(out.report.find("comparison.naive_separated_reseeded"), nullptr);
    EXPECT_FALSE(out.report.notes()["sign_resolution"]["applicable"].get<bool>());

    const fs::path dir = scratch("cox_artifacts");
    out.write(dir, true);
    for (const char* f : {"report.json", "entries.csv", "bsde_surface.csv", "pde_u0.csv", "comparison.csv",
                          "convergence.csv"}) {
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    }
    std::ifstream in(dir / "entries.csv");
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "theorem_id,mode,lhs,rhs,se,z,pass");
    const auto j = json::parse(std::ifstream(dir / "report.json"));
    EXPECT_EQ(j["config_fingerprint"].get<std::string>(), c.fingerprint());
    EXPECT_FALSE(j.contains("run"));
    fs::remove_all(dir);
}

TEST(Runner, CanonicalModeDropsRunMetadataOnly) {
    auto c = small_cox();
    c.suites = {"transfer"};
    c.n_paths = 2000;
    const auto out = run_experiment(c);
    auto loose = json::parse(out.report_json(false));
    ASSERT_TRUE(loose.contains("run"));
    EXPECT_TRUE(loose["run"].contains("generated_at"));
    EXPECT_TRUE(loose["run"].contains("threads"));
    loose.erase("run");
    EXPECT_EQ(loose.dump(2) + "\n", out.report_json(true));
    // same config, fresh run
    EXPECT_EQ(run_experiment(c).report_json(true), out.report_json(true));
}

TEST(Runner, SuiteErrorsBecomeFailingEntries) {
    auto c = small_cox();
    c.suites = {"pde"};
    c.pde.theta = 0.0;  // explicit scheme on this grid violates its step condition
    c.pde.n_m = 801;
    const auto out = run_experiment(c);
    const auto* e = out.report.find("pde.error");
    ASSERT_NE(e, nullptr);
    EXPECT_FALSE(e->pass);
    EXPECT_FALSE(out.failures().empty());
}

TEST(Cli, ExitCodesAndNoOutputOnInvalidConfig) {
    const fs::path dir = scratch("cli");
    fs::create_directories(dir);
    const fs::path log = dir / "log.txt";

    write_file(dir / "malformed.json", "{\"seed\": ");
    EXPECT_EQ(cli("run " + (dir / "malformed.json").string() + " --out " + (dir / "o1").string(), log), 2);
    EXPECT_FALSE(fs::exists(dir / "o1"));

    write_file(dir / "unknown.json", R"({"model": {"kind": "dgc", "bogus": 1}})");
    EXPECT_EQ(cli("run " + (dir / "unknown.json").string() + " --out " + (dir / "o2").string(), log), 2);
    EXPECT_FALSE(fs::exists(dir / "o2"));

    EXPECT_EQ(cli("run", log), 2);
    EXPECT_EQ(cli("frobnicate x", log), 2);

    write_file(dir / "empty.json", R"({"suites": []})");
    EXPECT_EQ(cli("run " + (dir / "empty.json").string() + " --canonical --out " + (dir / "o3").string(), log), 0);
    EXPECT_TRUE(fs::exists(dir / "o3" / "report.json"));
    EXPECT_TRUE(fs::exists(dir / "o3" / "entries.csv"));

    // an underpowered separation check fails, giving status 1 and the entry on stderr
    write_file(dir / "weak.json",
               R"({"grid": {"steps": 20}, "n_paths": 200, "suites": ["compare"], "compare": {"reseed": false}})");
    EXPECT_EQ(cli("compare " + (dir / "weak.json").string() + " --out " + (dir / "o4").string(), log), 1);
    std::stringstream ss;
    ss << std::ifstream(log).rdbuf();
    EXPECT_NE(ss.str().find("FAIL comparison.naive_separated"), std::string::npos) << ss.str();
    fs::remove_all(dir);
}

TEST(Cli, OverridesAndProbeTable) {
    const fs::path dir = scratch("cli_probe");
    fs::create_directories(dir);
    const fs::path log = dir / "log.txt";
    write_file(dir / "cox.json", R"({"model": {"kind": "cox", "cox_hazard": {"c0": 0.2}}, "suites": ["transfer"]})");
    EXPECT_EQ(cli("verify " + (dir / "cox.json").string() + " --paths 2000 --seed 3 --threads 2 --canonical --out " +
                      (dir / "o").string(),
                  log),
              0);
    const auto j = json::parse(std::ifstream(dir / "o" / "report.json"));
    EXPECT_EQ(j["seed"].get<std::uint64_t>(), 3u);
    EXPECT_EQ(j["notes"]["config"]["n_paths"].get<std::size_t>(), 2000u);
    EXPECT_NE(j["notes"]["config"]["suites"].dump().find("hazard"), std::string::npos);

    EXPECT_EQ(cli("model probe " + (dir / "cox.json").string() + " --table --times 0.5,1 --m-points 3 --out " +
                      (dir / "p").string(),
                  log),
              0);
    std::ifstream in(dir / "p" / "model_probe.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "t,m,S,gamma,mu,Q_frozen_path");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        std::stringstream ls(line);
        std::vector<double> v;
        for (std::string cell; std::getline(ls, cell, ',');) v.push_back(std::stod(cell));
        ASSERT_EQ(v.size(), 6u);
        EXPECT_NEAR(v[2], std::exp(-0.2 * v[0]), 1e-12);  // Cox survival
        EXPECT_NEAR(v[3], 0.2, 1e-15);
        EXPECT_NEAR(v[5], 1.0, 1e-12);  // immersion: Q = 1
    }
    EXPECT_EQ(rows, 6);
    EXPECT_EQ(cli("model probe " + (dir / "cox.json").string() + " --t 2", log), 2);
    fs::remove_all(dir);
}

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include "prandtl/experiments.hpp"

using namespace prandtl;
namespace fs = std::filesystem;

namespace {

Errc config_code(const json& j)
{
    try {
        config_from_json(j);
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::precondition;
}

const ArtifactBundle& tau_bundle()
{
    static const ArtifactBundle b = [] {
        ExperimentConfig c;
        c.experiment = "tau-solve";
        return run_experiment(c);
    }();
    return b;
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("prandtl_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int lab(const std::string& args)
{
    const std::string cmd = std::string(PRANDTL_LAB_PATH) + " " + args + " > /dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string source(const std::string& rel)
{
    return (fs::path(PRANDTL_SOURCE_DIR) / rel).string();
}

} // namespace

TEST(Config, DefaultsRoundTrip)
{
    for (const auto& id : experiment_ids()) {
        ExperimentConfig c;
        c.experiment = id;
        EXPECT_EQ(config_from_json(to_json(c)), c) << id;
    }
}

TEST(Config, CustomFlowRoundTrip)
{
    ExperimentConfig c;
    c.flow_preset = "custom";
    c.flow.far_field_U = 0.7;
    c.seed = 42;
    c.ks = {16, 64};
    EXPECT_EQ(config_from_json(to_json(c)), c);
}

TEST(Config, PresetSelection)
{
    const auto c = config_from_json({{"flow", {{"preset", "canonical"}}}});
    EXPECT_EQ(c.flow, FlowParams::canonical());
    const auto w = config_from_json({{"flow", {{"preset", "canonical"}, {"support_M", 5.0}}}});
    EXPECT_EQ(w.flow.support_M, 5.0);
    EXPECT_EQ(w.flow.crit_value, FlowParams::canonical().crit_value);
}

TEST(Config, Rejections)
{
    EXPECT_EQ(config_code({{"dispersion", {{"epsilons", {-1e-2, 1e-3}}}}}), Errc::config_invalid);
    EXPECT_EQ(config_code({{"bvp", {{"epsilon", 0.0}}}}), Errc::config_invalid);
    EXPECT_EQ(config_code({{"experiment", "no-such"}}), Errc::config_invalid);
    EXPECT_EQ(config_code({{"ivp", {{"courant", 2.0}}}}), Errc::config_invalid);
    EXPECT_EQ(config_code({{"ivp", {{"ks", "many"}}}}), Errc::config_invalid);
    EXPECT_EQ(config_code({{"tau_solve", {{"newton_tolerance", 1e-9}}}}), Errc::config_invalid);
    EXPECT_EQ(config_code({{"extra", 1}}), Errc::config_invalid);
    EXPECT_EQ(config_code({{"flow", {{"curvature", 1.0}}}}), Errc::config_invalid);
    EXPECT_EQ(config_code({{"flow", {{"preset", "triangle"}}}}), Errc::config_invalid);
    EXPECT_THROW(load_config("/nonexistent/config.json"), Error);
}

TEST(Config, SampleConfigsLoad)
{
    for (const auto& e : fs::directory_iterator(source("configs"))) {
        const auto c = load_config(e.path().string());
        const std::string stem = e.path().stem().string();
        EXPECT_EQ(stem.rfind(c.experiment, 0), 0u) << stem;
    }
}

TEST(Goldens, IdenticalRerunHasZeroDiff)
{
    const json store = golden_store(tau_bundle());
    ASSERT_FALSE(store.empty());
    const auto rep = compare_goldens(tau_bundle(), store);
    EXPECT_TRUE(rep.all_passed());
    for (const auto& d : rep.diffs)
        EXPECT_EQ(d.rel_diff, 0.0) << d.key;
}

TEST(Goldens, DetectsDriftAndMissingKeys)
{
    json store = golden_store(tau_bundle());
    store["energy_constant"]["value"] = store["energy_constant"]["value"].get<double>() * (1.0 + 1e-6);
    EXPECT_FALSE(compare_goldens(tau_bundle(), store).all_passed());
    store["not_produced"] = {{"value", 1.0}, {"rel_tol", 1.0}};
    try {
        compare_goldens(tau_bundle(), store);
        FAIL() << "expected MissingGolden";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::missing_golden);
    }
}

TEST(Bundle, DeterministicAndWritten)
{
    ExperimentConfig c;
    c.experiment = "tau-solve";
    const ArtifactBundle again = run_experiment(c);
    ASSERT_EQ(again.tables.size(), tau_bundle().tables.size());
    for (const auto& [name, t] : tau_bundle().tables)
        EXPECT_EQ(again.tables.at(name).str(), t.str()) << name;
    EXPECT_EQ(again.summary.dump(), tau_bundle().summary.dump());

    const fs::path dir = scratch("bundle");
    write_bundle(again, dir);
    EXPECT_TRUE(fs::exists(dir / "summary.json"));
    EXPECT_TRUE(fs::exists(dir / "report.txt"));
    EXPECT_TRUE(fs::exists(dir / "shear_layer_profile.csv"));
    std::ifstream in(dir / "summary.json");
    const json s = json::parse(in);
    EXPECT_EQ(s["criteria"].size(), 2u);
    EXPECT_EQ(s["experiment"], "tau-solve");
}

TEST(Bundle, TauSolveCriteriaPass)
{
    ASSERT_EQ(tau_bundle().criteria.size(), 2u);
    for (const auto& c : tau_bundle().criteria)
        EXPECT_TRUE(c.pass) << c.id << ": " << c.detail;
}

TEST(Bundle, CsvFormat)
{
    const CsvTable t{{"a", "b"}, {{1.0, 0.1}, {2.0, -3.5}}};
    EXPECT_EQ(t.str(), "a,b\n1,0.10000000000000001\n2,-3.5\n");
}

TEST(Cli, ExitCodes)
{
    const fs::path out = scratch("cli");
    const std::string o = " --out " + out.string();
    EXPECT_EQ(lab("tau-solve --config " + source("configs/tau-solve.json") + o), 0);
    EXPECT_TRUE(fs::exists(out / "tau-solve" / "summary.json"));
    EXPECT_TRUE(fs::exists(out / "tau-solve" / "config.json"));
    EXPECT_EQ(lab("tau-solve --config " + source("configs/tau-solve.json") + o + " --check-goldens --goldens " +
                  source("goldens/tau-solve.json")),
              0);
    EXPECT_TRUE(fs::exists(out / "tau-solve" / "golden_diff.json"));
    EXPECT_EQ(lab("tau-solve" + o + " --check-goldens --goldens " + (out / "none.json").string()), 1);

    std::ofstream(out / "bad.json") << R"({"experiment": "tau-solve", "bvp": {"dx": -1}})";
    EXPECT_EQ(lab("tau-solve --config " + (out / "bad.json").string() + o), 2);
    std::ofstream(out / "broken.json") << "{ not json";
    EXPECT_EQ(lab("tau-solve --config " + (out / "broken.json").string() + o), 2);
    EXPECT_EQ(lab("ivp-scaling --config " + source("configs/tau-solve.json") + o), 2);
    EXPECT_EQ(lab("tau-solve --no-such-flag"), 2);
    EXPECT_EQ(lab(""), 2);
    EXPECT_EQ(lab("tau-solve --dump-config"), 0);
}

TEST(Cli, BlessThenCheck)
{
    const fs::path out = scratch("bless");
    const std::string o = " --out " + out.string();
    const std::string g = (out / "g.json").string();
    EXPECT_EQ(lab("tau-solve" + o + " --bless " + g), 0);
    EXPECT_EQ(lab("tau-solve" + o + " --check-goldens --goldens " + g), 0);
    std::ifstream in(g);
    const json store = json::parse(in);
    EXPECT_TRUE(store.contains("tau_tilde_re"));
}

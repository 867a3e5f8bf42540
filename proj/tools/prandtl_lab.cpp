// Experiment driver: one subcommand per experiment id.
// Exit status: 0 all criteria (and goldens) pass, 1 numeric failure, 2 config error.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "prandtl/experiments.hpp"

namespace fs = std::filesystem;
using namespace prandtl;

namespace {

struct Flags {
    std::string config;
    std::string out;
    std::optional<unsigned> seed;
    std::string goldens;
    bool check_goldens = false;
    std::string bless;
    bool dump_config = false;
};

int run(const std::string& id, const Flags& f)
{
    ExperimentConfig c;
    try {
        if (!f.config.empty())
            c = load_config(f.config);
        else
            c.experiment = id;
        if (c.experiment != id)
            throw Error(Errc::config_invalid, "config is for '" + c.experiment + "', subcommand is '" + id + "'");
        if (!f.out.empty())
            c.out_dir = f.out;
        if (f.seed)
            c.seed = *f.seed;
        validate(c);
    } catch (const Error& e) {
        std::cerr << e.what() << '\n';
        return 2;
    }
    if (f.dump_config) {
        std::cout << to_json(c).dump(2) << '\n';
        return 0;
    }

    ArtifactBundle b;
    try {
        b = run_experiment(c);
    } catch (const Error& e) {
        std::cerr << e.what() << '\n';
        return e.code() == Errc::config_invalid ? 2 : 1;
    }
    const fs::path dir = fs::path(c.out_dir) / id;
    write_bundle(b, dir);
    std::ofstream(dir / "config.json") << to_json(c).dump(2) << '\n';
    std::cout << b.report();
    bool ok = b.all_passed();

    if (!f.bless.empty()) {
        fs::create_directories(fs::path(f.bless).parent_path().empty() ? "." : fs::path(f.bless).parent_path());
        std::ofstream(f.bless) << golden_store(b).dump(2) << '\n';
        std::cout << "goldens written to " << f.bless << '\n';
    }
    if (f.check_goldens) {
        const std::string path = f.goldens.empty() ? "goldens/" + id + ".json" : f.goldens;
        std::ifstream in(path);
        if (!in) {
            std::cerr << errc_name(Errc::missing_golden) << ": no golden store at " << path << '\n';
            return 1;
        }
        try {
            const json store = json::parse(in);
            const GoldenReport g = compare_goldens(b, store);
            json diff = json::array();
            for (const auto& d : g.diffs) {
                std::cout << "golden " << d.key << ": " << (d.pass ? "ok" : "DIFF") << " expected " << d.expected
                          << " got " << d.actual << " rel " << d.rel_diff << " tol " << d.rel_tol << '\n';
                diff.push_back({{"key", d.key}, {"expected", d.expected}, {"actual", d.actual},
                                {"rel_diff", d.rel_diff}, {"rel_tol", d.rel_tol}, {"pass", d.pass}});
            }
            std::ofstream(dir / "golden_diff.json") << diff.dump(2) << '\n';
            ok = ok && g.all_passed();
        } catch (const Error& e) {
            std::cerr << e.what() << '\n';
            return 1;
        } catch (const json::exception& e) {
            std::cerr << "malformed golden store " << path << ": " << e.what() << '\n';
            return 2;
        }
    }
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Shear-flow instability experiments"};
    app.require_subcommand(1);
    Flags f;
    int status = 0;
    for (const auto& id : experiment_ids()) {
        auto* sub = app.add_subcommand(id, "run the " + id + " experiment");
        sub->add_option("--config", f.config, "JSON config file");
        sub->add_option("--out", f.out, "output directory (overrides the config)");
        sub->add_option("--seed", f.seed, "seed for randomised corpora");
        sub->add_flag("--check-goldens", f.check_goldens, "compare against the golden store");
        sub->add_option("--goldens", f.goldens, "golden store path (default goldens/<experiment>.json)");
        sub->add_option("--bless", f.bless, "write this run's golden values to PATH");
        sub->add_flag("--dump-config", f.dump_config, "print the resolved config and exit");
        sub->callback([&f, &status, id] { status = run(id, f); });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    return status;
}

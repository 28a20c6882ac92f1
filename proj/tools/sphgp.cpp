// sphgp: simulate, fit, predict, score and run experiment grids for
// nonstationary Gaussian processes on the sphere.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sphgp/pipeline.hpp"

namespace {

struct Flags {
    std::string config;
    std::string preset = "desk";
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> data;
    bool degrees = false;
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--preset", f.preset, "starting config before --config is applied")
        ->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--seed", f.seed, "root seed");
    cmd->add_option("--data", f.data, "lon,lat,value CSV to fit instead of a simulated field");
    cmd->add_flag("--degrees", f.degrees, "input angles are in degrees");
}

// preset, then config file, then command-line flags
sphgp::ExperimentConfig resolve(const Flags& f) {
    auto c = sphgp::preset(f.preset);
    if (!f.config.empty()) {
        sphgp::json j;
        try {
            j = sphgp::read_json_file(f.config);
        } catch (const sphgp::json::exception& e) {
            throw sphgp::ConfigError(f.config + ": " + e.what());
        }
        c = sphgp::apply_config_json(c, j);
    }
    if (f.out) c.out = *f.out;
    if (f.seed) c.seed = *f.seed;
    if (f.data) c.data.path = *f.data;
    if (f.degrees) c.data.degrees = true;
    c.validate();
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian processes on the sphere with nonstationary Matern covariance"};
    app.require_subcommand(1);
    Flags flags;
    auto* sim = app.add_subcommand("simulate", "simulate a field on the lon/lat grid (field.csv, truth.json)");
    auto* fit = app.add_subcommand("fit", "split the data and run adaptive MCMC (split.csv, chain.csv, fit_summary.json)");
    auto* pred = app.add_subcommand("predict", "posterior predictive at the test split (predictive.csv, scores.json)");
    auto* score = app.add_subcommand("score", "recompute scores.json from saved predictive files");
    auto* exp = app.add_subcommand("experiment", "true x assumed x split grid over replicates (table.csv)");
    for (auto* cmd : {sim, fit, pred, score, exp}) add_common(cmd, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        const auto c = resolve(flags);
        if (sim->parsed()) {
            sphgp::cmd_simulate(c);
            std::cout << "wrote " << c.out << "/field.csv\n";
        } else if (fit->parsed()) {
            sphgp::cmd_fit(c);
            std::cout << "wrote " << c.out << "/chain.csv\n";
        } else if (pred->parsed()) {
            sphgp::cmd_predict(c);
            std::cout << "wrote " << c.out << "/scores.json\n";
        } else if (score->parsed()) {
            const auto s = sphgp::cmd_score(c);
            std::cout << sphgp::scores_to_json(s).dump(2) << '\n';
        } else if (exp->parsed()) {
            const auto r = sphgp::run_experiment(c);
            std::size_t failed = 0;
            for (const auto& cell : r.cells) {
                if (!cell.scores) {
                    ++failed;
                    std::cerr << "cell " << cell.key.id() << " failed: " << cell.error << '\n';
                }
            }
            std::cout << "wrote " << c.out << "/table.csv (" << r.cells.size() - failed << '/' << r.cells.size()
                      << " cells)\n";
        }
    } catch (const sphgp::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const sphgp::json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}

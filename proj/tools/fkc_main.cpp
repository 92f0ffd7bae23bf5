// Command-line harness: config-driven weighted-SDE sampling experiments.
//
// Exit codes: 0 success, 1 unexpected failure, 2 validation error,
// 3 simulation failure, 4 missing dumps (plots).

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fkc/experiment.hpp"

namespace {

int cmd_run(const std::string& config_path, int seeds, bool dry_run,
            const std::string& out_override) {
    fkc::ExperimentConfig cfg = fkc::load_config(config_path);
    if (dry_run) {
        std::cout << "ok: " << config_path << " validates\n";
        return 0;
    }
    std::filesystem::path out_dir = out_override.empty() ? cfg.output_dir : out_override;
    auto reports = fkc::run_with_seeds(cfg, seeds, out_dir);
    for (const auto& r : reports) {
        std::cout << "seed " << r.seed << "  log_z " << r.log_z;
        for (const auto& m : r.metrics) std::cout << "  " << m.metric << " " << m.value;
        std::cout << "\n";
    }
    std::cout << "wrote " << (out_dir / "report.json").string() << "\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_override) {
    std::ifstream in(config_path);
    if (!in) throw fkc::ConfigError(config_path, "cannot open config file");
    fkc::json base;
    try {
        in >> base;
    } catch (const std::exception& e) {
        throw fkc::ConfigError(config_path, std::string("invalid JSON: ") + e.what());
    }
    std::string out_dir = out_override;
    if (out_dir.empty())
        out_dir = base.contains("output") ? base["output"].value("directory", "out") : "out";
    std::string csv = fkc::run_sweep(base, out_dir);
    std::cout << "wrote " << csv << "\n";
    return 0;
}

int cmd_plots(const std::string& run_dir) {
    fkc::emit_plot_data(run_dir);
    std::cout << "wrote plot data under " << run_dir << "\n";
    return 0;
}

int cmd_validate(const std::string& config_path) {
    (void)fkc::load_config(config_path);
    std::cout << "ok: " << config_path << " validates\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feynman-Kac weighted SDE sampling harness"};
    app.require_subcommand(1);

    std::string config_path, out_dir, run_dir;
    int seeds = 1;
    bool dry_run = false;

    auto* run = app.add_subcommand("run", "run one experiment config");
    run->add_option("config", config_path, "experiment config (JSON)")->required();
    run->add_option("--seeds", seeds, "number of seeds (seed, seed+1, ...)")->default_val(1);
    run->add_flag("--dry-run", dry_run, "validate only, no simulation");
    run->add_option("--out", out_dir, "output directory override");

    auto* sweep = app.add_subcommand("sweep", "run the config's parameter grid");
    sweep->add_option("config", config_path, "experiment config with a sweep block")->required();
    sweep->add_option("--out", out_dir, "output directory override");

    auto* plots = app.add_subcommand("plots", "emit plot-ready data for a run directory");
    plots->add_option("dir", run_dir, "run directory containing report.json")->required();

    auto* validate = app.add_subcommand("validate", "validate a config file");
    validate->add_option("config", config_path, "experiment config (JSON)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, seeds, dry_run, out_dir);
        if (sweep->parsed()) return cmd_sweep(config_path, out_dir);
        if (plots->parsed()) return cmd_plots(run_dir);
        if (validate->parsed()) return cmd_validate(config_path);
    } catch (const fkc::ConfigError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const fkc::SimulationError& e) {
        std::cerr << "simulation failure: " << e.what() << "\n";
        return 3;
    } catch (const fkc::MissingDumpsError& e) {
        std::cerr << "missing dumps: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

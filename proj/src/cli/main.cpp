#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "bhc/linalg.hpp"
#include "config.hpp"
#include "run.hpp"

// Exit codes: 0 success, 1 config or usage error, 2 numeric failure,
// 3 tolerance violation in `compare`.
int main(int argc, char** argv) {
    CLI::App app{"Dissipative attractive Bose-Hubbard chains: master-equation and "
                 "trajectory simulations with analytic rate predictions"};
    app.fallthrough();
    app.require_subcommand(1);

    std::string config_path;
    bhc::cli::GlobalFlags flags;
    std::optional<std::uint64_t> seed;
    std::optional<int> n_traj;
    std::optional<int> postselect;

    app.add_option("--config", config_path, "experiment description (JSON)");
    app.add_option("--out", flags.out_dir, "output directory")->capture_default_str();
    app.add_option("--threads", flags.threads, "trajectory worker threads, 0 = all cores")
        ->capture_default_str();
    app.add_option("--seed", seed, "override evolution.seed");
    app.add_option("--trajectories", n_traj, "override evolution.n_traj");
    app.add_option("--postselect-N", postselect, "override evolution.postselect_N");

    auto* evolve =
        app.add_subcommand("evolve", "integrate the configured system and write time series");
    auto* predict = app.add_subcommand("predict", "write analytic rate and population tables");
    auto* compare =
        app.add_subcommand("compare", "run numerics against predictions and score them");
    app.add_subcommand("basis", "print the sector and manifold inventory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (config_path.empty()) throw bhc::cli::ConfigError("--config is required");
        const bhc::cli::Overrides ov{seed, n_traj, postselect};
        const auto cfg = bhc::cli::load_config(config_path, ov);
        if (evolve->parsed()) return bhc::cli::run_evolve(cfg, flags);
        if (predict->parsed()) return bhc::cli::run_predict(cfg, flags);
        if (compare->parsed()) return bhc::cli::run_compare(cfg, flags);
        return bhc::cli::run_basis(cfg);
    } catch (const bhc::cli::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const bhc::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

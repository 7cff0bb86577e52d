#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bhc/fock.hpp"
#include "bhc/liouville.hpp"
#include "bhc/observables.hpp"
#include "bhc/params.hpp"

namespace bhc::cli {

inline constexpr const char* kVersion = "0.1.0";

// Config file or command-line problems; always maps to exit code 1 with the
// offending field in the message.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StateComponent {
    FockState state;
    std::complex<double> weight;
};

enum class RunMethod { master, trajectories };

struct EvolutionSettings {
    bool present = false;
    RunMethod method = RunMethod::master;
    MasterMethod master_method = MasterMethod::automatic;
    double t_max_us = 0.0;
    int n_points = 101;
    int n_traj = 4000;
    std::uint64_t seed = 0;
    std::optional<int> postselect_N;
    double split_dt_us = 5e-4;
    double rtol = 1e-8;
    double atol = 1e-10;
};

struct CompareSettings {
    double tol_sector = 1e-6;
    double tol_manifold = 0.05;
    double z_max = 3.0;
    double min_fraction = 0.99;
};

// Command-line overrides folded into the config before the manifest is
// rendered, so the manifest always shows what actually ran.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> n_traj;
    std::optional<int> postselect_N;
};

struct ExperimentConfig {
    int L = 0;
    int d_max = 0;
    ModelParams params;  // rad/us

    // Input-unit copies (f/2pi), kept so the manifest echoes what was
    // entered rather than a converted-back approximation.
    std::vector<double> omega_MHz, U_MHz, J_MHz, gamma_kHz, kappa_kHz;

    std::vector<StateComponent> initial;  // weights normalized
    int N_max = 0;                        // largest component boson number
    std::optional<int> definite_N;        // set when every component shares N

    EvolutionSettings evolution;
    std::vector<ObservableRequest> observables;

    std::string output_path;  // empty: per-command default file name
    std::string output_format = "csv";
    bool jump_log = false;

    CompareSettings compare;

    // Resolved-parameter manifest (chain, params in input units, initial
    // state, evolution, observables). Deliberately excludes thread count
    // and output locations so identical physics gives identical bytes.
    nlohmann::json manifest() const;

    std::vector<double> time_grid() const;  // requires evolution.present
    void require_evolution() const;
    void require_definite_sector(const char* why) const;
};

ExperimentConfig load_config(const std::string& path, const Overrides& ov = {});

}  // namespace bhc::cli

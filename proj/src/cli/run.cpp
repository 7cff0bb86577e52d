#include "run.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "bhc/density.hpp"
#include "bhc/liouville.hpp"
#include "bhc/observables.hpp"
#include "bhc/operators.hpp"
#include "bhc/predictors.hpp"
#include "bhc/trajectory.hpp"

namespace bhc::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Shortest round-trip decimal form; identical bytes on every run.
std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string csv_safe(std::string text) {
    std::replace(text.begin(), text.end(), ',', ';');
    std::replace(text.begin(), text.end(), '\n', ' ');
    return text;
}

void write_manifest_block(std::ostream& os, const json& m) {
    std::istringstream lines(m.dump(2));
    std::string line;
    while (std::getline(lines, line)) os << "# " << line << "\n";
}

fs::path resolve_out(const GlobalFlags& g, const std::string& name) {
    fs::path p = fs::path(g.out_dir) / name;
    if (!p.parent_path().empty()) fs::create_directories(p.parent_path());
    return p;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw ConfigError("cannot write \"" + p.string() + "\"");
    return os;
}

std::string stem_of(const fs::path& p) {
    fs::path q = p;
    q.replace_extension();
    return q.string();
}

void require_untruncated(const ExperimentConfig& cfg) {
    if (cfg.d_max < cfg.N_max)
        throw ConfigError("chain.d_max: dynamics run in exact number sectors, so d_max must "
                          "cover the initial boson number N = " +
                          std::to_string(cfg.N_max));
}

bool is_uniform(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

bool any_positive(const std::vector<double>& v) {
    return std::any_of(v.begin(), v.end(), [](double x) { return x > 0.0; });
}

Eigen::VectorXcd global_vector(const ExperimentConfig& cfg, const FockSpace& sp) {
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(sp.dim());
    for (const auto& c : cfg.initial) {
        const int i = sp.global_index(c.state);
        if (i < 0)
            throw ConfigError("initial_state: \"" + c.state.shorthand() +
                              "\" is not in the simulated space");
        psi(i) += c.weight;
    }
    return psi;
}

Eigen::VectorXcd sector_vector(const ExperimentConfig& cfg, const SectorBasis& basis) {
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(basis.dim());
    for (const auto& c : cfg.initial) {
        const int i = basis.find(c.state);
        if (i < 0)
            throw ConfigError("initial_state: \"" + c.state.shorthand() +
                              "\" is not in the sector basis");
        psi(i) += c.weight;
    }
    return psi;
}

MasterOptions master_options(const ExperimentConfig& cfg) {
    MasterOptions mo;
    mo.method = cfg.evolution.master_method;
    mo.split_dt = cfg.evolution.split_dt_us;
    mo.rtol = cfg.evolution.rtol;
    mo.atol = cfg.evolution.atol;
    return mo;
}

EnsembleOptions ensemble_options(const ExperimentConfig& cfg, const GlobalFlags& g) {
    EnsembleOptions eo;
    eo.n_traj = cfg.evolution.n_traj;
    eo.seed = cfg.evolution.seed;
    eo.threads = g.threads;
    eo.postselect_N = cfg.evolution.postselect_N;
    return eo;
}

// Ensemble row: every configured observable of the pure trajectory state.
std::function<Eigen::VectorXd(const TrajectoryState&)> make_row(const ExperimentConfig& cfg,
                                                                const FockSpace& space) {
    return [&cfg, &space](const TrajectoryState& s) {
        const int k = space.sector_of(s.current_N);
        Eigen::VectorXd v(static_cast<int>(cfg.observables.size()));
        for (int i = 0; i < v.size(); ++i) v(i) = evaluate(cfg.observables[i], space, k, s.psi);
        return v;
    };
}

void write_manifest_file(const fs::path& csv_path, const json& manifest) {
    auto os = open_out(stem_of(csv_path) + ".manifest.json");
    os << manifest.dump(2) << "\n";
}

void write_jump_log(const fs::path& path, const json& manifest,
                    const std::vector<std::vector<JumpEvent>>& logs) {
    auto os = open_out(path);
    write_manifest_block(os, manifest);
    os << "trajectory,t_us,kind,site\n";
    for (size_t j = 0; j < logs.size(); ++j)
        for (const JumpEvent& ev : logs[j])
            os << j << ',' << fmt(ev.t) << ','
               << (ev.kind == JumpKind::dissipation ? "dissipation" : "dephasing") << ','
               << ev.site << "\n";
}

}  // namespace

int run_evolve(const ExperimentConfig& cfg, const GlobalFlags& g) {
    cfg.require_evolution();
    require_untruncated(cfg);
    const auto grid = cfg.time_grid();
    json manifest = cfg.manifest();
    manifest["command"] = "evolve";

    const fs::path path =
        resolve_out(g, cfg.output_path.empty() ? "evolve.csv" : cfg.output_path);
    auto os = open_out(path);
    write_manifest_block(os, manifest);

    const FockSpace space = build_fock_space(cfg.L, cfg.N_max);

    if (cfg.evolution.method == RunMethod::master) {
        os << "t_us";
        for (const auto& req : cfg.observables) os << ',' << req.name();
        os << "\n";
        const DensityMatrix rho0 = DensityMatrix::pure(space, global_vector(cfg, space));
        evolve_master(rho0, grid, build_hamiltonian(cfg.params, space),
                      build_jumps(cfg.params, space), master_options(cfg),
                      [&](int gi, const DensityMatrix& rho) {
                          os << fmt(grid[gi]);
                          for (const auto& req : cfg.observables)
                              os << ',' << fmt(evaluate(req, rho));
                          os << "\n";
                      });
    } else {
        cfg.require_definite_sector("the trajectory unraveling");
        os << "t_us";
        for (const auto& req : cfg.observables)
            os << ',' << req.name() << ',' << req.name() << "_se";
        os << ",surviving_fraction\n";

        const TrajectoryEngine eng(cfg.params, space);
        const auto& basis = space.sector(space.sector_of(*cfg.definite_N));
        Eigen::VectorXcd psi = sector_vector(cfg, basis);
        const TrajectoryState init = trajectory_from_vector(space, *cfg.definite_N, psi);
        EnsembleOptions eo = ensemble_options(cfg, g);
        eo.collect_jumps = cfg.jump_log;
        const auto row = make_row(cfg, space);
        const EnsembleResult res =
            run_ensemble(eng, init, grid, static_cast<int>(cfg.observables.size()), row, eo);

        for (int gi = 0; gi < static_cast<int>(grid.size()); ++gi) {
            os << fmt(grid[gi]);
            for (int i = 0; i < res.mean.cols(); ++i)
                os << ',' << fmt(res.mean(gi, i)) << ',' << fmt(res.std_error(gi, i));
            os << ',' << fmt(res.surviving_fraction[gi]) << "\n";
        }
        if (cfg.jump_log)
            write_jump_log(stem_of(path) + "_jumps.csv", manifest, res.jump_logs);
    }

    write_manifest_file(path, manifest);
    return 0;
}

int run_predict(const ExperimentConfig& cfg, const GlobalFlags& g) {
    cfg.require_evolution();
    require_untruncated(cfg);
    const auto grid = cfg.time_grid();
    json manifest = cfg.manifest();
    manifest["command"] = "predict";

    const fs::path base =
        resolve_out(g, cfg.output_path.empty() ? "predict.csv" : cfg.output_path);
    const std::string stem = stem_of(base);
    const auto& p = cfg.params;
    const bool uniform_JU = is_uniform(p.U) && is_uniform(p.J) && !p.J.empty();
    const bool uniform_kappa = is_uniform(p.kappa);

    // Scalar rates: effective frequencies, closed-form manifold transitions,
    // decoherence rates of every requested coherence pair.
    {
        auto os = open_out(stem + "_rates.csv");
        write_manifest_block(os, manifest);
        os << "name,value_per_us,valid,reason\n";
        const auto row = [&os](const std::string& name, std::optional<double> value,
                               const std::string& reason) {
            os << name << ',' << (value ? fmt(*value) : "") << ',' << (value ? "yes" : "no")
               << ',' << csv_safe(reason) << "\n";
        };

        std::string blocker;
        if (!cfg.definite_N)
            blocker = "initial state spans several number sectors";
        else if (!uniform_JU)
            blocker = "closed forms need uniform J and U";
        if (blocker.empty()) {
            const int N = *cfg.definite_N;
            try {
                const auto f = effective_frequencies(N, p.J[0], p.U[0]);
                row("J_stack", f.J_stack, "");
                row("Xi", f.Xi, "");
            } catch (const std::invalid_argument& e) {
                row("J_stack", std::nullopt, e.what());
                row("Xi", std::nullopt, e.what());
            }
            const std::pair<RateKind, const char*> kinds[] = {
                {RateKind::stack_shed, "stack_shed"},
                {RateKind::stack_heal, "stack_heal"},
                {RateKind::pair_formation, "pair_formation"},
                {RateKind::second_shed, "second_shed"},
                {RateKind::hardcore_leak, "hardcore_leak"},
            };
            for (const auto& [kind, name] : kinds) {
                if (!uniform_kappa) {
                    row(name, std::nullopt, "closed forms need uniform kappa");
                    continue;
                }
                try {
                    row(name, manifold_rate_closed(kind, cfg.L, N, p.J[0], p.U[0], p.kappa[0]),
                        "");
                } catch (const std::invalid_argument& e) {
                    std::string reason = e.what();
                    if (kind == RateKind::pair_formation && N == 3)
                        reason += "; the transition-rate table carries the general value";
                    row(name, std::nullopt, reason);
                }
            }
        } else {
            for (const char* name :
                 {"J_stack", "Xi", "stack_shed", "stack_heal", "pair_formation", "second_shed",
                  "hardcore_leak"})
                row(name, std::nullopt, blocker);
        }

        for (const auto& req : cfg.observables) {
            if (req.kind != ObservableRequest::Kind::coherence) continue;
            const std::string pair = req.ket.digits() + "_" + req.bra.digits();
            row("K_gamma_" + pair, dissipative_decoherence_rate(req.ket, req.bra, p.gamma), "");
            row("K_kappa_" + pair, dephasing_decoherence_rate(req.ket, req.bra, p.kappa), "");
        }
    }

    // Golden-rule transition matrix of the initial sector.
    {
        auto os = open_out(stem + "_transition_rates.csv");
        write_manifest_block(os, manifest);
        os << "a_from,a_to,states_from,states_to,rate_per_us\n";
        if (!cfg.definite_N) {
            os << "# not applicable: initial state spans several number sectors\n";
        } else if (!is_uniform(p.U)) {
            os << "# not applicable: the golden-rule gap U(a-b) needs uniform U\n";
        } else {
            const SectorBasis basis = build_sector_basis(cfg.L, *cfg.definite_N, *cfg.definite_N);
            const RateMatrix rm =
                rate_matrix_from_basis(basis, build_hopping(p, basis), p.kappa, p.U[0]);
            const int n = static_cast<int>(rm.labels.size());
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    if (i == j || rm.gamma(i, j) == 0.0) continue;  // zero rate: no transition
                    os << rm.labels[i] << ',' << rm.labels[j] << ',' << rm.dims[i] << ','
                       << rm.dims[j] << ',' << fmt(rm.gamma(i, j)) << "\n";
                }
        }
    }

    // Sector-population forecast under uniform loss.
    {
        auto os = open_out(stem + "_sector_populations.csv");
        write_manifest_block(os, manifest);
        if (!cfg.definite_N) {
            os << "t_us\n# not applicable: initial state spans several number sectors\n";
        } else if (!is_uniform(p.gamma)) {
            os << "t_us\n# not applicable: the binomial cascade law needs uniform gamma\n";
        } else {
            const int N = *cfg.definite_N;
            const PopulationSeries series = sector_populations(N, p.gamma[0], grid);
            os << "t_us";
            for (int k = 0; k <= N; ++k) os << ",P_N" << k;
            os << "\n";
            for (size_t ti = 0; ti < grid.size(); ++ti) {
                os << fmt(grid[ti]);
                for (int k = 0; k <= N; ++k)
                    os << ',' << fmt(series.P(static_cast<int>(ti), series.label_index(k)));
                os << "\n";
            }
        }
    }

    // Manifold-population forecast from the rate equations.
    {
        auto os = open_out(stem + "_manifold_populations.csv");
        write_manifest_block(os, manifest);
        if (!cfg.definite_N) {
            os << "t_us\n# not applicable: initial state spans several number sectors\n";
        } else if (!is_uniform(p.U)) {
            os << "t_us\n# not applicable: the golden-rule gap U(a-b) needs uniform U\n";
        } else {
            const SectorBasis basis = build_sector_basis(cfg.L, *cfg.definite_N, *cfg.definite_N);
            const RateMatrix rm =
                rate_matrix_from_basis(basis, build_hopping(p, basis), p.kappa, p.U[0]);
            const Eigen::VectorXcd psi = sector_vector(cfg, basis);
            const auto pops = manifold_populations(basis, psi);
            std::vector<double> P0;
            P0.reserve(rm.labels.size());
            for (int label : rm.labels) P0.push_back(pops.at(label));
            const PopulationSeries series = solve_rate_equations(rm, P0, grid);
            os << "t_us";
            for (int label : rm.labels) os << ",P_a" << label;
            os << "\n";
            for (size_t ti = 0; ti < grid.size(); ++ti) {
                os << fmt(grid[ti]);
                for (size_t k = 0; k < rm.labels.size(); ++k)
                    os << ','
                       << fmt(series.P(static_cast<int>(ti),
                                       series.label_index(rm.labels[k])));
                os << "\n";
            }
        }
    }

    write_manifest_file(base, manifest);
    return 0;
}

int run_compare(const ExperimentConfig& cfg, const GlobalFlags& g) {
    cfg.require_evolution();
    require_untruncated(cfg);
    const auto grid = cfg.time_grid();
    const int n_t = static_cast<int>(grid.size());
    json manifest = cfg.manifest();
    manifest["command"] = "compare";

    const fs::path base =
        resolve_out(g, cfg.output_path.empty() ? "compare.csv" : cfg.output_path);
    const std::string stem = stem_of(base);
    const auto& p = cfg.params;
    const FockSpace space = build_fock_space(cfg.L, cfg.N_max);

    // One master run collects everything every check needs.
    const int n_obs = static_cast<int>(cfg.observables.size());
    Eigen::MatrixXd master_obs(n_t, n_obs);
    std::vector<std::vector<double>> master_sector(static_cast<size_t>(n_t));
    std::vector<std::map<int, double>> master_manifold(static_cast<size_t>(n_t));
    {
        const DensityMatrix rho0 = DensityMatrix::pure(space, global_vector(cfg, space));
        evolve_master(rho0, grid, build_hamiltonian(p, space), build_jumps(p, space),
                      master_options(cfg), [&](int gi, const DensityMatrix& rho) {
                          for (int i = 0; i < n_obs; ++i)
                              master_obs(gi, i) = evaluate(cfg.observables[i], rho);
                          master_sector[static_cast<size_t>(gi)] = sector_populations(rho);
                          master_manifold[static_cast<size_t>(gi)] = manifold_populations(rho);
                      });
    }

    json checks = json::array();
    bool all_pass = true;
    const auto skip = [&](const char* name, const std::string& reason) {
        checks.push_back({{"name", name}, {"applicable", false}, {"reason", reason}});
        std::cout << name << ": skipped (" << reason << ")\n";
    };
    const auto verdict = [&](const char* name, bool pass, json detail) {
        detail["name"] = name;
        detail["applicable"] = true;
        detail["pass"] = pass;
        checks.push_back(std::move(detail));
        all_pass = all_pass && pass;
        std::cout << name << ": " << (pass ? "pass" : "FAIL") << "\n";
    };

    // Sector populations against the binomial cascade law.
    if (!cfg.definite_N) {
        skip("sector_vs_binomial", "initial state spans several number sectors");
    } else if (!any_positive(p.gamma)) {
        skip("sector_vs_binomial", "no dissipation configured");
    } else if (!is_uniform(p.gamma)) {
        skip("sector_vs_binomial", "the binomial cascade law needs uniform gamma");
    } else {
        const int N = *cfg.definite_N;
        const PopulationSeries ref = sector_populations(N, p.gamma[0], grid);
        double max_dev = 0.0;
        auto os = open_out(stem + "_sector_check.csv");
        write_manifest_block(os, manifest);
        os << "t_us";
        for (int k = 0; k <= N; ++k) os << ",P_N" << k << "_numeric,P_N" << k << "_analytic";
        os << "\n";
        for (int gi = 0; gi < n_t; ++gi) {
            os << fmt(grid[gi]);
            for (int k = 0; k <= N; ++k) {
                const double num = master_sector[static_cast<size_t>(gi)][static_cast<size_t>(k)];
                const double ana = ref.P(gi, ref.label_index(k));
                max_dev = std::max(max_dev, std::abs(num - ana));
                os << ',' << fmt(num) << ',' << fmt(ana);
            }
            os << "\n";
        }
        verdict("sector_vs_binomial", max_dev <= cfg.compare.tol_sector,
                {{"max_abs_deviation", max_dev}, {"tolerance", cfg.compare.tol_sector}});
    }

    // Manifold populations against the golden-rule rate equations.
    if (!cfg.definite_N) {
        skip("manifold_vs_rates", "initial state spans several number sectors");
    } else if (any_positive(p.gamma)) {
        skip("manifold_vs_rates", "rate equations describe a fixed number sector; set gamma = 0");
    } else if (!any_positive(p.kappa)) {
        skip("manifold_vs_rates", "no dephasing configured");
    } else if (!is_uniform(p.U)) {
        skip("manifold_vs_rates", "the golden-rule gap U(a-b) needs uniform U");
    } else {
        const int N = *cfg.definite_N;
        const SectorBasis basis = build_sector_basis(cfg.L, N, N);
        const RateMatrix rm =
            rate_matrix_from_basis(basis, build_hopping(p, basis), p.kappa, p.U[0]);
        const auto pops0 = manifold_populations(basis, sector_vector(cfg, basis));
        std::vector<double> P0;
        for (int label : rm.labels) P0.push_back(pops0.at(label));
        const PopulationSeries ref = solve_rate_equations(rm, P0, grid);
        double max_dev = 0.0;
        auto os = open_out(stem + "_manifold_check.csv");
        write_manifest_block(os, manifest);
        os << "t_us";
        for (int label : rm.labels) os << ",P_a" << label << "_numeric,P_a" << label << "_rate_eq";
        os << "\n";
        for (int gi = 0; gi < n_t; ++gi) {
            os << fmt(grid[gi]);
            for (size_t k = 0; k < rm.labels.size(); ++k) {
                const double num = master_manifold[static_cast<size_t>(gi)].at(rm.labels[k]);
                const double ana = ref.P(gi, ref.label_index(rm.labels[k]));
                max_dev = std::max(max_dev, std::abs(num - ana));
                os << ',' << fmt(num) << ',' << fmt(ana);
            }
            os << "\n";
        }
        verdict("manifold_vs_rates", max_dev <= cfg.compare.tol_manifold,
                {{"max_abs_deviation", max_dev}, {"tolerance", cfg.compare.tol_manifold}});
    }

    // Trajectory ensemble against the master equation, z-scored per point.
    std::vector<int> linear;
    for (int i = 0; i < n_obs; ++i) {
        const auto kind = cfg.observables[static_cast<size_t>(i)].kind;
        if (kind == ObservableRequest::Kind::occupation ||
            kind == ObservableRequest::Kind::sector_population ||
            kind == ObservableRequest::Kind::manifold_population)
            linear.push_back(i);
    }
    if (cfg.evolution.method != RunMethod::trajectories) {
        skip("trajectory_vs_master", "evolution.method is master; no ensemble requested");
    } else if (cfg.evolution.postselect_N) {
        skip("trajectory_vs_master", "postselected ensembles are conditioned; the master "
                                     "equation is not");
    } else if (linear.empty()) {
        skip("trajectory_vs_master",
             "no observable linear in the state requested (purity and coherences are "
             "nonlinear in the trajectory average)");
    } else {
        cfg.require_definite_sector("the trajectory unraveling");
        const TrajectoryEngine eng(p, space);
        const auto& basis = space.sector(space.sector_of(*cfg.definite_N));
        const TrajectoryState init =
            trajectory_from_vector(space, *cfg.definite_N, sector_vector(cfg, basis));
        const EnsembleResult res = run_ensemble(eng, init, grid, n_obs, make_row(cfg, space),
                                                ensemble_options(cfg, g));
        int within = 0, total = 0;
        double max_z = 0.0;
        for (int gi = 0; gi < n_t; ++gi)
            for (int i : linear) {
                const double diff = std::abs(res.mean(gi, i) - master_obs(gi, i));
                const double se = res.std_error(gi, i);
                ++total;
                if (diff <= cfg.compare.z_max * (std::isnan(se) ? 0.0 : se) + 1e-9) ++within;
                if (se > 0.0) max_z = std::max(max_z, diff / se);
            }
        auto os = open_out(stem + "_trajectory_check.csv");
        write_manifest_block(os, manifest);
        os << "t_us";
        for (int i : linear) {
            const std::string n = cfg.observables[static_cast<size_t>(i)].name();
            os << ',' << n << "_traj," << n << "_se," << n << "_master";
        }
        os << "\n";
        for (int gi = 0; gi < n_t; ++gi) {
            os << fmt(grid[gi]);
            for (int i : linear)
                os << ',' << fmt(res.mean(gi, i)) << ',' << fmt(res.std_error(gi, i)) << ','
                   << fmt(master_obs(gi, i));
            os << "\n";
        }
        const double fraction = static_cast<double>(within) / total;
        verdict("trajectory_vs_master", fraction >= cfg.compare.min_fraction,
                {{"fraction_within", fraction},
                 {"min_fraction", cfg.compare.min_fraction},
                 {"z_max", cfg.compare.z_max},
                 {"largest_z", max_z},
                 {"n_traj", cfg.evolution.n_traj}});
    }

    json summary;
    summary["manifest"] = manifest;
    summary["checks"] = std::move(checks);
    summary["pass"] = all_pass;
    {
        auto os = open_out(stem + "_summary.json");
        os << summary.dump(2) << "\n";
    }
    std::cout << (all_pass ? "compare: PASS" : "compare: FAIL") << "\n";
    return all_pass ? 0 : 3;
}

int run_basis(const ExperimentConfig& cfg) {
    json manifest = cfg.manifest();
    manifest["command"] = "basis";
    write_manifest_block(std::cout, manifest);
    std::cout << "N,dim,a,states\n";
    for (int N = 0; N <= cfg.N_max; ++N) {
        if (N > cfg.L * cfg.d_max) break;  // nothing can hold that many bosons
        const SectorBasis basis = build_sector_basis(cfg.L, N, cfg.d_max);
        std::map<int, int> counts;
        for (const auto& s : basis.states) counts[s.anharmonicity()] += 1;
        for (auto it = counts.rbegin(); it != counts.rend(); ++it)
            std::cout << N << ',' << basis.dim() << ',' << it->first << ',' << it->second
                      << "\n";
    }
    return 0;
}

}  // namespace bhc::cli

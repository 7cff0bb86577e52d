#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

namespace bhc::cli {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> ok) {
    for (const auto& item : obj.items()) {
        if (std::find_if(ok.begin(), ok.end(),
                         [&](const char* k) { return item.key() == k; }) == ok.end())
            fail(where, "unknown key \"" + item.key() + "\"");
    }
}

const json& require(const json& obj, const std::string& where, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end()) fail(where + "." + key, "required");
    return *it;
}

double get_number(const json& j, const std::string& where) {
    if (!j.is_number()) fail(where, "expected a number");
    return j.get<double>();
}

int get_int(const json& j, const std::string& where) {
    if (!j.is_number_integer()) fail(where, "expected an integer");
    return j.get<int>();
}

std::string get_string(const json& j, const std::string& where) {
    if (!j.is_string()) fail(where, "expected a string");
    return j.get<std::string>();
}

// Scalar broadcast or an explicit per-entry list.
std::vector<double> number_list(const json& j, const std::string& where, int n) {
    if (j.is_number()) return std::vector<double>(static_cast<size_t>(n), j.get<double>());
    if (j.is_array()) {
        if (static_cast<int>(j.size()) != n)
            fail(where, "expected " + std::to_string(n) + " entries, got " +
                            std::to_string(j.size()));
        std::vector<double> v;
        v.reserve(j.size());
        for (size_t i = 0; i < j.size(); ++i)
            v.push_back(get_number(j[i], where + "[" + std::to_string(i) + "]"));
        return v;
    }
    fail(where, "expected a number or a list of " + std::to_string(n) + " numbers");
}

FockState parse_state(const std::string& text, int L, const std::string& where) {
    try {
        const bool digits = !text.empty() && static_cast<int>(text.size()) == L &&
                            std::all_of(text.begin(), text.end(),
                                        [](unsigned char c) { return std::isdigit(c); });
        return digits ? fock_from_digits(text) : fock_from_shorthand(text, L);
    } catch (const std::exception& e) {
        fail(where, std::string("bad state \"") + text + "\": " + e.what());
    }
}

std::complex<double> parse_weight(const json& j, const std::string& where) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2)
        return {get_number(j[0], where + "[0]"), get_number(j[1], where + "[1]")};
    fail(where, "expected a number or [re, im]");
}

std::uint64_t get_seed(const json& j, const std::string& where) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer() && j.get<std::int64_t>() >= 0)
        return static_cast<std::uint64_t>(j.get<std::int64_t>());
    fail(where, "expected a nonnegative integer");
}

const char* method_name(RunMethod m) {
    return m == RunMethod::master ? "master" : "trajectories";
}

const char* master_method_name(MasterMethod m) {
    switch (m) {
        case MasterMethod::automatic: return "automatic";
        case MasterMethod::rk45: return "rk45";
        case MasterMethod::expm: return "expm";
        case MasterMethod::split: return "split";
    }
    return "automatic";
}

}  // namespace

ExperimentConfig load_config(const std::string& path, const Overrides& ov) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file \"" + path + "\"");
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    if (!root.is_object()) throw ConfigError(path + ": top level must be an object");
    check_keys(root, "config",
               {"chain", "params", "initial_state", "evolution", "observables", "output",
                "compare"});

    ExperimentConfig cfg;

    // chain
    {
        const json& chain = require(root, "config", "chain");
        if (!chain.is_object()) fail("chain", "expected an object");
        check_keys(chain, "chain", {"L", "d_max"});
        cfg.L = get_int(require(chain, "chain", "L"), "chain.L");
        cfg.d_max = get_int(require(chain, "chain", "d_max"), "chain.d_max");
        if (cfg.L < 1) fail("chain.L", "must be at least 1");
        if (cfg.d_max < 1) fail("chain.d_max", "must be at least 1");
    }

    // params: frequencies are quoted as f/2pi with the unit in the key name.
    {
        const json& pj = require(root, "config", "params");
        if (!pj.is_object()) fail("params", "expected an object");
        check_keys(pj, "params",
                   {"omega_over_2pi_MHz", "U_over_2pi_MHz", "J_over_2pi_MHz",
                    "gamma_over_2pi_kHz", "kappa_over_2pi_kHz", "rotating_frame",
                    "dephasing_model"});
        const auto site_MHz = [&](const char* key, bool required,
                                  double fallback) -> std::vector<double> {
            const auto it = pj.find(key);
            if (it == pj.end()) {
                if (required) fail(std::string("params.") + key, "required");
                return std::vector<double>(static_cast<size_t>(cfg.L), fallback);
            }
            return number_list(*it, std::string("params.") + key, cfg.L);
        };
        cfg.omega_MHz = site_MHz("omega_over_2pi_MHz", false, 0.0);
        cfg.U_MHz = site_MHz("U_over_2pi_MHz", true, 0.0);
        cfg.gamma_kHz = site_MHz("gamma_over_2pi_kHz", false, 0.0);
        cfg.kappa_kHz = site_MHz("kappa_over_2pi_kHz", false, 0.0);
        const auto& omega_MHz = cfg.omega_MHz;
        const auto& U_MHz = cfg.U_MHz;
        const auto& gamma_kHz = cfg.gamma_kHz;
        const auto& kappa_kHz = cfg.kappa_kHz;

        cfg.J_MHz.assign(static_cast<size_t>(cfg.L > 0 ? cfg.L - 1 : 0), 0.0);
        if (const auto it = pj.find("J_over_2pi_MHz"); it != pj.end()) {
            if (cfg.L == 1) {
                const bool harmless = (it->is_array() && it->empty()) ||
                                      (it->is_number() && it->get<double>() == 0.0);
                if (!harmless) fail("params.J_over_2pi_MHz", "a single site has no bonds");
            } else {
                cfg.J_MHz = number_list(*it, "params.J_over_2pi_MHz", cfg.L - 1);
            }
        } else if (cfg.L > 1) {
            fail("params.J_over_2pi_MHz", "required");
        }
        const auto& J_MHz = cfg.J_MHz;

        cfg.params.omega.resize(omega_MHz.size());
        cfg.params.U.resize(U_MHz.size());
        cfg.params.J.resize(J_MHz.size());
        cfg.params.gamma.resize(gamma_kHz.size());
        cfg.params.kappa.resize(kappa_kHz.size());
        std::transform(omega_MHz.begin(), omega_MHz.end(), cfg.params.omega.begin(),
                       rad_per_us_from_MHz);
        std::transform(U_MHz.begin(), U_MHz.end(), cfg.params.U.begin(), rad_per_us_from_MHz);
        std::transform(J_MHz.begin(), J_MHz.end(), cfg.params.J.begin(), rad_per_us_from_MHz);
        std::transform(gamma_kHz.begin(), gamma_kHz.end(), cfg.params.gamma.begin(),
                       rad_per_us_from_kHz);
        std::transform(kappa_kHz.begin(), kappa_kHz.end(), cfg.params.kappa.begin(),
                       rad_per_us_from_kHz);

        if (const auto it = pj.find("rotating_frame"); it != pj.end()) {
            if (!it->is_boolean()) fail("params.rotating_frame", "expected a boolean");
            cfg.params.rotating_frame = it->get<bool>();
        }
        if (const auto it = pj.find("dephasing_model"); it != pj.end()) {
            if (it->is_string()) {
                if (it->get<std::string>() != "number")
                    fail("params.dephasing_model", "expected \"number\" or {\"exponential\": ...}");
            } else if (it->is_object()) {
                check_keys(*it, "params.dephasing_model", {"exponential"});
                const json& ej = require(*it, "params.dephasing_model", "exponential");
                if (!ej.is_object()) fail("params.dephasing_model.exponential", "expected an object");
                check_keys(ej, "params.dephasing_model.exponential", {"a"});
                cfg.params.dephasing.exponential = true;
                cfg.params.dephasing.a =
                    number_list(require(ej, "params.dephasing_model.exponential", "a"),
                                "params.dephasing_model.exponential.a", cfg.L);
            } else {
                fail("params.dephasing_model", "expected \"number\" or {\"exponential\": ...}");
            }
        }
        try {
            cfg.params.validate();
        } catch (const std::exception& e) {
            fail("params", e.what());
        }
    }

    // initial_state
    {
        const json& sj = require(root, "config", "initial_state");
        if (sj.is_string()) {
            cfg.initial.push_back(
                {parse_state(sj.get<std::string>(), cfg.L, "initial_state"), {1.0, 0.0}});
        } else if (sj.is_object()) {
            check_keys(sj, "initial_state", {"superposition"});
            const json& arr = require(sj, "initial_state", "superposition");
            if (!arr.is_array() || arr.empty())
                fail("initial_state.superposition", "expected a nonempty list");
            for (size_t i = 0; i < arr.size(); ++i) {
                const std::string where =
                    "initial_state.superposition[" + std::to_string(i) + "]";
                const json& cj = arr[i];
                if (!cj.is_object()) fail(where, "expected an object");
                check_keys(cj, where, {"state", "weight"});
                StateComponent c;
                c.state = parse_state(get_string(require(cj, where, "state"), where + ".state"),
                                      cfg.L, where + ".state");
                c.weight = {1.0, 0.0};
                if (const auto it = cj.find("weight"); it != cj.end())
                    c.weight = parse_weight(*it, where + ".weight");
                cfg.initial.push_back(std::move(c));
            }
        } else {
            fail("initial_state", "expected a state string or a superposition object");
        }

        double nrm2 = 0.0;
        for (size_t i = 0; i < cfg.initial.size(); ++i) {
            const auto& c = cfg.initial[i];
            for (int l = 0; l < cfg.L; ++l)
                if (c.state.n[l] > cfg.d_max)
                    fail("initial_state", "site " + std::to_string(l + 1) + " holds " +
                                              std::to_string(c.state.n[l]) +
                                              " bosons, above chain.d_max");
            for (size_t k = 0; k < i; ++k)
                if (cfg.initial[k].state == c.state)
                    fail("initial_state", "state \"" + c.state.shorthand() + "\" listed twice");
            nrm2 += std::norm(c.weight);
        }
        if (nrm2 <= 0.0) fail("initial_state", "weights sum to zero");
        const double scale = 1.0 / std::sqrt(nrm2);
        for (auto& c : cfg.initial) c.weight *= scale;

        cfg.N_max = 0;
        cfg.definite_N = cfg.initial.front().state.total();
        for (const auto& c : cfg.initial) {
            const int N = c.state.total();
            cfg.N_max = std::max(cfg.N_max, N);
            if (cfg.definite_N && *cfg.definite_N != N) cfg.definite_N.reset();
        }
    }

    // evolution
    if (const auto it = root.find("evolution"); it != root.end()) {
        const json& ej = *it;
        if (!ej.is_object()) fail("evolution", "expected an object");
        check_keys(ej, "evolution",
                   {"method", "master_method", "t_max_us", "n_points", "n_traj", "seed",
                    "postselect_N", "split_dt_us", "rtol", "atol"});
        auto& ev = cfg.evolution;
        ev.present = true;
        if (const auto m = ej.find("method"); m != ej.end()) {
            const std::string s = get_string(*m, "evolution.method");
            if (s == "master")
                ev.method = RunMethod::master;
            else if (s == "trajectories")
                ev.method = RunMethod::trajectories;
            else
                fail("evolution.method", "expected \"master\" or \"trajectories\"");
        }
        if (const auto m = ej.find("master_method"); m != ej.end()) {
            const std::string s = get_string(*m, "evolution.master_method");
            if (s == "automatic" || s == "auto")
                ev.master_method = MasterMethod::automatic;
            else if (s == "expm")
                ev.master_method = MasterMethod::expm;
            else if (s == "rk45")
                ev.master_method = MasterMethod::rk45;
            else if (s == "split")
                ev.master_method = MasterMethod::split;
            else
                fail("evolution.master_method", "expected automatic, expm, rk45 or split");
        }
        ev.t_max_us = get_number(require(ej, "evolution", "t_max_us"), "evolution.t_max_us");
        if (!(ev.t_max_us > 0.0)) fail("evolution.t_max_us", "must be positive");
        if (const auto m = ej.find("n_points"); m != ej.end())
            ev.n_points = get_int(*m, "evolution.n_points");
        if (ev.n_points < 2) fail("evolution.n_points", "need at least 2 grid points");
        if (const auto m = ej.find("n_traj"); m != ej.end())
            ev.n_traj = get_int(*m, "evolution.n_traj");
        if (ev.n_traj < 1) fail("evolution.n_traj", "must be positive");
        if (const auto m = ej.find("seed"); m != ej.end())
            ev.seed = get_seed(*m, "evolution.seed");
        if (const auto m = ej.find("postselect_N"); m != ej.end())
            ev.postselect_N = get_int(*m, "evolution.postselect_N");
        if (const auto m = ej.find("split_dt_us"); m != ej.end()) {
            ev.split_dt_us = get_number(*m, "evolution.split_dt_us");
            if (!(ev.split_dt_us > 0.0)) fail("evolution.split_dt_us", "must be positive");
        }
        if (const auto m = ej.find("rtol"); m != ej.end()) {
            ev.rtol = get_number(*m, "evolution.rtol");
            if (!(ev.rtol > 0.0)) fail("evolution.rtol", "must be positive");
        }
        if (const auto m = ej.find("atol"); m != ej.end()) {
            ev.atol = get_number(*m, "evolution.atol");
            if (!(ev.atol > 0.0)) fail("evolution.atol", "must be positive");
        }
    }
    if (ov.seed) cfg.evolution.seed = *ov.seed;
    if (ov.n_traj) {
        if (*ov.n_traj < 1) fail("--trajectories", "must be positive");
        cfg.evolution.n_traj = *ov.n_traj;
    }
    if (ov.postselect_N) cfg.evolution.postselect_N = *ov.postselect_N;
    if (cfg.evolution.postselect_N) {
        if (cfg.evolution.method != RunMethod::trajectories)
            fail("evolution.postselect_N", "only meaningful for the trajectories method");
        if (*cfg.evolution.postselect_N < 0 || *cfg.evolution.postselect_N > cfg.N_max)
            fail("evolution.postselect_N",
                 "outside the simulated sectors 0.." + std::to_string(cfg.N_max));
    }

    // observables
    if (const auto it = root.find("observables"); it != root.end()) {
        if (!it->is_array()) fail("observables", "expected a list of names");
        for (size_t i = 0; i < it->size(); ++i) {
            const std::string where = "observables[" + std::to_string(i) + "]";
            ObservableRequest req;
            try {
                req = ObservableRequest::parse(get_string((*it)[i], where));
            } catch (const std::exception& e) {
                fail(where, e.what());
            }
            switch (req.kind) {
                case ObservableRequest::Kind::occupation:
                    if (req.site > cfg.L) fail(where, "site index beyond the chain");
                    break;
                case ObservableRequest::Kind::sector_population:
                    if (req.sector > cfg.N_max)
                        fail(where, "sector above the initial boson number");
                    break;
                case ObservableRequest::Kind::coherence:
                    for (const FockState* s : {&req.ket, &req.bra}) {
                        if (s->sites() != cfg.L) fail(where, "state length differs from chain.L");
                        if (s->total() > cfg.N_max)
                            fail(where, "state outside the simulated sectors");
                        for (int l = 0; l < cfg.L; ++l)
                            if (s->n[l] > cfg.d_max) fail(where, "occupation above chain.d_max");
                    }
                    break;
                default:
                    break;
            }
            cfg.observables.push_back(std::move(req));
        }
    } else {
        for (int l = 1; l <= cfg.L; ++l) {
            ObservableRequest req;
            req.kind = ObservableRequest::Kind::occupation;
            req.site = l;
            cfg.observables.push_back(req);
        }
    }

    // output
    if (const auto it = root.find("output"); it != root.end()) {
        if (!it->is_object()) fail("output", "expected an object");
        check_keys(*it, "output", {"path", "format", "jump_log"});
        if (const auto m = it->find("path"); m != it->end()) {
            cfg.output_path = get_string(*m, "output.path");
            if (cfg.output_path.empty()) fail("output.path", "must not be empty");
        }
        if (const auto m = it->find("format"); m != it->end()) {
            cfg.output_format = get_string(*m, "output.format");
            if (cfg.output_format != "csv") fail("output.format", "only \"csv\" is supported");
        }
        if (const auto m = it->find("jump_log"); m != it->end()) {
            if (!m->is_boolean()) fail("output.jump_log", "expected a boolean");
            cfg.jump_log = m->get<bool>();
        }
    }
    if (cfg.jump_log && cfg.evolution.method != RunMethod::trajectories)
        fail("output.jump_log", "only trajectories produce jump logs");

    // compare tolerances
    if (const auto it = root.find("compare"); it != root.end()) {
        if (!it->is_object()) fail("compare", "expected an object");
        check_keys(*it, "compare", {"tol_sector", "tol_manifold", "z_max", "min_fraction"});
        const auto positive = [&](const char* key, double& dst) {
            if (const auto m = it->find(key); m != it->end()) {
                dst = get_number(*m, std::string("compare.") + key);
                if (!(dst > 0.0)) fail(std::string("compare.") + key, "must be positive");
            }
        };
        positive("tol_sector", cfg.compare.tol_sector);
        positive("tol_manifold", cfg.compare.tol_manifold);
        positive("z_max", cfg.compare.z_max);
        positive("min_fraction", cfg.compare.min_fraction);
        if (cfg.compare.min_fraction > 1.0) fail("compare.min_fraction", "must be at most 1");
    }

    return cfg;
}

nlohmann::json ExperimentConfig::manifest() const {
    json m;
    m["version"] = kVersion;
    m["chain"] = {{"L", L}, {"d_max", d_max}};

    json pj;
    pj["omega_over_2pi_MHz"] = omega_MHz;
    pj["U_over_2pi_MHz"] = U_MHz;
    pj["J_over_2pi_MHz"] = J_MHz;
    pj["gamma_over_2pi_kHz"] = gamma_kHz;
    pj["kappa_over_2pi_kHz"] = kappa_kHz;
    pj["rotating_frame"] = params.rotating_frame;
    if (params.dephasing.exponential)
        pj["dephasing_model"] = {{"exponential", {{"a", params.dephasing.a}}}};
    else
        pj["dephasing_model"] = "number";
    m["params"] = std::move(pj);

    json states = json::array();
    for (const auto& c : initial)
        states.push_back({{"state", c.state.shorthand()},
                          {"weight", {c.weight.real(), c.weight.imag()}}});
    m["initial_state"] = std::move(states);

    if (evolution.present) {
        json ej;
        ej["method"] = method_name(evolution.method);
        ej["t_max_us"] = evolution.t_max_us;
        ej["n_points"] = evolution.n_points;
        ej["seed"] = evolution.seed;
        if (evolution.method == RunMethod::master) {
            ej["master_method"] = master_method_name(evolution.master_method);
            ej["split_dt_us"] = evolution.split_dt_us;
            ej["rtol"] = evolution.rtol;
            ej["atol"] = evolution.atol;
        } else {
            ej["n_traj"] = evolution.n_traj;
            if (evolution.postselect_N) ej["postselect_N"] = *evolution.postselect_N;
        }
        m["evolution"] = std::move(ej);
    }

    json obs = json::array();
    for (const auto& req : observables) obs.push_back(req.name());
    m["observables"] = std::move(obs);
    return m;
}

std::vector<double> ExperimentConfig::time_grid() const {
    require_evolution();
    std::vector<double> t(static_cast<size_t>(evolution.n_points));
    for (int i = 0; i < evolution.n_points; ++i)
        t[static_cast<size_t>(i)] = evolution.t_max_us * i / (evolution.n_points - 1);
    return t;
}

void ExperimentConfig::require_evolution() const {
    if (!evolution.present)
        throw ConfigError("evolution: required for this command (set t_max_us at least)");
}

void ExperimentConfig::require_definite_sector(const char* why) const {
    if (!definite_N)
        throw ConfigError(std::string("initial_state: ") + why +
                          " needs a definite total boson number, but the superposition "
                          "spans several sectors");
}

}  // namespace bhc::cli

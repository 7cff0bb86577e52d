#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string cli = BHC_CLI_PATH;

fs::path scratch() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "bhc_cli_scratch";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

int run(const std::string& args) {
    const std::string cmd = cli + " " + args + " >/dev/null 2>/dev/null";
    return WEXITSTATUS(std::system(cmd.c_str()));
}

int run_to(const std::string& args, const fs::path& stdout_file) {
    const std::string cmd = cli + " " + args + " >" + stdout_file.string() + " 2>/dev/null";
    return WEXITSTATUS(std::system(cmd.c_str()));
}

void put(const fs::path& p, const std::string& text) {
    std::ofstream os(p);
    REQUIRE(os.good());
    os << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is.good());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// Rows of a CSV file with '#' comment lines skipped; first row is the header.
std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
    std::ifstream is(p);
    REQUIRE(is.good());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.push_back("");
        rows.push_back(std::move(cells));
    }
    return rows;
}

int column(const std::vector<std::vector<std::string>>& rows, const std::string& name) {
    for (size_t i = 0; i < rows.at(0).size(); ++i)
        if (rows[0][i] == name) return static_cast<int>(i);
    return -1;
}

const char* demo_params = R"({
    "U_over_2pi_MHz": 230.0,
    "J_over_2pi_MHz": 20.0,
    "gamma_over_2pi_kHz": 8.0,
    "kappa_over_2pi_kHz": 40.0
  })";

}  // namespace

TEST_CASE("bad configs and usage exit with code 1") {
    const fs::path d = scratch() / "errors";
    fs::create_directories(d);
    const std::string out = " --out " + (d / "o").string();

    CHECK(run("evolve --config " + (d / "missing.json").string() + out) == 1);
    CHECK(run("evolve" + out) == 1);

    put(d / "garbage.json", "{oops");
    CHECK(run("evolve --config " + (d / "garbage.json").string() + out) == 1);

    const auto cfg = [&](const std::string& body, const std::string& name) {
        put(d / name, body);
        return " --config " + (d / name).string() + out;
    };

    CHECK(run("evolve" + cfg(R"({"chain":{"L":2,"d_max":2},"params":)" +
                                 std::string(demo_params) +
                                 R"(,"initial_state":"11","typo":1})",
                             "unknown_key.json")) == 1);
    CHECK(run("evolve" + cfg(R"({"chain":{"L":2,"d_max":2},"params":)" +
                                 std::string(demo_params) + R"(,"initial_state":"11"})",
                             "no_evolution.json")) == 1);
    CHECK(run("evolve" + cfg(R"({"chain":{"L":2,"d_max":2},"params":)" +
                                 std::string(demo_params) +
                                 R"(,"initial_state":"11",
               "evolution":{"t_max_us":1.0},"observables":["n_7"]})",
                             "bad_site.json")) == 1);
    CHECK(run("evolve" + cfg(R"({"chain":{"L":2,"d_max":2},"params":)" +
                                 std::string(demo_params) +
                                 R"(,"initial_state":"11",
               "evolution":{"t_max_us":1.0},"output":{"jump_log":true}})",
                             "master_jump_log.json")) == 1);
    // d_max below the initial boson number cannot be simulated exactly.
    CHECK(run("evolve" + cfg(R"({"chain":{"L":2,"d_max":2},"params":)" +
                                 std::string(demo_params) +
                                 R"(,"initial_state":"22","evolution":{"t_max_us":1.0}})",
                             "truncated.json")) == 1);
    // Trajectories need a definite total boson number.
    CHECK(run("evolve" + cfg(R"({"chain":{"L":2,"d_max":2},"params":)" +
                                 std::string(demo_params) +
                                 R"(,"initial_state":{"superposition":[
                  {"state":"11","weight":1.0},{"state":"10","weight":1.0}]},
               "evolution":{"method":"trajectories","t_max_us":1.0}})",
                             "cross_sector.json")) == 1);
    CHECK(run("evolve --frobnicate" + cfg(R"({})", "empty.json")) == 1);
}

TEST_CASE("master evolve writes manifested time series") {
    const fs::path d = scratch() / "master";
    fs::create_directories(d);
    put(d / "run.json", R"({
      "chain": {"L": 2, "d_max": 2},
      "params": )" + std::string(demo_params) +
                            R"(,
      "initial_state": "11",
      "evolution": {"method": "master", "master_method": "expm", "t_max_us": 2.0, "n_points": 5},
      "observables": ["n_1", "n_2", "P_N2", "purity"],
      "output": {"path": "run.csv"}
    })");
    REQUIRE(run("evolve --config " + (d / "run.json").string() + " --out " + d.string()) == 0);

    const std::string text = slurp(d / "run.csv");
    CHECK(text.rfind("# {", 0) == 0);  // manifest comment block first

    const auto rows = csv_rows(d / "run.csv");
    REQUIRE(rows.size() == 6);  // header + 5 grid points
    CHECK(rows[0] ==
          std::vector<std::string>{"t_us", "n_1", "n_2", "P_N2", "purity"});
    CHECK(rows[1][0] == "0");
    CHECK(std::stod(rows[1][1]) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::stod(rows[1][3]) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::stod(rows[5][0]) == doctest::Approx(2.0).epsilon(1e-12));
    // One boson lost on average per 1/(2 gamma); populations decay.
    CHECK(std::stod(rows[5][3]) < 1.0);

    const json manifest = json::parse(slurp(d / "run.manifest.json"));
    CHECK(manifest["command"] == "evolve");
    CHECK(manifest["chain"]["L"] == 2);
    CHECK(manifest["params"]["gamma_over_2pi_kHz"] == json::array({8.0, 8.0}));
    CHECK(manifest["evolution"]["seed"] == 0);
    CHECK(manifest["observables"].size() == 4);
}

TEST_CASE("zero-rate trajectories reproduce the unitary master run") {
    const fs::path d = scratch() / "zero_rate";
    fs::create_directories(d);
    const std::string common = R"(
      "chain": {"L": 2, "d_max": 2},
      "params": {"U_over_2pi_MHz": 230.0, "J_over_2pi_MHz": 20.0},
      "initial_state": "11",
      "observables": ["n_1", "n_2"],)";
    put(d / "master.json", "{" + common + R"(
      "evolution": {"method": "master", "t_max_us": 0.5, "n_points": 11},
      "output": {"path": "master.csv"}})");
    put(d / "traj.json", "{" + common + R"(
      "evolution": {"method": "trajectories", "t_max_us": 0.5, "n_points": 11, "n_traj": 3},
      "output": {"path": "traj.csv"}})");
    REQUIRE(run("evolve --config " + (d / "master.json").string() + " --out " + d.string()) == 0);
    REQUIRE(run("evolve --config " + (d / "traj.json").string() + " --out " + d.string()) == 0);

    const auto master = csv_rows(d / "master.csv");
    const auto traj = csv_rows(d / "traj.csv");
    REQUIRE(master.size() == traj.size());
    const int tn1 = column(traj, "n_1");
    const int tse = column(traj, "n_1_se");
    const int tsf = column(traj, "surviving_fraction");
    REQUIRE(tn1 > 0);
    for (size_t r = 1; r < master.size(); ++r) {
        CHECK(std::stod(traj[r][tn1]) ==
              doctest::Approx(std::stod(master[r][1])).epsilon(1e-9));
        CHECK(std::stod(traj[r][tse]) == 0.0);
        CHECK(traj[r][tsf] == "1");
    }
}

TEST_CASE("identical seeds give identical bytes across thread counts") {
    const fs::path d = scratch() / "seeds";
    fs::create_directories(d);
    put(d / "traj.json", R"({
      "chain": {"L": 2, "d_max": 2},
      "params": )" + std::string(demo_params) +
                            R"(,
      "initial_state": "11",
      "evolution": {"method": "trajectories", "t_max_us": 3.0, "n_points": 7,
                    "n_traj": 64, "seed": 11},
      "observables": ["n_1", "n_2"],
      "output": {"path": "traj.csv", "jump_log": true}
    })");
    const std::string base = "evolve --config " + (d / "traj.json").string() + " --out ";
    REQUIRE(run(base + (d / "A").string() + " --threads 1") == 0);
    REQUIRE(run(base + (d / "B").string() + " --threads 4") == 0);
    REQUIRE(run(base + (d / "C").string() + " --seed 12") == 0);

    CHECK(slurp(d / "A" / "traj.csv") == slurp(d / "B" / "traj.csv"));
    CHECK(slurp(d / "A" / "traj_jumps.csv") == slurp(d / "B" / "traj_jumps.csv"));
    CHECK(slurp(d / "A" / "traj.csv") != slurp(d / "C" / "traj.csv"));

    const auto jumps = csv_rows(d / "A" / "traj_jumps.csv");
    REQUIRE(jumps.size() > 1);
    CHECK(jumps[0] == std::vector<std::string>{"trajectory", "t_us", "kind", "site"});
    for (size_t r = 1; r < jumps.size(); ++r) {
        REQUIRE(jumps[r].size() == 4);
        CHECK((jumps[r][2] == "dissipation" || jumps[r][2] == "dephasing"));
    }
}

TEST_CASE("predict tabulates rates and flags invalid closed forms") {
    const fs::path d = scratch() / "predict";
    fs::create_directories(d);
    put(d / "pred.json", R"({
      "chain": {"L": 4, "d_max": 3},
      "params": {"U_over_2pi_MHz": 230.0, "J_over_2pi_MHz": 20.0,
                 "kappa_over_2pi_kHz": 40.0},
      "initial_state": "3_2",
      "evolution": {"t_max_us": 400.0, "n_points": 5},
      "observables": ["coh_0300_0030"]
    })");
    REQUIRE(run("predict --config " + (d / "pred.json").string() + " --out " + d.string()) == 0);

    std::map<std::string, std::vector<std::string>> rates;
    for (const auto& row : csv_rows(d / "predict_rates.csv")) rates[row.at(0)] = row;
    CHECK(std::stod(rates.at("J_stack").at(1)) ==
          doctest::Approx(1.4252972341428172).epsilon(1e-12));
    CHECK(std::stod(rates.at("Xi").at(1)) == doctest::Approx(8.195459096321198).epsilon(1e-12));
    CHECK(rates.at("pair_formation").at(2) == "no");
    CHECK(!rates.at("pair_formation").at(3).empty());
    // kappa n^2 dephasing separates the stacks at 9 kappa.
    CHECK(std::stod(rates.at("K_kappa_0300_0030").at(1)) ==
          doctest::Approx(9 * 0.04 * 2 * 3.14159265358979324e-3 * 1e3).epsilon(1e-12));
    CHECK(std::stod(rates.at("K_gamma_0300_0030").at(1)) == 0.0);

    const auto trans = csv_rows(d / "predict_transition_rates.csv");
    bool found = false;
    for (size_t r = 1; r < trans.size(); ++r)
        if (trans[r][0] == "-3" && trans[r][1] == "-1") {
            CHECK(std::stod(trans[r][4]) == doctest::Approx(0.004275891702428451).epsilon(1e-10));
            found = true;
        }
    CHECK(found);

    const auto mani = csv_rows(d / "predict_manifold_populations.csv");
    CHECK(mani[0] == std::vector<std::string>{"t_us", "P_a-3", "P_a-1", "P_a0"});
    CHECK(std::stod(mani[1][1]) == 1.0);

    SUBCASE("a loss-only chain has no dephasing-induced transitions") {
        put(d / "gamma_only.json", R"({
          "chain": {"L": 4, "d_max": 3},
          "params": {"U_over_2pi_MHz": 230.0, "J_over_2pi_MHz": 20.0,
                     "gamma_over_2pi_kHz": 8.0},
          "initial_state": "3_2",
          "evolution": {"t_max_us": 400.0, "n_points": 5}
        })");
        REQUIRE(run("predict --config " + (d / "gamma_only.json").string() + " --out " +
                    (d / "g").string()) == 0);
        const auto t2 = csv_rows(d / "g" / "predict_transition_rates.csv");
        CHECK(t2.size() == 1);  // header only
    }
}

TEST_CASE("compare scores numerics against the analytic laws") {
    const fs::path d = scratch() / "compare";
    fs::create_directories(d);
    put(d / "cmp.json", R"({
      "chain": {"L": 2, "d_max": 2},
      "params": {"U_over_2pi_MHz": 230.0, "J_over_2pi_MHz": 20.0,
                 "gamma_over_2pi_kHz": 8.0},
      "initial_state": "11",
      "evolution": {"method": "trajectories", "t_max_us": 8.0, "n_points": 9,
                    "n_traj": 400, "seed": 3},
      "observables": ["n_1", "n_2", "P_N2"]
    })");
    REQUIRE(run("compare --config " + (d / "cmp.json").string() + " --out " + d.string()) == 0);
    const json summary = json::parse(slurp(d / "compare_summary.json"));
    CHECK(summary["pass"] == true);
    REQUIRE(summary["checks"].size() == 3);
    CHECK(summary["checks"][0]["name"] == "sector_vs_binomial");
    CHECK(summary["checks"][0]["applicable"] == true);
    CHECK(summary["checks"][0]["max_abs_deviation"].get<double>() < 1e-9);
    CHECK(summary["checks"][1]["applicable"] == false);
    CHECK(summary["checks"][2]["name"] == "trajectory_vs_master");
    CHECK(summary["checks"][2]["pass"] == true);

    SUBCASE("an unreachable tolerance fails with exit code 3") {
        put(d / "strict.json", R"({
          "chain": {"L": 2, "d_max": 2},
          "params": {"U_over_2pi_MHz": 230.0, "J_over_2pi_MHz": 20.0,
                     "gamma_over_2pi_kHz": 8.0},
          "initial_state": "11",
          "evolution": {"method": "master", "t_max_us": 8.0, "n_points": 9},
          "compare": {"tol_sector": 1e-16}
        })");
        CHECK(run("compare --config " + (d / "strict.json").string() + " --out " +
                  (d / "s").string()) == 3);
        const json s2 = json::parse(slurp(d / "s" / "compare_summary.json"));
        CHECK(s2["pass"] == false);
    }

    SUBCASE("manifold relaxation agrees with the rate equations") {
        put(d / "mani.json", R"({
          "chain": {"L": 3, "d_max": 2},
          "params": {"U_over_2pi_MHz": 230.0, "J_over_2pi_MHz": 20.0,
                     "kappa_over_2pi_kHz": 40.0},
          "initial_state": "2_2",
          "evolution": {"method": "master", "t_max_us": 600.0, "n_points": 13}
        })");
        REQUIRE(run("compare --config " + (d / "mani.json").string() + " --out " +
                    (d / "m").string()) == 0);
        const json s3 = json::parse(slurp(d / "m" / "compare_summary.json"));
        CHECK(s3["checks"][1]["name"] == "manifold_vs_rates");
        CHECK(s3["checks"][1]["applicable"] == true);
        CHECK(s3["checks"][1]["pass"] == true);
        CHECK(s3["checks"][1]["max_abs_deviation"].get<double>() < 0.05);
    }
}

TEST_CASE("basis prints the sector and manifold inventory") {
    const fs::path d = scratch() / "basis";
    fs::create_directories(d);
    put(d / "b.json", R"({
      "chain": {"L": 4, "d_max": 3},
      "params": {"U_over_2pi_MHz": 230.0, "J_over_2pi_MHz": 20.0},
      "initial_state": "3_2"
    })");
    REQUIRE(run_to("basis --config " + (d / "b.json").string(), d / "basis.txt") == 0);

    const auto rows = csv_rows(d / "basis.txt");
    REQUIRE(!rows.empty());
    CHECK(rows[0] == std::vector<std::string>{"N", "dim", "a", "states"});
    std::map<std::string, std::string> seen;  // "N,a" -> states
    for (size_t r = 1; r < rows.size(); ++r) seen[rows[r][0] + "," + rows[r][2]] = rows[r][3];
    CHECK(seen.at("0,0") == "1");
    CHECK(seen.at("3,0") == "4");
    CHECK(seen.at("3,-1") == "12");
    CHECK(seen.at("3,-3") == "4");
}

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "bhc/fock.hpp"
#include "bhc/linalg.hpp"
#include "bhc/params.hpp"
#include "bhc/rng.hpp"
#include "bhc/sparse.hpp"

namespace bhc {

enum class JumpKind { dissipation, dephasing };

struct JumpEvent {
    double t = 0.0;  // us
    JumpKind kind = JumpKind::dissipation;
    int site = 0;  // 1-based
};

// A single unraveled wavefunction. psi lives in the sector basis of
// current_N and is normalized at every recording point; dissipation jumps
// lower current_N by one, dephasing jumps leave it unchanged.
struct TrajectoryState {
    Eigen::VectorXcd psi;
    int current_N = 0;
    std::vector<JumpEvent> jump_log;
};

TrajectoryState trajectory_from_fock(const FockSpace& sp, const FockState& s);
TrajectoryState trajectory_from_vector(const FockSpace& sp, int N, Eigen::VectorXcd psi);

// Precomputed per-sector machinery for trajectory propagation: the no-jump
// generator -iH - D/2 diagonalized once per sector, the lowering maps that
// dissipation jumps use to drop into the next sector, and the collapse
// weights of every jump channel. Shared read-only between threads.
class TrajectoryEngine {
  public:
    struct Channel {
        JumpKind kind = JumpKind::dissipation;
        int site = 0;  // 1-based
        double rate = 0.0;
    };

    TrajectoryEngine(const ModelParams& p, const FockSpace& sp);

    const FockSpace& space() const { return space_; }
    const ModelParams& params() const { return params_; }
    const std::vector<Channel>& channels() const { return channels_; }
    const linalg::Propagator& propagator(int N) const;

    // Advances psi by tau under the no-jump generator, leaving it
    // unnormalized; returns the squared norm (the survival probability
    // when psi entered normalized).
    double no_jump_step(int N, Eigen::VectorXcd& psi, double tau) const;

    // Instantaneous rate <psi|L_c^dag L_c|psi> per channel.
    Eigen::VectorXd channel_rates(int N, const Eigen::VectorXcd& psi) const;

    // Draws a channel index with probability proportional to its rate.
    int sample_jump(int N, const Eigen::VectorXcd& psi, Philox& rng) const;

    // Collapses st.psi through the channel, renormalizes, updates
    // current_N for dissipation, and appends to the jump log.
    void apply_jump(TrajectoryState& st, int channel, double t) const;

    int sector_index(int N) const;

  private:
    struct ChannelData {
        Eigen::VectorXd weight;  // rate-scaled |<i|L^dag L|i>| diagonal
        SparseOperator lower;    // dissipation: map into the sector below
        Eigen::VectorXd deph;    // dephasing: diagonal collapse eigenvalues
    };
    struct SectorData {
        linalg::Propagator prop;
        std::vector<ChannelData> chan;
    };

    ModelParams params_;
    FockSpace space_;
    std::vector<Channel> channels_;
    std::vector<SectorData> sectors_;
};

// Evolves st across t_grid: deterministic no-jump propagation in the
// eigenbasis of the sector generator, interrupted by jumps wherever the
// survival norm crosses a uniform draw r in (0,1); each crossing is
// bisected to |survival - r| < jump_tol. record (when set) fires at every
// grid index with the normalized state.
void run_trajectory(const TrajectoryEngine& eng, TrajectoryState& st,
                    const std::vector<double>& t_grid, Philox& rng,
                    const std::function<void(int, const TrajectoryState&)>& record,
                    double jump_tol = 1e-6);

struct EnsembleOptions {
    int n_traj = 1;
    std::uint64_t seed = 0;
    int threads = 0;  // 0: hardware concurrency
    std::optional<int> postselect_N;
    double jump_tol = 1e-6;
    bool collect_jumps = false;  // keep every trajectory's jump log
};

// Mean and standard error per grid time and observable column. Entries are
// NaN where no (or too few) trajectories contribute: a postselected sample
// that died out is reported as missing, never as zero.
struct EnsembleResult {
    std::vector<double> t;
    Eigen::MatrixXd mean;       // n_t x n_obs
    Eigen::MatrixXd std_error;  // n_t x n_obs; NaN below 2 contributors
    std::vector<int> contributors;
    std::vector<double> surviving_fraction;
    std::vector<std::vector<JumpEvent>> jump_logs;  // per trajectory, when collected
    int n_traj = 0;
    std::uint64_t seed = 0;
};

// Trajectory j always consumes the Philox stream (seed, j), and partial
// sums are reduced in fixed trajectory order (chunks of 64 merged by chunk
// index), so the result is byte-identical for any thread count.
EnsembleResult run_ensemble(const TrajectoryEngine& eng, const TrajectoryState& init,
                            const std::vector<double>& t_grid, int n_obs,
                            const std::function<Eigen::VectorXd(const TrajectoryState&)>& row,
                            const EnsembleOptions& opt);

}  // namespace bhc

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bhc/density.hpp"
#include "bhc/fock.hpp"
#include "bhc/params.hpp"
#include "bhc/sparse.hpp"

namespace bhc {

// One collapse channel sqrt(rate) * op. `op` carries no rate factor. `decay`
// is the diagonal of op^dagger op in global basis order and is kept separate
// so that the anticommutator stays exact even when `op` drops amplitudes
// that leave a truncated space (probability then flows out of the space
// instead of being silently retained).
struct JumpChannel {
    enum class Kind { dissipation, dephasing };
    Kind kind = Kind::dissipation;
    int site = 1;  // 1-based
    double rate = 0.0;
    SparseOperator op;
    std::vector<double> decay;
};

// Channels with zero rate are skipped. Dissipation channels lower the boson
// number by one; dephasing channels are diagonal with the configured weights.
std::vector<JumpChannel> build_jumps(const ModelParams& p, const FockSpace& sp);

DensityMatrix lindblad_rhs(const DensityMatrix& rho, const SparseOperator& H,
                           const std::vector<JumpChannel>& jumps);

enum class MasterMethod { automatic, rk45, expm, split };

struct MasterOptions {
    MasterMethod method = MasterMethod::automatic;
    double rtol = 1e-8;   // rk45
    double atol = 1e-10;  // rk45
    double split_dt = 5e-4;
    // Upper bound on the flattened dimension (sum of occupied block sizes)
    // for which `automatic` picks the exact exponential.
    int expm_dim_cap = 1600;
    bool check_invariants = true;
    // Full positivity checks cost an eigendecomposition per grid point, so
    // above this space dimension they run only every tenth grid point.
    int positivity_dim_cap = 256;
};

struct MasterDiagnostics {
    MasterMethod method_used = MasterMethod::automatic;
    double max_trace_defect = 0.0;  // split: largest per-step drift before renormalization
    double max_hermiticity_defect = 0.0;
    double min_eigenvalue = 0.0;
    int steps = 0;
};

// Integrates d rho/dt = -i[H,rho] + sum_c rate_c (L rho L^dag - {L^dag L, rho}/2)
// over t_grid (strictly increasing, t_grid[0] is the initial time) and hands
// (grid index, state) to `sink` at every grid point, including the first.
MasterDiagnostics evolve_master(const DensityMatrix& rho0, const std::vector<double>& t_grid,
                                const SparseOperator& H, const std::vector<JumpChannel>& jumps,
                                const MasterOptions& opt,
                                const std::function<void(int, const DensityMatrix&)>& sink);

std::vector<DensityMatrix> evolve_master_series(const DensityMatrix& rho0,
                                                const std::vector<double>& t_grid,
                                                const SparseOperator& H,
                                                const std::vector<JumpChannel>& jumps,
                                                const MasterOptions& opt = {});

inline std::complex<double> coherence_element(const DensityMatrix& rho, const FockState& n,
                                              const FockState& m) {
    return rho.element(n, m);
}

}  // namespace bhc

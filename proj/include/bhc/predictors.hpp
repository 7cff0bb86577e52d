#pragma once

#include <Eigen/Dense>
#include <vector>

#include "bhc/fock.hpp"
#include "bhc/sparse.hpp"

namespace bhc {

// Population curves over a time grid; labels are sector numbers N or
// manifold labels a depending on who produced the series. Rows normalized.
struct PopulationSeries {
    std::vector<double> t;
    std::vector<int> labels;
    Eigen::MatrixXd P;  // t.size() x labels.size()

    int label_index(int label) const;
};

// Closed-form sector populations under uniform loss: a binomial distribution
// over the surviving bosons with success probability e^{-gamma t}.
PopulationSeries sector_populations(int N_max, double gamma, const std::vector<double>& t_grid);

// Decay rate of the coherence <n|rho|m>: half the summed loss weight.
double dissipative_decoherence_rate(const FockState& n, const FockState& m,
                                    const std::vector<double>& gamma);
// Same for dephasing: half the kappa-weighted squared occupation distance.
double dephasing_decoherence_rate(const FockState& n, const FockState& m,
                                  const std::vector<double>& kappa);

// Golden-rule transition rate between two anharmonicity manifolds: the
// dephasing-weighted hopping matrix elements, suppressed by the interaction
// gap U(a-b), averaged over the source manifold. Per-state weight
// convention: multiply by the manifold dimension for total population flow.
double manifold_rate_general(int a, int b, const SectorBasis& basis, const SparseOperator& H_J,
                             const std::vector<double>& kappa, double U);

// Outgoing golden-rule rate of one source state into manifold b (the per-
// state row of the pair sum behind manifold_rate_general).
double state_leak_rate(const FockState& n, int b, const SectorBasis& basis,
                       const SparseOperator& H_J, const std::vector<double>& kappa, double U);

// Closed forms for the named transitions of a chain with uniform parameters.
//   stack_shed:     |N_l>            -> |(N-1)_l, 1_k>, k next to l
//   stack_heal:     |(N-1)_l, 1_k>   -> |N_l>
//   pair_formation: |(N-1)_l, 1_k>   -> |(N-2)_l, 2_k>
//   second_shed:    |(N-1)_l, 1_k>   -> |(N-2)_l, 1_j, 1_k>
//   hardcore_leak:  singly occupied  -> one doubly occupied site
enum class RateKind { stack_shed, stack_heal, pair_formation, second_shed, hardcore_leak };

// Throws std::invalid_argument outside a formula's validity range; in
// particular pair_formation at N = 3 is degenerate (source and target share
// one manifold) and manifold_rate_general is the fallback.
double manifold_rate_closed(RateKind kind, int L, int N, double J, double U, double kappa);

// Rates between every manifold pair of a sector, ascending labels.
struct RateMatrix {
    std::vector<int> labels;
    std::vector<int> dims;  // states per manifold
    Eigen::MatrixXd gamma;  // per-state-weight rates, zero diagonal
};

RateMatrix rate_matrix_from_basis(const SectorBasis& basis, const SparseOperator& H_J,
                                  const std::vector<double>& kappa, double U);

// Evolves total manifold populations under dP_a/dt = sum_b (P_b - P_a) G_ab
// acting on the per-state weights P_a / dim_a; total population conserved.
PopulationSeries solve_rate_equations(const RateMatrix& rm, const std::vector<double>& P0,
                                      const std::vector<double>& t_grid);

// Effective rates of the interaction-locked dynamics: stack hopping
// J_stack = J [N/(N-1)!] (J/U)^(N-1) and pair exchange Xi = 3J(J/U)/4.
struct EffectiveFrequencies {
    double J_stack;
    double Xi;
};
EffectiveFrequencies effective_frequencies(int N, double J, double U);

// First-order dressed stack: |N_l> minus J sqrt(N)/[U(N-1)] times each
// neighbor state |(N-1)_l, 1_{l+sigma}>, normalized. Edge sites have one
// neighbor term.
Eigen::VectorXcd perturbed_stack_state(int site, int N, double J, double U,
                                       const SectorBasis& basis);

}  // namespace bhc

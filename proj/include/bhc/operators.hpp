#pragma once

#include <utility>
#include <vector>

#include "bhc/fock.hpp"
#include "bhc/params.hpp"
#include "bhc/sparse.hpp"

namespace bhc {

// Chain Hamiltonian in a fixed sector: diagonal sum_l domega_l n_l
// - sum_l (U_l/2) n_l (n_l - 1) plus nearest-neighbor hopping
// J_l (a+_l a_{l+1} + a+_{l+1} a_l). In the rotating frame (default) only
// the site detunings domega_l = omega_l - mean(omega) survive on the
// diagonal, since the uniform part commutes with the total number.
SparseOperator build_hamiltonian(const ModelParams& p, const SectorBasis& b);
SparseOperator build_hamiltonian(const ModelParams& p, const FockSpace& sp);

// Hopping part alone (strictly off-diagonal).
SparseOperator build_hopping(const ModelParams& p, const SectorBasis& b);
SparseOperator build_hopping(const ModelParams& p, const FockSpace& sp);

// Number operator of one site (1-based), diagonal.
SparseOperator build_number_op(int site, const SectorBasis& b);
SparseOperator build_number_op(int site, const FockSpace& sp);

// a_site mapping sector N to sector N-1; entries sqrt(n_site).
SparseOperator build_lowering_map(int site, const SectorBasis& from_N, const SectorBasis& to_Nm1);
// Full-space lowering operator (couples adjacent sectors downward).
SparseOperator build_lowering(int site, const FockSpace& sp);

// Diagonal eigenvalues of the dephasing collapse operator of one site,
// in basis order (the rate kappa_l is kept separate).
std::vector<double> dephasing_weights(int site, const ModelParams& p, const SectorBasis& b);
std::vector<double> dephasing_weights(int site, const ModelParams& p, const FockSpace& sp);

// Total no-jump decay rate per basis state:
// D_n = sum_l gamma_l n_l + sum_l kappa_l w_l(n_l)^2.
// The effective non-Hermitian Hamiltonian is H - (i/2) diag(D).
std::vector<double> no_jump_decay(const ModelParams& p, const SectorBasis& b);
std::vector<double> no_jump_decay(const ModelParams& p, const FockSpace& sp);

// Projectors onto anharmonicity manifolds, keyed by the integer label
// a = -sum n(n-1)/2, ascending (most negative first). Partition of identity.
std::vector<std::pair<int, SparseOperator>> manifold_projectors(const SectorBasis& b);

// Manifold label per basis state, in basis order.
std::vector<int> manifold_labels(const SectorBasis& b);

}  // namespace bhc

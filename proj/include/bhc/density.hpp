#pragma once

#include <Eigen/Dense>
#include <complex>
#include <map>
#include <utility>

#include "bhc/fock.hpp"

namespace bhc {

// Dense Hermitian matrix over a FockSpace, stored as sector-pair blocks.
// Neither the chain Hamiltonian nor the collapse channels can build
// coherence between boson-number sectors that was not present initially,
// so most states of interest occupy only the diagonal blocks; blocks that
// stay exactly zero are never allocated.
class DensityMatrix {
  public:
    using BlockKey = std::pair<int, int>;  // (row sector index, col sector index)
    using BlockMap = std::map<BlockKey, Eigen::MatrixXcd>;

    DensityMatrix() = default;
    explicit DensityMatrix(const FockSpace* sp) : sp_(sp) {}

    static DensityMatrix pure(const FockSpace& sp, const Eigen::VectorXcd& psi_global);
    static DensityMatrix fock(const FockSpace& sp, const FockState& s);
    static DensityMatrix maximally_mixed_sector(const FockSpace& sp, int N);

    const FockSpace& space() const { return *sp_; }
    bool empty() const { return blocks_.empty(); }

    BlockMap& blocks() { return blocks_; }
    const BlockMap& blocks() const { return blocks_; }
    Eigen::MatrixXcd& block(int ka, int kb);  // allocates a zero block on first use
    const Eigen::MatrixXcd* find_block(int ka, int kb) const;
    bool diagonal_blocks_only() const;

    double trace() const;
    double purity() const;
    void scale(double f);
    std::complex<double> element(const FockState& n, const FockState& m) const;
    double population(const FockState& n) const;

    Eigen::MatrixXcd dense() const;

    double hermiticity_defect() const;  // max |rho - rho^dagger|
    double min_eigenvalue() const;

    // Throws NumericError with a diagnostic when the state stops looking
    // like a density matrix: |Tr-1| or the hermiticity defect beyond their
    // hard bounds, or a negative eigenvalue below -positivity_abort.
    void check_invariants(double trace_tol = 1e-6, double herm_tol = 1e-8,
                          double positivity_abort = 1e-6) const;

  private:
    const FockSpace* sp_ = nullptr;
    BlockMap blocks_;
};

}  // namespace bhc

#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <vector>

namespace bhc {

// Raised when a numerical routine cannot meet its accuracy contract.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace linalg {

// Dense matrix exponential (scaling and squaring).
Eigen::MatrixXcd expm(const Eigen::MatrixXcd& A);

// y = exp(A t) x by substepped Taylor summation; robust for any A but
// slow when ||A t|| is large. Error budget ~1e-13 per substep.
Eigen::VectorXcd expmv_taylor(const Eigen::MatrixXcd& A, std::complex<double> t,
                              Eigen::VectorXcd x);

// Propagator for a constant generator G: applies exp(G t) for arbitrary t.
// Diagonalizes G once and verifies the factorization (residual and
// conditioning); when the check fails it falls back to Taylor stepping.
// For trajectory work the eigenbasis coordinates are exposed so that
// propagation between events is elementwise and norms come from the Gram
// matrix of the (non-unitary) eigenvector basis.
class Propagator {
  public:
    explicit Propagator(Eigen::MatrixXcd G);

    int dim() const { return static_cast<int>(G_.rows()); }
    bool diagonalized() const { return eig_ok_; }

    Eigen::VectorXcd apply(double t, const Eigen::VectorXcd& x) const;
    Eigen::MatrixXcd matrix(double t) const;

    // Eigen-coordinate interface; valid only when diagonalized().
    Eigen::VectorXcd to_coords(const Eigen::VectorXcd& x) const { return Vinv_ * x; }
    Eigen::VectorXcd from_coords(const Eigen::VectorXcd& c) const { return V_ * c; }
    void advance_coords(double t, Eigen::VectorXcd& c) const;
    // ||from_coords(c)||^2 without leaving eigencoordinates.
    double norm2_coords(const Eigen::VectorXcd& c) const;
    const Eigen::VectorXcd& eigenvalues() const { return lam_; }

  private:
    Eigen::MatrixXcd G_;
    Eigen::MatrixXcd V_, Vinv_, gram_;
    Eigen::VectorXcd lam_;
    bool eig_ok_ = false;
};

struct OdeOptions {
    double rtol = 1e-8;
    double atol = 1e-10;
    double h_init = 0.0;  // 0: choose automatically
    double h_max = 0.0;   // 0: unbounded
};

// Adaptive Dormand-Prince 4(5) over a fixed output grid. Steps are clamped
// to land exactly on grid points, so outputs carry no interpolation error.
// at_grid(k, y) fires for every k including k = 0.
void integrate_dopri5(
    const std::function<void(double, const Eigen::VectorXcd&, Eigen::VectorXcd&)>& rhs,
    const std::vector<double>& t_grid, Eigen::VectorXcd y, const OdeOptions& opt,
    const std::function<void(int, const Eigen::VectorXcd&)>& at_grid);

}  // namespace linalg
}  // namespace bhc

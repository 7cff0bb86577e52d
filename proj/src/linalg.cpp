#include "bhc/linalg.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

namespace bhc::linalg {

Eigen::MatrixXcd expm(const Eigen::MatrixXcd& A) { return A.exp(); }

Eigen::VectorXcd expmv_taylor(const Eigen::MatrixXcd& A, std::complex<double> t,
                              Eigen::VectorXcd x) {
    double scale = A.cwiseAbs().rowwise().sum().maxCoeff() * std::abs(t);
    int m = std::max(1, static_cast<int>(std::ceil(scale / 2.0)));
    std::complex<double> dt = t / static_cast<double>(m);
    for (int s = 0; s < m; ++s) {
        Eigen::VectorXcd term = x, acc = x;
        for (int k = 1; k <= 64; ++k) {
            term = (A * term) * (dt / static_cast<double>(k));
            acc += term;
            if (term.norm() <= 1e-15 * acc.norm()) break;
            if (k == 64) throw NumericError("matrix exponential series failed to converge");
        }
        x.swap(acc);
    }
    return x;
}

Propagator::Propagator(Eigen::MatrixXcd G) : G_(std::move(G)) {
    if (G_.rows() != G_.cols()) throw std::invalid_argument("propagator needs a square generator");
    const int n = dim();
    if (n == 0) return;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(G_, true);
    if (es.info() == Eigen::Success) {
        V_ = es.eigenvectors();
        lam_ = es.eigenvalues();
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(V_);
        Vinv_ = lu.inverse();
        // Factorization quality: residual of G V = V diag(lam) plus the
        // basis conditioning, both of which bound the propagation error.
        double gscale = std::max(G_.cwiseAbs().maxCoeff(), 1e-300);
        double res = (G_ * V_ - V_ * lam_.asDiagonal()).cwiseAbs().maxCoeff() / gscale;
        double cond = V_.cwiseAbs().rowwise().sum().maxCoeff() *
                      Vinv_.cwiseAbs().rowwise().sum().maxCoeff();
        if (res < 1e-11 && cond < 1e4) {
            gram_ = V_.adjoint() * V_;
            eig_ok_ = true;
        }
    }
}

void Propagator::advance_coords(double t, Eigen::VectorXcd& c) const {
    for (int i = 0; i < c.size(); ++i) c(i) *= std::exp(lam_(i) * t);
}

double Propagator::norm2_coords(const Eigen::VectorXcd& c) const {
    return std::real(c.dot(gram_ * c));
}

Eigen::VectorXcd Propagator::apply(double t, const Eigen::VectorXcd& x) const {
    if (!eig_ok_) return expmv_taylor(G_, t, x);
    Eigen::VectorXcd c = Vinv_ * x;
    advance_coords(t, c);
    return V_ * c;
}

Eigen::MatrixXcd Propagator::matrix(double t) const {
    if (!eig_ok_) return expm(G_ * t);
    Eigen::VectorXcd ph(lam_.size());
    for (int i = 0; i < lam_.size(); ++i) ph(i) = std::exp(lam_(i) * t);
    return V_ * ph.asDiagonal() * Vinv_;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

void integrate_dopri5(
    const std::function<void(double, const Eigen::VectorXcd&, Eigen::VectorXcd&)>& rhs,
    const std::vector<double>& t_grid, Eigen::VectorXcd y, const OdeOptions& opt,
    const std::function<void(int, const Eigen::VectorXcd&)>& at_grid) {
    if (t_grid.empty()) return;
    for (std::size_t k = 1; k < t_grid.size(); ++k)
        if (t_grid[k] <= t_grid[k - 1]) throw std::invalid_argument("time grid must increase");

    const long n = y.size();
    Eigen::VectorXcd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n);

    double t = t_grid.front();
    at_grid(0, y);
    rhs(t, y, k1);
    double span = t_grid.back() - t_grid.front();
    double h = opt.h_init > 0 ? opt.h_init : span / 100.0;
    if (opt.h_max > 0) h = std::min(h, opt.h_max);

    std::size_t next = 1;
    while (next < t_grid.size()) {
        bool clipped = false;
        double hs = h;
        if (t + hs >= t_grid[next] - 1e-14 * std::abs(span)) {
            hs = t_grid[next] - t;
            clipped = true;
        }
        if (hs <= std::abs(t) * 1e-15 + 1e-300)
            throw NumericError("step size underflow in the adaptive integrator");

        ytmp = y + hs * (a21 * k1);
        rhs(t + c2 * hs, ytmp, k2);
        ytmp = y + hs * (a31 * k1 + a32 * k2);
        rhs(t + c3 * hs, ytmp, k3);
        ytmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
        rhs(t + c4 * hs, ytmp, k4);
        ytmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        rhs(t + c5 * hs, ytmp, k5);
        ytmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        rhs(t + hs, ytmp, k6);
        ynew = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        rhs(t + hs, ynew, k7);
        err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        double norm2 = 0.0;
        for (long i = 0; i < n; ++i) {
            double sc = opt.atol + opt.rtol * std::max(std::abs(y(i)), std::abs(ynew(i)));
            double q = std::abs(err(i)) / sc;
            norm2 += q * q;
        }
        double enorm = std::sqrt(norm2 / static_cast<double>(n));

        double fac = std::clamp(0.9 * std::pow(std::max(enorm, 1e-10), -0.2), 0.2, 5.0);
        if (enorm <= 1.0) {
            y.swap(ynew);
            k1.swap(k7);  // first-same-as-last
            if (clipped) {
                t = t_grid[next];
                at_grid(static_cast<int>(next), y);
                ++next;
                // Keep the pre-clip proposal: the clipped step says nothing
                // about the accuracy-limited step size.
                h = std::max(h, hs * fac);
            } else {
                t += hs;
                h = hs * fac;
            }
        } else {
            h = hs * fac;
        }
        if (opt.h_max > 0) h = std::min(h, opt.h_max);
    }
}

}  // namespace bhc::linalg

#include "bhc/density.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "bhc/linalg.hpp"

namespace bhc {

DensityMatrix DensityMatrix::pure(const FockSpace& sp, const Eigen::VectorXcd& psi_global) {
    if (psi_global.size() != sp.dim())
        throw std::invalid_argument("pure: state vector does not match space dimension");
    const double n2 = psi_global.squaredNorm();
    if (std::abs(n2 - 1.0) > 1e-12)
        throw std::invalid_argument("pure: state vector is not normalized");

    DensityMatrix rho(&sp);
    const int ns = static_cast<int>(sp.sectors.size());
    std::vector<bool> occ(ns, false);
    for (int k = 0; k < ns; ++k) {
        const auto seg = psi_global.segment(sp.offsets[k], sp.sectors[k].dim());
        occ[k] = seg.squaredNorm() > 0.0;
    }
    for (int ka = 0; ka < ns; ++ka) {
        if (!occ[ka]) continue;
        const auto a = psi_global.segment(sp.offsets[ka], sp.sectors[ka].dim());
        for (int kb = 0; kb < ns; ++kb) {
            if (!occ[kb]) continue;
            const auto b = psi_global.segment(sp.offsets[kb], sp.sectors[kb].dim());
            rho.blocks_[{ka, kb}] = a * b.adjoint();
        }
    }
    return rho;
}

DensityMatrix DensityMatrix::fock(const FockSpace& sp, const FockState& s) {
    const int k = sp.sector_of(s.total());
    if (k < 0) throw std::invalid_argument("fock: state " + s.shorthand() + " outside the space");
    const int i = sp.sectors[k].find(s);
    if (i < 0) throw std::invalid_argument("fock: state " + s.shorthand() + " outside the space");
    DensityMatrix rho(&sp);
    auto& b = rho.blocks_[{k, k}];
    b = Eigen::MatrixXcd::Zero(sp.sectors[k].dim(), sp.sectors[k].dim());
    b(i, i) = 1.0;
    return rho;
}

DensityMatrix DensityMatrix::maximally_mixed_sector(const FockSpace& sp, int N) {
    const int k = sp.sector_of(N);
    if (k < 0) throw std::invalid_argument("maximally_mixed_sector: no such sector");
    const int d = sp.sectors[k].dim();
    DensityMatrix rho(&sp);
    rho.blocks_[{k, k}] = Eigen::MatrixXcd::Identity(d, d) / static_cast<double>(d);
    return rho;
}

Eigen::MatrixXcd& DensityMatrix::block(int ka, int kb) {
    auto it = blocks_.find({ka, kb});
    if (it == blocks_.end()) {
        auto& b = blocks_[{ka, kb}];
        b = Eigen::MatrixXcd::Zero(sp_->sectors[ka].dim(), sp_->sectors[kb].dim());
        return b;
    }
    return it->second;
}

const Eigen::MatrixXcd* DensityMatrix::find_block(int ka, int kb) const {
    auto it = blocks_.find({ka, kb});
    return it == blocks_.end() ? nullptr : &it->second;
}

bool DensityMatrix::diagonal_blocks_only() const {
    for (const auto& [key, b] : blocks_) {
        if (key.first != key.second && b.cwiseAbs().maxCoeff() > 0.0) return false;
    }
    return true;
}

double DensityMatrix::trace() const {
    double t = 0.0;
    for (const auto& [key, b] : blocks_)
        if (key.first == key.second) t += b.trace().real();
    return t;
}

double DensityMatrix::purity() const {
    // Tr rho^2 = sum_{ab} Tr(rho_ab rho_ba); Hermiticity makes every term real.
    double p = 0.0;
    for (const auto& [key, b] : blocks_) {
        const auto* other = find_block(key.second, key.first);
        if (other) p += (b.array() * other->transpose().array()).sum().real();
    }
    return p;
}

void DensityMatrix::scale(double f) {
    for (auto& [key, b] : blocks_) b *= f;
}

std::complex<double> DensityMatrix::element(const FockState& n, const FockState& m) const {
    const int ka = sp_->sector_of(n.total());
    const int kb = sp_->sector_of(m.total());
    if (ka < 0 || kb < 0) throw std::invalid_argument("element: state outside the space");
    const int i = sp_->sectors[ka].find(n);
    const int j = sp_->sectors[kb].find(m);
    if (i < 0 || j < 0) throw std::invalid_argument("element: state outside the space");
    const auto* b = find_block(ka, kb);
    return b ? (*b)(i, j) : std::complex<double>(0.0, 0.0);
}

double DensityMatrix::population(const FockState& n) const { return element(n, n).real(); }

Eigen::MatrixXcd DensityMatrix::dense() const {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(sp_->dim(), sp_->dim());
    for (const auto& [key, b] : blocks_)
        out.block(sp_->offsets[key.first], sp_->offsets[key.second], b.rows(), b.cols()) = b;
    return out;
}

double DensityMatrix::hermiticity_defect() const {
    double worst = 0.0;
    for (const auto& [key, b] : blocks_) {
        const auto* other = find_block(key.second, key.first);
        if (!other) {
            worst = std::max(worst, b.cwiseAbs().maxCoeff());
            continue;
        }
        worst = std::max(worst, (b - other->adjoint()).cwiseAbs().maxCoeff());
    }
    return worst;
}

double DensityMatrix::min_eigenvalue() const {
    if (blocks_.empty()) return 0.0;
    double lo = 0.0;
    if (diagonal_blocks_only()) {
        for (const auto& [key, b] : blocks_) {
            if (key.first != key.second) continue;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (b + b.adjoint()),
                                                               Eigen::EigenvaluesOnly);
            lo = std::min(lo, es.eigenvalues().minCoeff());
        }
        return lo;
    }
    const Eigen::MatrixXcd full = dense();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (full + full.adjoint()),
                                                       Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

void DensityMatrix::check_invariants(double trace_tol, double herm_tol,
                                     double positivity_abort) const {
    const double tr = trace();
    if (std::abs(tr - 1.0) > trace_tol) {
        std::ostringstream os;
        os << "density matrix trace drifted to " << tr << " (|Tr-1| = " << std::abs(tr - 1.0)
           << ", tolerance " << trace_tol << ")";
        throw NumericError(os.str());
    }
    const double hd = hermiticity_defect();
    if (hd > herm_tol) {
        std::ostringstream os;
        os << "density matrix hermiticity defect " << hd << " exceeds " << herm_tol;
        throw NumericError(os.str());
    }
    const double lo = min_eigenvalue();
    if (lo < -positivity_abort) {
        std::ostringstream os;
        os << "density matrix positivity violated: min eigenvalue " << lo << " below -"
           << positivity_abort;
        throw NumericError(os.str());
    }
}

}  // namespace bhc

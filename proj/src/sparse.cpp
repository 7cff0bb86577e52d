#include "bhc/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace bhc {

SparseOperator SparseOperator::from_triplets(int rows, int cols, std::vector<Triplet> ts) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("negative dimension");
    SparseOperator A;
    A.rows_ = rows;
    A.cols_ = cols;
    std::sort(ts.begin(), ts.end(), [](const Triplet& a, const Triplet& b) {
        return a.r != b.r ? a.r < b.r : a.c < b.c;
    });
    A.rowptr_.assign(rows + 1, 0);
    for (const auto& t : ts) {
        if (t.r < 0 || t.r >= rows || t.c < 0 || t.c >= cols)
            throw std::out_of_range("triplet outside matrix");
    }
    // Merge duplicates while filling CSR.
    for (std::size_t i = 0; i < ts.size();) {
        std::size_t j = i;
        std::complex<double> v = 0.0;
        while (j < ts.size() && ts[j].r == ts[i].r && ts[j].c == ts[i].c) v += ts[j++].v;
        if (v != std::complex<double>(0.0)) {
            A.col_.push_back(ts[i].c);
            A.val_.push_back(v);
            ++A.rowptr_[ts[i].r + 1];
        }
        i = j;
    }
    for (int r = 0; r < rows; ++r) A.rowptr_[r + 1] += A.rowptr_[r];
    if (static_cast<long>(rows) * cols > 0 && static_cast<long>(rows) * cols <= dense_cutoff) {
        A.dense_ = A.to_dense_internal();
        A.have_dense_ = true;
    }
    return A;
}

SparseOperator SparseOperator::identity(int n) {
    std::vector<Triplet> ts;
    ts.reserve(n);
    for (int i = 0; i < n; ++i) ts.push_back({i, i, 1.0});
    return from_triplets(n, n, std::move(ts));
}

Eigen::MatrixXcd SparseOperator::to_dense_internal() const {
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(rows_, cols_);
    for (int r = 0; r < rows_; ++r)
        for (int k = rowptr_[r]; k < rowptr_[r + 1]; ++k) M(r, col_[k]) = val_[k];
    return M;
}

Eigen::MatrixXcd SparseOperator::dense() const {
    return have_dense_ ? dense_ : to_dense_internal();
}

void SparseOperator::apply(const std::complex<double>* x, std::complex<double>* y) const {
    if (have_dense_) {
        Eigen::Map<const Eigen::VectorXcd> xm(x, cols_);
        Eigen::Map<Eigen::VectorXcd> ym(y, rows_);
        ym.noalias() = dense_ * xm;
        return;
    }
    for (int r = 0; r < rows_; ++r) {
        std::complex<double> acc = 0.0;
        for (int k = rowptr_[r]; k < rowptr_[r + 1]; ++k) acc += val_[k] * x[col_[k]];
        y[r] = acc;
    }
}

Eigen::VectorXcd SparseOperator::apply(const Eigen::VectorXcd& x) const {
    if (x.size() != cols_) throw std::invalid_argument("operator/vector size mismatch");
    Eigen::VectorXcd y(rows_);
    apply(x.data(), y.data());
    return y;
}

// Y = A X, X dense. Used by the density-matrix machinery.
Eigen::MatrixXcd SparseOperator::apply_left(const Eigen::MatrixXcd& X) const {
    if (X.rows() != cols_) throw std::invalid_argument("operator/matrix size mismatch");
    if (have_dense_) return dense_ * X;
    Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(rows_, X.cols());
    for (int r = 0; r < rows_; ++r)
        for (int k = rowptr_[r]; k < rowptr_[r + 1]; ++k) Y.row(r) += val_[k] * X.row(col_[k]);
    return Y;
}

// Y = X A^dagger.
Eigen::MatrixXcd SparseOperator::apply_right_dagger(const Eigen::MatrixXcd& X) const {
    if (X.cols() != cols_) throw std::invalid_argument("operator/matrix size mismatch");
    if (have_dense_) return X * dense_.adjoint();
    Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(X.rows(), rows_);
    for (int r = 0; r < rows_; ++r)
        for (int k = rowptr_[r]; k < rowptr_[r + 1]; ++k)
            Y.col(r) += std::conj(val_[k]) * X.col(col_[k]);
    return Y;
}

std::complex<double> SparseOperator::coeff(int r, int c) const {
    for (int k = rowptr_[r]; k < rowptr_[r + 1]; ++k)
        if (col_[k] == c) return val_[k];
    return 0.0;
}

double SparseOperator::max_abs() const {
    double m = 0.0;
    for (const auto& v : val_) m = std::max(m, std::abs(v));
    return m;
}

bool SparseOperator::is_hermitian(double rtol) const {
    if (rows_ != cols_) return false;
    double scale = std::max(max_abs(), 1e-300);
    for (int r = 0; r < rows_; ++r)
        for (int k = rowptr_[r]; k < rowptr_[r + 1]; ++k)
            if (std::abs(val_[k] - std::conj(coeff(col_[k], r))) > rtol * scale) return false;
    return true;
}

void SparseOperator::claim_hermitian(double rtol) {
    if (!is_hermitian(rtol)) throw std::logic_error("operator fails the claimed hermiticity check");
    hermitian_ = true;
}

int SparseOperator::nnz() const { return static_cast<int>(val_.size()); }

void SparseOperator::write_triplets(std::ostream& out) const {
    out << "# rows cols nnz\n" << rows_ << ' ' << cols_ << ' ' << nnz() << '\n';
    out.precision(17);
    for (int r = 0; r < rows_; ++r)
        for (int k = rowptr_[r]; k < rowptr_[r + 1]; ++k)
            out << r << ' ' << col_[k] << ' ' << val_[k].real() << ' ' << val_[k].imag() << '\n';
}

SparseOperator SparseOperator::read_triplets(std::istream& in) {
    std::string header;
    std::getline(in, header);  // comment line
    int rows, cols, nnz;
    if (!(in >> rows >> cols >> nnz)) throw std::runtime_error("bad triplet header");
    std::vector<Triplet> ts;
    ts.reserve(nnz);
    for (int i = 0; i < nnz; ++i) {
        int r, c;
        double re, im;
        if (!(in >> r >> c >> re >> im)) throw std::runtime_error("truncated triplet stream");
        ts.push_back({r, c, {re, im}});
    }
    return from_triplets(rows, cols, std::move(ts));
}

}  // namespace bhc

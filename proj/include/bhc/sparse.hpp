#pragma once

#include <Eigen/Dense>
#include <complex>
#include <iosfwd>
#include <vector>

namespace bhc {

struct Triplet {
    int r = 0;
    int c = 0;
    std::complex<double> v;
};

// Compressed-row complex sparse matrix. Matrices small enough to be cheap
// dense (dimension below ~64) additionally carry a dense copy that the
// matrix-vector and matrix-matrix paths prefer.
class SparseOperator {
  public:
    SparseOperator() = default;
    static SparseOperator from_triplets(int rows, int cols, std::vector<Triplet> ts);
    static SparseOperator identity(int n);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int nnz() const;
    bool hermitian() const { return hermitian_; }

    void apply(const std::complex<double>* x, std::complex<double>* y) const;
    Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const;
    Eigen::MatrixXcd apply_left(const Eigen::MatrixXcd& X) const;          // A X
    Eigen::MatrixXcd apply_right_dagger(const Eigen::MatrixXcd& X) const;  // X A^dagger

    Eigen::MatrixXcd dense() const;
    std::complex<double> coeff(int r, int c) const;
    double max_abs() const;

    bool is_hermitian(double rtol = 1e-12) const;
    // Marks the operator Hermitian after verifying it; throws otherwise.
    void claim_hermitian(double rtol = 1e-12);

    // Plain text round trip: header line, then "row col re im" per entry.
    void write_triplets(std::ostream& out) const;
    static SparseOperator read_triplets(std::istream& in);

    template <typename F>
    void for_each(F&& f) const {
        for (int r = 0; r < rows_; ++r)
            for (int k = rowptr_[r]; k < rowptr_[r + 1]; ++k) f(r, col_[k], val_[k]);
    }

  private:
    static constexpr long dense_cutoff = 64L * 64L;
    Eigen::MatrixXcd to_dense_internal() const;

    int rows_ = 0;
    int cols_ = 0;
    std::vector<int> rowptr_{0};
    std::vector<int> col_;
    std::vector<std::complex<double>> val_;
    bool hermitian_ = false;
    bool have_dense_ = false;
    Eigen::MatrixXcd dense_;
};

}  // namespace bhc

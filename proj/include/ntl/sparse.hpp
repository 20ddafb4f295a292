#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

namespace ntl {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Triplet {
    int row = 0;
    int col = 0;
    double value = 0.0;
};

// a * b where each output row depends only on the matching row of a and not
// on its position; tail rows go through a zero-padded panel.
Matrix row_product(const Matrix& a, const Matrix& b);

// Compressed sparse row matrix with columns sorted within each row.
// Duplicate entries are summed on construction; explicit zeros are kept so
// the sparsity pattern reflects the operator's stencil.
class CsrMatrix {
public:
    CsrMatrix() = default;
    CsrMatrix(int rows, int cols, std::vector<Triplet> entries);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t nnz() const { return values_.size(); }

    int row_begin(int row) const { return row_ptr_[static_cast<std::size_t>(row)]; }
    int row_end(int row) const { return row_ptr_[static_cast<std::size_t>(row) + 1]; }
    int col(int k) const { return col_[static_cast<std::size_t>(k)]; }
    double value(int k) const { return values_[static_cast<std::size_t>(k)]; }
    double at(int row, int col) const;

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
    Matrix apply(const Matrix& x) const;
    // Like apply, but each row's terms are summed in ascending value order,
    // which makes the result independent of node numbering.
    Matrix apply_ordered(const Matrix& x) const;
    Matrix apply_transpose(const Matrix& x) const;

    Matrix to_dense() const;

    static CsrMatrix block_diagonal(std::span<const CsrMatrix* const> blocks);

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<int> row_ptr_{0};
    std::vector<int> col_;
    std::vector<double> values_;
};

} // namespace ntl

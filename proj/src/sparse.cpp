#include "ntl/sparse.hpp"

#include "ntl/error.hpp"

#include <algorithm>

namespace ntl {

Matrix row_product(const Matrix& a, const Matrix& b) {
    constexpr Eigen::Index panel = 8;
    const Eigen::Index n = a.rows(), full = n / panel * panel;
    Matrix out(n, b.cols());
    if (full > 0) {
        out.topRows(full).noalias() = a.topRows(full) * b;
    }
    if (n > full) {
        Matrix pad = Matrix::Zero(panel, a.cols());
        pad.topRows(n - full) = a.bottomRows(n - full);
        Matrix tail = pad * b;
        out.bottomRows(n - full) = tail.topRows(n - full);
    }
    return out;
}

CsrMatrix::CsrMatrix(int rows, int cols, std::vector<Triplet> entries)
    : rows_(rows), cols_(cols) {
    for (const auto& t : entries) {
        require(t.row >= 0 && t.row < rows && t.col >= 0 && t.col < cols,
                ErrorCode::DimensionMismatch, "sparse entry out of range");
    }
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    row_ptr_.assign(static_cast<std::size_t>(rows) + 1, 0);
    for (std::size_t k = 0; k < entries.size(); ++k) {
        if (!col_.empty() && k > 0 && entries[k].row == entries[k - 1].row &&
            entries[k].col == entries[k - 1].col) {
            values_.back() += entries[k].value;
            continue;
        }
        col_.push_back(entries[k].col);
        values_.push_back(entries[k].value);
        ++row_ptr_[static_cast<std::size_t>(entries[k].row) + 1];
    }
    for (std::size_t r = 0; r < static_cast<std::size_t>(rows); ++r) {
        row_ptr_[r + 1] += row_ptr_[r];
    }
}

double CsrMatrix::at(int row, int col) const {
    for (int k = row_begin(row); k < row_end(row); ++k) {
        if (col_[static_cast<std::size_t>(k)] == col) {
            return values_[static_cast<std::size_t>(k)];
        }
    }
    return 0.0;
}

Eigen::VectorXd CsrMatrix::apply(const Eigen::VectorXd& x) const {
    require(x.size() == cols_, ErrorCode::DimensionMismatch, "sparse apply: size mismatch");
    Eigen::VectorXd y(rows_);
    for (int r = 0; r < rows_; ++r) {
        double acc = 0.0;
        for (int k = row_begin(r); k < row_end(r); ++k) {
            acc += values_[static_cast<std::size_t>(k)] * x[col_[static_cast<std::size_t>(k)]];
        }
        y[r] = acc;
    }
    return y;
}

Matrix CsrMatrix::apply(const Matrix& x) const {
    require(x.rows() == cols_, ErrorCode::DimensionMismatch, "sparse apply: size mismatch");
    Matrix y = Matrix::Zero(rows_, x.cols());
    for (int r = 0; r < rows_; ++r) {
        for (int k = row_begin(r); k < row_end(r); ++k) {
            y.row(r) += values_[static_cast<std::size_t>(k)] * x.row(col_[static_cast<std::size_t>(k)]);
        }
    }
    return y;
}

Matrix CsrMatrix::apply_ordered(const Matrix& x) const {
    require(x.rows() == cols_, ErrorCode::DimensionMismatch, "sparse apply: size mismatch");
    Matrix y(rows_, x.cols());
    std::vector<double> terms;
    for (int r = 0; r < rows_; ++r) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            terms.clear();
            for (int k = row_begin(r); k < row_end(r); ++k) {
                terms.push_back(values_[static_cast<std::size_t>(k)] *
                                x(col_[static_cast<std::size_t>(k)], c));
            }
            std::sort(terms.begin(), terms.end());
            double acc = 0.0;
            for (double t : terms) {
                acc += t;
            }
            y(r, c) = acc;
        }
    }
    return y;
}

Matrix CsrMatrix::apply_transpose(const Matrix& x) const {
    require(x.rows() == rows_, ErrorCode::DimensionMismatch,
            "sparse transpose apply: size mismatch");
    Matrix y = Matrix::Zero(cols_, x.cols());
    for (int r = 0; r < rows_; ++r) {
        for (int k = row_begin(r); k < row_end(r); ++k) {
            y.row(col_[static_cast<std::size_t>(k)]) += values_[static_cast<std::size_t>(k)] * x.row(r);
        }
    }
    return y;
}

Matrix CsrMatrix::to_dense() const {
    Matrix d = Matrix::Zero(rows_, cols_);
    for (int r = 0; r < rows_; ++r) {
        for (int k = row_begin(r); k < row_end(r); ++k) {
            d(r, col_[static_cast<std::size_t>(k)]) += values_[static_cast<std::size_t>(k)];
        }
    }
    return d;
}

CsrMatrix CsrMatrix::block_diagonal(std::span<const CsrMatrix* const> blocks) {
    CsrMatrix out;
    out.rows_ = 0;
    out.cols_ = 0;
    out.row_ptr_.assign(1, 0);
    for (const CsrMatrix* b : blocks) {
        for (int r = 0; r < b->rows_; ++r) {
            for (int k = b->row_begin(r); k < b->row_end(r); ++k) {
                out.col_.push_back(b->col_[static_cast<std::size_t>(k)] + out.cols_);
                out.values_.push_back(b->values_[static_cast<std::size_t>(k)]);
            }
            out.row_ptr_.push_back(static_cast<int>(out.col_.size()));
        }
        out.rows_ += b->rows_;
        out.cols_ += b->cols_;
    }
    return out;
}

} // namespace ntl

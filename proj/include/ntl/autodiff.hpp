#pragma once

// Tape-based reverse-mode differentiation over dense row-major matrices.

#include "ntl/sparse.hpp"

#include <functional>
#include <unordered_map>
#include <vector>

namespace ntl {

struct Parameter {
    Matrix value;
    Matrix grad;

    Parameter() = default;
    explicit Parameter(Matrix v) : value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

struct Var {
    Tape* tape = nullptr;
    int id = -1;

    const Matrix& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
};

class Tape {
public:
    Var constant(Matrix value);
    // Leaf bound to a parameter; repeated calls return the same variable.
    Var param(Parameter& p);

    Var matmul(Var a, Var b);
    Var add_bias(Var a, Var bias); // bias is 1 x cols, broadcast over rows
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var scale(Var a, double s);
    Var mul(Var a, const Matrix& mask); // elementwise by a constant
    Var add_const(Var a, const Matrix& c);
    Var relu(Var a);
    Var square(Var a);
    Var sum(Var a);
    Var mean(Var a);
    // sum_ij w_i * a_ij with per-row weights
    Var weighted_sum(Var a, const Eigen::VectorXd& row_weights);
    Var concat_cols(const std::vector<Var>& parts);
    Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
    // op * a; op is held by reference until backward. `ordered` sums each
    // row in ascending term order.
    Var sparse(const CsrMatrix& op, Var a, bool ordered = false);
    Var gather_rows(Var a, const std::vector<int>& rows);
    Var reshape(Var a, Eigen::Index rows, Eigen::Index cols); // row-major order

    // Seeds d(loss)/d(loss) = 1 and propagates; loss must be 1 x 1.
    void backward(Var loss);
    const Matrix& grad(Var v);
    // Gradient of a bound parameter after backward; zero when unused.
    Matrix param_grad(const Parameter& p) const;
    // Adds every bound parameter's gradient into Parameter::grad.
    void accumulate_param_grads() const;

    std::size_t size() const { return nodes_.size(); }
    void clear();

    // Sign of every relu input recorded so far, in recording order. Two
    // evaluations with equal patterns lie on the same smooth piece, which
    // finite-difference checks need.
    std::vector<bool> relu_pattern() const;

private:
    struct Node {
        Matrix value;
        Matrix grad;
        std::vector<int> inputs;
        std::function<void(Tape&, int)> backprop;
        bool needs_grad = false;
    };

    Var push(Matrix value, std::vector<int> inputs, std::function<void(Tape&, int)> backprop);
    Matrix& grad_ref(int id);

    std::vector<Node> nodes_;
    std::unordered_map<const Parameter*, int> bound_;
    std::vector<std::pair<Parameter*, int>> params_;
    std::vector<int> relu_inputs_;
    bool has_backward_ = false;

    friend struct Var;
};

} // namespace ntl

#include "ntl/autodiff.hpp"

#include "ntl/error.hpp"

namespace ntl {

namespace {

void same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        fail(ErrorCode::DimensionMismatch,
             std::string(op) + ": shape " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                 " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
}

} // namespace

const Matrix& Var::value() const { return tape->nodes_[static_cast<std::size_t>(id)].value; }

Var Tape::push(Matrix value, std::vector<int> inputs, std::function<void(Tape&, int)> backprop) {
    Node n;
    n.value = std::move(value);
    for (int i : inputs) {
        n.needs_grad = n.needs_grad || nodes_[static_cast<std::size_t>(i)].needs_grad;
    }
    n.inputs = std::move(inputs);
    if (n.needs_grad) {
        n.backprop = std::move(backprop);
    }
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad_ref(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) {
        n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    }
    return n.grad;
}

Var Tape::constant(Matrix value) {
    Node n;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(Parameter& p) {
    auto it = bound_.find(&p);
    if (it != bound_.end()) {
        return Var{this, it->second};
    }
    Node n;
    n.value = p.value;
    n.needs_grad = true;
    nodes_.push_back(std::move(n));
    int id = static_cast<int>(nodes_.size()) - 1;
    bound_.emplace(&p, id);
    params_.emplace_back(&p, id);
    return Var{this, id};
}

Var Tape::matmul(Var a, Var b) {
    if (a.cols() != b.rows()) {
        fail(ErrorCode::DimensionMismatch, "matmul: inner dimensions differ");
    }
    Matrix out = row_product(a.value(), b.value());
    int ia = a.id, ib = b.id;
    return push(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
        const Matrix& g = t.nodes_[static_cast<std::size_t>(self)].grad;
        if (t.nodes_[static_cast<std::size_t>(ia)].needs_grad) {
            t.grad_ref(ia).noalias() += g * t.nodes_[static_cast<std::size_t>(ib)].value.transpose();
        }
        if (t.nodes_[static_cast<std::size_t>(ib)].needs_grad) {
            t.grad_ref(ib).noalias() += t.nodes_[static_cast<std::size_t>(ia)].value.transpose() * g;
        }
    });
}

Var Tape::add_bias(Var a, Var bias) {
    if (bias.rows() != 1 || bias.cols() != a.cols()) {
        fail(ErrorCode::DimensionMismatch, "add_bias: bias must be 1 x cols");
    }
    Matrix out = a.value().rowwise() + bias.value().row(0);
    int ia = a.id, ib = bias.id;
    return push(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
        const Matrix& g = t.nodes_[static_cast<std::size_t>(self)].grad;
        if (t.nodes_[static_cast<std::size_t>(ia)].needs_grad) {
            t.grad_ref(ia) += g;
        }
        if (t.nodes_[static_cast<std::size_t>(ib)].needs_grad) {
            t.grad_ref(ib) += g.colwise().sum();
        }
    });
}

Var Tape::add(Var a, Var b) {
    same_shape(a.value(), b.value(), "add");
    Matrix out = a.value() + b.value();
    int ia = a.id, ib = b.id;
    return push(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
        const Matrix& g = t.nodes_[static_cast<std::size_t>(self)].grad;
        if (t.nodes_[static_cast<std::size_t>(ia)].needs_grad) t.grad_ref(ia) += g;
        if (t.nodes_[static_cast<std::size_t>(ib)].needs_grad) t.grad_ref(ib) += g;
    });
}

Var Tape::sub(Var a, Var b) {
    same_shape(a.value(), b.value(), "sub");
    Matrix out = a.value() - b.value();
    int ia = a.id, ib = b.id;
    return push(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
        const Matrix& g = t.nodes_[static_cast<std::size_t>(self)].grad;
        if (t.nodes_[static_cast<std::size_t>(ia)].needs_grad) t.grad_ref(ia) += g;
        if (t.nodes_[static_cast<std::size_t>(ib)].needs_grad) t.grad_ref(ib) -= g;
    });
}

Var Tape::scale(Var a, double s) {
    Matrix out = s * a.value();
    int ia = a.id;
    return push(std::move(out), {ia}, [ia, s](Tape& t, int self) {
        t.grad_ref(ia) += s * t.nodes_[static_cast<std::size_t>(self)].grad;
    });
}

Var Tape::mul(Var a, const Matrix& mask) {
    same_shape(a.value(), mask, "mul");
    Matrix out = a.value().cwiseProduct(mask);
    int ia = a.id;
    return push(std::move(out), {ia}, [ia, mask](Tape& t, int self) {
        t.grad_ref(ia) += t.nodes_[static_cast<std::size_t>(self)].grad.cwiseProduct(mask);
    });
}

Var Tape::add_const(Var a, const Matrix& c) {
    same_shape(a.value(), c, "add_const");
    Matrix out = a.value() + c;
    int ia = a.id;
    return push(std::move(out), {ia}, [ia](Tape& t, int self) {
        t.grad_ref(ia) += t.nodes_[static_cast<std::size_t>(self)].grad;
    });
}

Var Tape::relu(Var a) {
    Matrix out = a.value().cwiseMax(0.0);
    int ia = a.id;
    relu_inputs_.push_back(ia);
    return push(std::move(out), {ia}, [ia](Tape& t, int self) {
        const Matrix& x = t.nodes_[static_cast<std::size_t>(ia)].value;
        const Matrix& g = t.nodes_[static_cast<std::size_t>(self)].grad;
        t.grad_ref(ia) += (x.array() > 0.0).select(g, 0.0).matrix();
    });
}

Var Tape::square(Var a) {
    Matrix out = a.value().cwiseAbs2();
    int ia = a.id;
    return push(std::move(out), {ia}, [ia](Tape& t, int self) {
        const Matrix& x = t.nodes_[static_cast<std::size_t>(ia)].value;
        t.grad_ref(ia) += 2.0 * x.cwiseProduct(t.nodes_[static_cast<std::size_t>(self)].grad);
    });
}

Var Tape::sum(Var a) {
    Matrix out(1, 1);
    out(0, 0) = a.value().sum();
    int ia = a.id;
    return push(std::move(out), {ia}, [ia](Tape& t, int self) {
        t.grad_ref(ia).array() += t.nodes_[static_cast<std::size_t>(self)].grad(0, 0);
    });
}

Var Tape::mean(Var a) {
    const double n = static_cast<double>(a.value().size());
    if (n == 0) {
        fail(ErrorCode::DimensionMismatch, "mean of an empty matrix");
    }
    return scale(sum(a), 1.0 / n);
}

Var Tape::weighted_sum(Var a, const Eigen::VectorXd& w) {
    if (w.size() != a.rows()) {
        fail(ErrorCode::DimensionMismatch, "weighted_sum: weight count differs from rows");
    }
    Matrix out(1, 1);
    out(0, 0) = (a.value().array().colwise() * w.array()).sum();
    int ia = a.id;
    return push(std::move(out), {ia}, [ia, w](Tape& t, int self) {
        double g = t.nodes_[static_cast<std::size_t>(self)].grad(0, 0);
        Matrix& ga = t.grad_ref(ia);
        ga.array().colwise() += g * w.array();
    });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) {
        fail(ErrorCode::DimensionMismatch, "concat_cols: no inputs");
    }
    Eigen::Index rows = parts.front().rows(), cols = 0;
    std::vector<int> ids;
    std::vector<Eigen::Index> offsets;
    for (const Var& p : parts) {
        if (p.rows() != rows) {
            fail(ErrorCode::DimensionMismatch, "concat_cols: row counts differ");
        }
        offsets.push_back(cols);
        cols += p.cols();
        ids.push_back(p.id);
    }
    Matrix out(rows, cols);
    for (std::size_t k = 0; k < parts.size(); ++k) {
        out.middleCols(offsets[k], parts[k].cols()) = parts[k].value();
    }
    return push(std::move(out), ids, [ids, offsets](Tape& t, int self) {
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (!t.nodes_[static_cast<std::size_t>(ids[k])].needs_grad) continue;
            Matrix& g = t.grad_ref(ids[k]);
            g += t.nodes_[static_cast<std::size_t>(self)].grad.middleCols(offsets[k], g.cols());
        }
    });
}

Var Tape::slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.cols()) {
        fail(ErrorCode::DimensionMismatch, "slice_cols: range out of bounds");
    }
    Matrix out = a.value().middleCols(start, count);
    int ia = a.id;
    return push(std::move(out), {ia}, [ia, start, count](Tape& t, int self) {
        t.grad_ref(ia).middleCols(start, count) += t.nodes_[static_cast<std::size_t>(self)].grad;
    });
}

Var Tape::sparse(const CsrMatrix& op, Var a, bool ordered) {
    Matrix out = ordered ? op.apply_ordered(a.value()) : op.apply(a.value());
    int ia = a.id;
    const CsrMatrix* ptr = &op;
    return push(std::move(out), {ia}, [ia, ptr](Tape& t, int self) {
        t.grad_ref(ia) += ptr->apply_transpose(t.nodes_[static_cast<std::size_t>(self)].grad);
    });
}

Var Tape::gather_rows(Var a, const std::vector<int>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] < 0 || rows[r] >= a.rows()) {
            fail(ErrorCode::DimensionMismatch, "gather_rows: index out of range");
        }
        out.row(static_cast<Eigen::Index>(r)) = a.value().row(rows[r]);
    }
    int ia = a.id;
    return push(std::move(out), {ia}, [ia, rows](Tape& t, int self) {
        Matrix& ga = t.grad_ref(ia);
        const Matrix& g = t.nodes_[static_cast<std::size_t>(self)].grad;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            ga.row(rows[r]) += g.row(static_cast<Eigen::Index>(r));
        }
    });
}

Var Tape::reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
    if (rows * cols != a.value().size()) {
        fail(ErrorCode::DimensionMismatch, "reshape: element count differs");
    }
    Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
    int ia = a.id;
    return push(std::move(out), {ia}, [ia](Tape& t, int self) {
        Matrix& ga = t.grad_ref(ia);
        const Matrix& g = t.nodes_[static_cast<std::size_t>(self)].grad;
        ga += Eigen::Map<const Matrix>(g.data(), ga.rows(), ga.cols());
    });
}

void Tape::backward(Var loss) {
    if (nodes_.empty() || loss.tape != this || loss.id < 0 ||
        loss.id >= static_cast<int>(nodes_.size())) {
        fail(ErrorCode::GraphNotBuilt, "backward called without a recorded forward pass");
    }
    if (loss.rows() != 1 || loss.cols() != 1) {
        fail(ErrorCode::DimensionMismatch, "backward needs a scalar loss");
    }
    for (auto& n : nodes_) {
        n.grad.resize(0, 0);
    }
    grad_ref(loss.id)(0, 0) = 1.0;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.backprop && n.grad.size() != 0) {
            n.backprop(*this, id);
        }
    }
    has_backward_ = true;
}

const Matrix& Tape::grad(Var v) {
    return grad_ref(v.id);
}

Matrix Tape::param_grad(const Parameter& p) const {
    auto it = bound_.find(&p);
    if (it == bound_.end() || nodes_[static_cast<std::size_t>(it->second)].grad.size() == 0) {
        return Matrix::Zero(p.value.rows(), p.value.cols());
    }
    return nodes_[static_cast<std::size_t>(it->second)].grad;
}

void Tape::accumulate_param_grads() const {
    if (!has_backward_) {
        fail(ErrorCode::GraphNotBuilt, "no backward pass recorded");
    }
    for (auto [p, id] : params_) {
        const Matrix& g = nodes_[static_cast<std::size_t>(id)].grad;
        if (g.size() != 0) {
            if (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols()) {
                p->zero_grad();
            }
            p->grad += g;
        }
    }
}

void Tape::clear() {
    nodes_.clear();
    bound_.clear();
    params_.clear();
    relu_inputs_.clear();
    has_backward_ = false;
}

std::vector<bool> Tape::relu_pattern() const {
    std::vector<bool> out;
    for (int id : relu_inputs_) {
        const Matrix& x = nodes_[static_cast<std::size_t>(id)].value;
        for (Eigen::Index i = 0; i < x.size(); ++i) out.push_back(x.data()[i] > 0.0);
    }
    return out;
}

} // namespace ntl

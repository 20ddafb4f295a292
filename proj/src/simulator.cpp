#include "ntl/simulator.hpp"

#include "ntl/error.hpp"
#include "ntl/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>

namespace ntl {

using nlohmann::json;

std::string_view to_string(OutputMode mode) {
    return mode == OutputMode::Absolute ? "absolute" : "increment";
}

OutputMode output_mode_from_string(std::string_view text) {
    if (text == "absolute") return OutputMode::Absolute;
    if (text == "increment") return OutputMode::Increment;
    fail(ErrorCode::InvalidArgument, "unknown output mode '" + std::string(text) + "'");
}

MessageOperator message_operator(const ComputationGraph& graph) {
    const int n = static_cast<int>(graph.size());
    std::vector<Triplet> entries;
    entries.reserve(graph.edges.size() * 4);
    std::vector<std::vector<double>> lengths(static_cast<std::size_t>(n));
    for (const GraphEdge& e : graph.edges) {
        double w = 1.0 / e.length;
        entries.push_back({e.a, e.b, w});
        entries.push_back({e.b, e.a, w});
        lengths[static_cast<std::size_t>(e.a)].push_back(e.length);
        lengths[static_cast<std::size_t>(e.b)].push_back(e.length);
    }
    // Diagonals and length sums in sorted order, independent of numbering.
    auto sorted_sum = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    };
    MessageOperator op;
    op.length_sum = Matrix::Zero(n, 1);
    for (int i = 0; i < n; ++i) {
        const auto& l = lengths[static_cast<std::size_t>(i)];
        std::vector<double> w(l.size());
        std::transform(l.begin(), l.end(), w.begin(), [](double x) { return 1.0 / x; });
        entries.push_back({i, i, -sorted_sum(w)});
        op.length_sum(i, 0) = sorted_sum(l);
    }
    op.gradient = CsrMatrix(n, n, std::move(entries));
    op.keep = Matrix::Ones(n, 2);
    for (int h : graph.held_nodes) {
        op.keep.row(h).setZero();
    }
    return op;
}

MessageOperator stack_operators(std::span<const MessageOperator* const> parts) {
    std::vector<const CsrMatrix*> blocks;
    Eigen::Index rows = 0;
    for (const MessageOperator* p : parts) {
        blocks.push_back(&p->gradient);
        rows += p->length_sum.rows();
    }
    MessageOperator out;
    out.gradient = CsrMatrix::block_diagonal(blocks);
    out.length_sum.resize(rows, 1);
    out.keep.resize(rows, 2);
    Eigen::Index r = 0;
    for (const MessageOperator* p : parts) {
        out.length_sum.middleRows(r, p->length_sum.rows()) = p->length_sum;
        out.keep.middleRows(r, p->keep.rows()) = p->keep;
        r += p->length_sum.rows();
    }
    return out;
}

Matrix edge_attributes(const ComputationGraph& graph, const Matrix& conc, bool reversed) {
    Matrix out(static_cast<Eigen::Index>(graph.edges.size()), 3);
    for (std::size_t k = 0; k < graph.edges.size(); ++k) {
        const GraphEdge& e = graph.edges[k];
        int from = reversed ? e.b : e.a;
        int to = reversed ? e.a : e.b;
        auto r = static_cast<Eigen::Index>(k);
        out(r, 0) = (conc(to, 0) - conc(from, 0)) / e.length;
        out(r, 1) = (conc(to, 1) - conc(from, 1)) / e.length;
        out(r, 2) = e.length;
    }
    return out;
}

Matrix aggregate(const ComputationGraph& graph, const Matrix& conc) {
    const auto n = static_cast<Eigen::Index>(graph.size());
    if (conc.rows() != n || conc.cols() != 2) {
        fail(ErrorCode::DimensionMismatch, "aggregate: concentration matrix must be n x 2");
    }
    Matrix fwd = edge_attributes(graph, conc, false);
    Matrix out = Matrix::Zero(n, 3);
    for (std::size_t k = 0; k < graph.edges.size(); ++k) {
        const GraphEdge& e = graph.edges[k];
        auto r = static_cast<Eigen::Index>(k);
        out(e.a, 0) += fwd(r, 0);
        out(e.a, 1) += fwd(r, 1);
        out(e.a, 2) += fwd(r, 2);
        out(e.b, 0) -= fwd(r, 0);
        out(e.b, 1) -= fwd(r, 1);
        out(e.b, 2) += fwd(r, 2);
    }
    return out;
}

Matrix dirichlet_values(const ComputationGraph& graph, const BoundaryCondition& bc) {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(graph.size()), 2);
    for (int h : graph.held_nodes) {
        out(h, 0) = bc.c_in;
        out(h, 1) = bc.lambda_in * bc.c_in;
    }
    return out;
}

UnitKind graph_kind(const ComputationGraph& graph) {
    for (std::size_t s = 0; s < graph.sections.size(); ++s) {
        if (graph.section_slots(static_cast<int>(s)) == kBranchSlots) {
            return UnitKind::Bifurcation;
        }
    }
    return UnitKind::Pipe;
}

// ---------------------------------------------------------------------------

SimulatorModel::SimulatorModel(UnitKind kind, SimulatorConfig config)
    : kind_(kind), config_(config) {
    if (config_.blocks < 1 || config_.width < 2) {
        fail(ErrorCode::InvalidArgument, "simulator needs at least one block and width >= 2");
    }
    const int w = config_.width;
    encoder_ = Mlp({kFeatureWidth, w});
    for (int l = 0; l < config_.blocks; ++l) {
        blocks_.emplace_back(std::vector<int>{w + 3, w, w, w});
    }
    decoder_ = Mlp({w, w, w, w, 2});
}

void SimulatorModel::init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    encoder_.init_glorot(rng);
    for (Mlp& b : blocks_) b.init_glorot(rng);
    decoder_.init_glorot(rng);
}

Matrix SimulatorModel::forward(const Matrix& features, const MessageOperator& op) const {
    const Eigen::Index n = features.rows();
    if (features.cols() != kFeatureWidth || op.length_sum.rows() != n || op.gradient.rows() != n) {
        fail(ErrorCode::DimensionMismatch, "simulator forward: features or operator shape mismatch");
    }
    const int w = config_.width;
    Matrix h = encoder_.forward(features);
    Matrix c = features.middleCols(kFeatureWidth - 2, 2);
    Matrix in(n, w + 3);
    for (const Mlp& block : blocks_) {
        in.leftCols(w) = h;
        in.middleCols(w, 2) = op.gradient.apply_ordered(c);
        in.col(w + 2) = op.length_sum.col(0);
        h = block.forward(in);
        c = h.leftCols(2);
    }
    Matrix out = decoder_.forward(h);
    if (config_.output == OutputMode::Increment) {
        out += features.middleCols(kFeatureWidth - 2, 2);
    }
    return out;
}

Var SimulatorModel::forward(Tape& tape, const Matrix& features, const MessageOperator& op) {
    const Eigen::Index n = features.rows();
    if (features.cols() != kFeatureWidth || op.length_sum.rows() != n || op.gradient.rows() != n) {
        fail(ErrorCode::DimensionMismatch, "simulator forward: features or operator shape mismatch");
    }
    Var x = tape.constant(features);
    Var h = encoder_.forward(tape, x);
    Var c = tape.constant(features.middleCols(kFeatureWidth - 2, 2));
    Var len = tape.constant(op.length_sum);
    for (Mlp& block : blocks_) {
        Var agg = tape.sparse(op.gradient, c, true);
        h = block.forward(tape, tape.concat_cols({h, agg, len}));
        c = tape.slice_cols(h, 0, 2);
    }
    Var out = decoder_.forward(tape, h);
    if (config_.output == OutputMode::Increment) {
        out = tape.add_const(out, features.middleCols(kFeatureWidth - 2, 2));
    }
    return out;
}

std::vector<Parameter*> SimulatorModel::parameters() {
    std::vector<Parameter*> out = encoder_.parameters();
    for (Mlp& b : blocks_) {
        auto p = b.parameters();
        out.insert(out.end(), p.begin(), p.end());
    }
    auto d = decoder_.parameters();
    out.insert(out.end(), d.begin(), d.end());
    return out;
}

std::vector<const Parameter*> SimulatorModel::parameters() const {
    std::vector<const Parameter*> out = encoder_.parameters();
    for (const Mlp& b : blocks_) {
        auto p = b.parameters();
        out.insert(out.end(), p.begin(), p.end());
    }
    auto d = decoder_.parameters();
    out.insert(out.end(), d.begin(), d.end());
    return out;
}

namespace {

json architecture_json(const SimulatorModel& m) {
    return json{{"model", "gn-simulator"},
                {"kind", std::string(to_string(m.kind()))},
                {"blocks", m.config().blocks},
                {"width", m.config().width},
                {"output", std::string(to_string(m.config().output))},
                {"features", kFeatureWidth}};
}

void check_kind(const SimulatorModel& model, const ComputationGraph& graph) {
    UnitKind k = graph_kind(graph);
    if (k != model.kind()) {
        fail(ErrorCode::KindMismatch, "model is a " + std::string(to_string(model.kind())) +
                                          " simulator but the graph is a " +
                                          std::string(to_string(k)));
    }
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

} // namespace

std::string SimulatorModel::architecture() const { return architecture_json(*this).dump(); }

Matrix predict_step(const SimulatorModel& model, const ComputationGraph& graph, const Matrix& features,
                    const BoundaryCondition& bc) {
    check_kind(model, graph);
    if (features.rows() != static_cast<Eigen::Index>(graph.size()) || features.cols() != kFeatureWidth) {
        fail(ErrorCode::DimensionMismatch, "features must be " + std::to_string(graph.size()) + " x " +
                                               std::to_string(kFeatureWidth));
    }
    MessageOperator op = message_operator(graph);
    Matrix out = model.forward(features, op);
    return out.cwiseProduct(op.keep) + dirichlet_values(graph, bc);
}

FieldSeries rollout(const SimulatorModel& model, const ComputationGraph& graph, const SimParams& params,
                    const BoundaryCondition& bc, const State& initial, int steps) {
    if (steps < 1) {
        fail(ErrorCode::InvalidArgument, "rollout needs steps >= 1");
    }
    check_kind(model, graph);
    if (initial.size() != graph.size()) {
        fail(ErrorCode::DimensionMismatch, "initial state size differs from graph");
    }
    MessageOperator op = message_operator(graph);
    Matrix dirichlet = dirichlet_values(graph, bc);
    Matrix features = node_features(graph, params, initial);
    FieldSeries series;
    series.times.push_back(0.0);
    series.c0.push_back(initial.c0);
    series.c_plus.push_back(initial.c_plus);
    for (int k = 1; k <= steps; ++k) {
        Matrix next = model.forward(features, op).cwiseProduct(op.keep) + dirichlet;
        if (!all_finite(next)) {
            fail(ErrorCode::NonFiniteState, "rollout produced a non-finite value at step " + std::to_string(k));
        }
        features.middleCols(kFeatureWidth - 2, 2) = next;
        series.times.push_back(k * params.dt);
        series.c0.emplace_back(next.col(0));
        series.c_plus.emplace_back(next.col(1));
    }
    return series;
}

// ---------------------------------------------------------------------------

void graph_loss_weights(const ComputationGraph& graph, Eigen::VectorXd& node_weight,
                        Eigen::VectorXd& residual_weight) {
    const auto n = static_cast<Eigen::Index>(graph.size());
    std::vector<char> boundary(graph.size(), 0);
    for (int h : graph.held_nodes) boundary[static_cast<std::size_t>(h)] = 1;
    for (int c : graph.closure_nodes) boundary[static_cast<std::size_t>(c)] = 1;
    const auto interior = std::count(boundary.begin(), boundary.end(), 0);
    node_weight = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    residual_weight = Eigen::VectorXd::Zero(n);
    if (interior > 0) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!boundary[static_cast<std::size_t>(i)]) {
                residual_weight(i) = 1.0 / static_cast<double>(interior);
            }
        }
    }
}

std::string_view to_string(ResidualScaling scaling) {
    return scaling == ResidualScaling::Diagonal ? "diagonal" : "none";
}

ResidualScaling residual_scaling_from_string(std::string_view text) {
    if (text == "none") return ResidualScaling::None;
    if (text == "diagonal") return ResidualScaling::Diagonal;
    fail(ErrorCode::ConfigError, "unknown residual scaling '" + std::string(text) + "'");
}

void scaled_residual_weights(const Eigen::VectorXd& residual_weight, const DiscreteOperators& ops,
                             const SimParams& p, ResidualScaling scaling, Eigen::VectorXd& w0,
                             Eigen::VectorXd& w_plus) {
    const Eigen::Index n = residual_weight.size();
    if (ops.laplacian.rows() != n || ops.upwind.rows() != n) {
        fail(ErrorCode::DimensionMismatch, "residual weights and operators differ in size");
    }
    w0 = residual_weight;
    w_plus = residual_weight;
    if (scaling == ResidualScaling::None) return;
    const double inv_dt = 1.0 / p.dt;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int r = static_cast<int>(i);
        const double a0 = inv_dt + p.k_plus + p.D * std::abs(ops.laplacian.at(r, r));
        const double ap = inv_dt + p.kp_plus + std::abs(ops.upwind.at(r, r));
        w0(i) /= a0 * a0;
        w_plus(i) /= ap * ap;
    }
}

Var simulator_loss(Tape& tape, Var pred, const LossInputs& in, double residual_weight, LossTerms* terms) {
    const Eigen::Index n = pred.rows();
    if (pred.cols() != 2 || in.truth.rows() != n || in.truth.cols() != 2 || in.prev.rows() != n ||
        in.prev.cols() != 2 || in.node_weight.size() != n || in.residual_weight.size() != n ||
        (in.residual_weight_plus.size() != 0 && in.residual_weight_plus.size() != n)) {
        fail(ErrorCode::DimensionMismatch, "simulator_loss: inconsistent shapes");
    }
    if (residual_weight < 0.0) {
        fail(ErrorCode::InvalidArgument, "residual weight must be >= 0");
    }
    Var err = tape.add_const(pred, -in.truth);
    Var mse = tape.weighted_sum(tape.square(err), in.node_weight);
    Var total = mse;
    double r0v = 0.0, rpv = 0.0;
    if (residual_weight > 0.0) {
        if (in.laplacian == nullptr || in.upwind == nullptr || in.laplacian->rows() != n ||
            in.upwind->rows() != n) {
            fail(ErrorCode::DimensionMismatch, "simulator_loss: operators missing or sized wrongly");
        }
        const SimParams& p = in.params;
        const double inv_dt = 1.0 / p.dt;
        Var c0 = tape.slice_cols(pred, 0, 1);
        Var cp = tape.slice_cols(pred, 1, 1);
        Var r0 = tape.add(tape.scale(c0, inv_dt + p.k_plus), tape.scale(tape.sparse(*in.laplacian, c0), -p.D));
        r0 = tape.add_const(tape.sub(r0, tape.scale(cp, p.kp_plus)), -inv_dt * in.prev.col(0));
        Var rp = tape.add(tape.scale(cp, inv_dt + p.kp_plus), tape.sparse(*in.upwind, cp));
        rp = tape.add_const(tape.sub(rp, tape.scale(c0, p.k_plus)), -inv_dt * in.prev.col(1));
        Var r0s = tape.weighted_sum(tape.square(r0), in.residual_weight);
        Var rps = tape.weighted_sum(tape.square(rp), in.residual_weight_plus.size() == n ? in.residual_weight_plus
                                                                                         : in.residual_weight);
        r0v = r0s.value()(0, 0);
        rpv = rps.value()(0, 0);
        total = tape.add(mse, tape.scale(tape.add(r0s, rps), residual_weight));
    }
    if (terms != nullptr) {
        terms->mse = mse.value()(0, 0);
        terms->r0 = r0v;
        terms->r_plus = rpv;
        terms->total = total.value()(0, 0);
    }
    return total;
}

LossTerms simulator_loss(const Matrix& pred, const Matrix& truth, const State& prev,
                         const ComputationGraph& graph, const DiscreteOperators& ops, const SimParams& params,
                         double residual_weight, ResidualScaling scaling) {
    if (prev.size() != graph.size()) {
        fail(ErrorCode::DimensionMismatch, "simulator_loss: previous state size differs from graph");
    }
    LossInputs in;
    in.laplacian = &ops.laplacian;
    in.upwind = &ops.upwind;
    in.prev.resize(static_cast<Eigen::Index>(graph.size()), 2);
    in.prev.col(0) = prev.c0;
    in.prev.col(1) = prev.c_plus;
    in.truth = truth;
    in.params = params;
    graph_loss_weights(graph, in.node_weight, in.residual_weight);
    Eigen::VectorXd w0, wp;
    scaled_residual_weights(in.residual_weight, ops, params, scaling, w0, wp);
    in.residual_weight = w0;
    in.residual_weight_plus = wp;
    Tape tape;
    LossTerms terms;
    simulator_loss(tape, tape.constant(pred), in, residual_weight, &terms);
    return terms;
}

Matrix residuals(const Matrix& pred, const Matrix& prev, const DiscreteOperators& ops, const SimParams& p) {
    const Eigen::Index n = pred.rows();
    if (pred.cols() != 2 || prev.rows() != n || prev.cols() != 2 || ops.laplacian.rows() != n) {
        fail(ErrorCode::DimensionMismatch, "residuals: inconsistent shapes");
    }
    Eigen::VectorXd c0 = pred.col(0), cp = pred.col(1);
    Eigen::VectorXd lap = ops.laplacian.apply(c0);
    Eigen::VectorXd adv = ops.upwind.apply(cp);
    Matrix out(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        out(i, 0) = (c0(i) - prev(i, 0)) / p.dt - p.D * lap(i) + p.k_plus * c0(i) - p.kp_plus * cp(i);
        out(i, 1) = (cp(i) - prev(i, 1)) / p.dt + adv(i) - p.k_plus * c0(i) + p.kp_plus * cp(i);
    }
    return out;
}

// ---------------------------------------------------------------------------

std::pair<std::vector<int>, std::vector<int>> split_geometries(int count, double train_fraction,
                                                               std::uint64_t seed) {
    if (count < 1) {
        fail(ErrorCode::EmptyDataset, "no geometries to split");
    }
    if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
        fail(ErrorCode::InvalidArgument, "train fraction must be in (0, 1]");
    }
    std::vector<int> ids(static_cast<std::size_t>(count));
    std::iota(ids.begin(), ids.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    int n_train = static_cast<int>(std::lround(train_fraction * count));
    n_train = std::clamp(n_train, 1, count);
    if (n_train == count && count > 1 && train_fraction < 1.0) {
        n_train = count - 1;
    }
    std::vector<int> train(ids.begin(), ids.begin() + n_train);
    std::vector<int> test(ids.begin() + n_train, ids.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {train, test};
}

namespace {

struct GeometryCache {
    MessageOperator op;
    DiscreteOperators ops;
    Matrix features; // with zero state
    Eigen::VectorXd node_weight;
    Eigen::VectorXd residual_weight;
    Eigen::VectorXd residual_weight_plus;
};

std::vector<GeometryCache> build_cache(const SimDataset& data, ResidualScaling scaling) {
    std::vector<GeometryCache> cache;
    cache.reserve(data.graphs.size());
    for (const ComputationGraph& g : data.graphs) {
        GeometryCache c;
        c.op = message_operator(g);
        c.ops = build_operators(g);
        c.features = node_features(g, data.params, State::zeros(g.size()));
        graph_loss_weights(g, c.node_weight, c.residual_weight);
        Eigen::VectorXd w = c.residual_weight;
        scaled_residual_weights(w, c.ops, data.params, scaling, c.residual_weight, c.residual_weight_plus);
        cache.push_back(std::move(c));
    }
    return cache;
}

struct Batch {
    Matrix features;
    MessageOperator op;
    CsrMatrix laplacian;
    CsrMatrix upwind;
    Matrix dirichlet;
    LossInputs loss;
    std::vector<Eigen::Index> offsets; // size samples + 1
};

Batch make_batch(const SimDataset& data, const std::vector<GeometryCache>& cache,
                 std::span<const int> ids) {
    Batch b;
    std::vector<const MessageOperator*> mops;
    std::vector<const CsrMatrix*> laps, ups;
    Eigen::Index rows = 0;
    b.offsets.push_back(0);
    for (int id : ids) {
        const SimSample& s = data.samples[static_cast<std::size_t>(id)];
        const GeometryCache& c = cache[static_cast<std::size_t>(s.geometry)];
        mops.push_back(&c.op);
        laps.push_back(&c.ops.laplacian);
        ups.push_back(&c.ops.upwind);
        rows += c.features.rows();
        b.offsets.push_back(rows);
    }
    b.op = stack_operators(mops);
    b.laplacian = CsrMatrix::block_diagonal(laps);
    b.upwind = CsrMatrix::block_diagonal(ups);
    b.features.resize(rows, kFeatureWidth);
    b.dirichlet = Matrix::Zero(rows, 2);
    b.loss.prev.resize(rows, 2);
    b.loss.truth.resize(rows, 2);
    b.loss.node_weight.resize(rows);
    b.loss.residual_weight.resize(rows);
    b.loss.residual_weight_plus.resize(rows);
    const double inv_b = 1.0 / static_cast<double>(ids.size());
    for (std::size_t k = 0; k < ids.size(); ++k) {
        const SimSample& s = data.samples[static_cast<std::size_t>(ids[k])];
        const GeometryCache& c = cache[static_cast<std::size_t>(s.geometry)];
        const ComputationGraph& g = data.graphs[static_cast<std::size_t>(s.geometry)];
        Eigen::Index r = b.offsets[k], n = c.features.rows();
        if (s.prev.rows() != n || s.truth.rows() != n) {
            fail(ErrorCode::DimensionMismatch, "sample rows differ from its geometry");
        }
        b.features.middleRows(r, n) = c.features;
        b.features.block(r, kFeatureWidth - 2, n, 2) = s.prev;
        for (int h : g.held_nodes) {
            b.dirichlet(r + h, 0) = s.c_in;
            b.dirichlet(r + h, 1) = s.lambda_in * s.c_in;
        }
        b.loss.prev.middleRows(r, n) = s.prev;
        b.loss.truth.middleRows(r, n) = s.truth;
        b.loss.node_weight.segment(r, n) = c.node_weight * inv_b;
        b.loss.residual_weight.segment(r, n) = c.residual_weight * inv_b;
        b.loss.residual_weight_plus.segment(r, n) = c.residual_weight_plus * inv_b;
    }
    b.loss.laplacian = &b.laplacian;
    b.loss.upwind = &b.upwind;
    b.loss.params = data.params;
    return b;
}

struct EvalResult {
    double loss = 0.0;
    double mre = 0.0;
};

// Loss and mean one-step MRE over samples, batched without recording.
EvalResult evaluate(const SimulatorModel& model, const SimDataset& data, const std::vector<GeometryCache>& cache,
                    std::span<const int> ids, int batch_size, double residual_weight) {
    EvalResult r;
    if (ids.empty()) return r;
    double loss = 0.0, mre_sum = 0.0;
    int mre_count = 0;
    for (std::size_t start = 0; start < ids.size(); start += static_cast<std::size_t>(batch_size)) {
        auto chunk = ids.subspan(start, std::min<std::size_t>(static_cast<std::size_t>(batch_size), ids.size() - start));
        Batch b = make_batch(data, cache, chunk);
        Matrix pred = model.forward(b.features, b.op).cwiseProduct(b.op.keep) + b.dirichlet;
        Tape tape;
        Var l = simulator_loss(tape, tape.constant(pred), b.loss, residual_weight);
        loss += l.value()(0, 0) * static_cast<double>(chunk.size());
        for (std::size_t k = 0; k < chunk.size(); ++k) {
            Eigen::Index off = b.offsets[k], n = b.offsets[k + 1] - off;
            Matrix p = pred.middleRows(off, n), t = b.loss.truth.middleRows(off, n);
            Eigen::VectorXd pv(2 * n), tv(2 * n);
            pv << p.col(0), p.col(1);
            tv << t.col(0), t.col(1);
            try {
                mre_sum += mre(pv, tv);
                ++mre_count;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::DegenerateRange) throw;
            }
        }
    }
    r.loss = loss / static_cast<double>(ids.size());
    r.mre = mre_count > 0 ? mre_sum / mre_count : 0.0;
    return r;
}

json history_json(const std::vector<EpochRecord>& history) {
    json out = json::array();
    for (const EpochRecord& e : history) {
        out.push_back({e.epoch, e.lr, e.train_loss, e.test_loss, e.test_mre});
    }
    return out;
}

std::vector<EpochRecord> history_from_json(const json& j) {
    std::vector<EpochRecord> out;
    for (const json& e : j) {
        out.push_back({e.at(0).get<int>(), e.at(1).get<double>(), e.at(2).get<double>(),
                       e.at(3).get<double>(), e.at(4).get<double>()});
    }
    return out;
}

json train_config_json(const SimTrainConfig& c, const SimDataset& data) {
    return json{{"kind", std::string(to_string(data.kind))},
                {"epochs", c.epochs},
                {"batch_size", c.batch_size},
                {"train_fraction", c.train_fraction},
                {"seed", c.seed},
                {"residual_weight", c.residual_weight},
                {"residual_scaling", std::string(to_string(c.residual_scaling))},
                {"lr", {{"initial", c.schedule.initial},
                        {"floor", c.schedule.floor},
                        {"factor", c.schedule.factor},
                        {"period", c.schedule.period}}},
                {"blocks", c.model.blocks},
                {"width", c.model.width},
                {"output", std::string(to_string(c.model.output))}};
}

std::uint64_t epoch_seed(std::uint64_t seed, int epoch) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

} // namespace

SimTrainResult train_simulator(const SimDataset& data, const SimTrainConfig& config) {
    if (data.samples.empty() || data.graphs.empty()) {
        fail(ErrorCode::EmptyDataset, "simulator dataset has no samples");
    }
    if (config.batch_size < 1 || config.epochs < 1) {
        fail(ErrorCode::InvalidArgument, "epochs and batch size must be positive");
    }
    for (const ComputationGraph& g : data.graphs) {
        if (graph_kind(g) != data.kind) {
            fail(ErrorCode::KindMismatch, "dataset mixes unit kinds");
        }
    }
    const int n_geom = static_cast<int>(data.graphs.size());
    SimTrainResult result{SimulatorModel(data.kind, config.model), {}, -1, {}, {}};
    if (config.test_geometries) {
        std::vector<char> is_test(data.graphs.size(), 0);
        for (int g : *config.test_geometries) {
            if (g < 0 || g >= n_geom) fail(ErrorCode::InvalidArgument, "test geometry index out of range");
            is_test[static_cast<std::size_t>(g)] = 1;
        }
        for (int g = 0; g < n_geom; ++g) {
            (is_test[static_cast<std::size_t>(g)] ? result.test_geometries : result.train_geometries).push_back(g);
        }
    } else {
        std::tie(result.train_geometries, result.test_geometries) =
            split_geometries(n_geom, config.train_fraction, config.seed);
    }
    std::vector<char> in_test(data.graphs.size(), 0);
    for (int g : result.test_geometries) in_test[static_cast<std::size_t>(g)] = 1;
    std::vector<int> train_ids, test_ids;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        int g = data.samples[i].geometry;
        if (g < 0 || g >= n_geom) fail(ErrorCode::DimensionMismatch, "sample geometry index out of range");
        (in_test[static_cast<std::size_t>(g)] ? test_ids : train_ids).push_back(static_cast<int>(i));
    }
    if (train_ids.empty()) {
        fail(ErrorCode::EmptyDataset, "no training samples after the split");
    }

    const std::vector<GeometryCache> cache = build_cache(data, config.residual_scaling);
    SimulatorModel model(data.kind, config.model);
    model.init(config.seed);
    if (config.init_from) {
        load_simulator_weights(*config.init_from, model);
    }
    AdamState adam;
    int start_epoch = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    SimulatorModel best = model;
    json cfg = train_config_json(config, data);
    if (config.resume_from) {
        Checkpoint ck = load_checkpoint(*config.resume_from);
        if (ck.architecture != model.architecture()) {
            fail(ErrorCode::ArchitectureMismatch, "resume checkpoint has a different architecture");
        }
        auto params = model.parameters();
        assign_tensors(params, ck.tensors);
        if (ck.optimizer) adam = *ck.optimizer;
        json meta = json::parse(ck.config);
        result.history = history_from_json(meta.at("history"));
        result.best_epoch = meta.at("best_epoch").get<int>();
        best_loss = meta.at("best_loss").get<double>();
        start_epoch = ck.epoch + 1;
        auto best_path = config.resume_from->parent_path() / "best.ckpt";
        best = std::filesystem::exists(best_path) ? load_simulator(best_path) : model;
    }
    if (config.out_dir) {
        std::filesystem::create_directories(*config.out_dir);
    }

    const int bs = config.batch_size;
    auto params = model.parameters();
    for (int epoch = start_epoch; epoch < config.epochs; ++epoch) {
        const double lr = config.schedule.at(epoch);
        std::vector<int> order = train_ids;
        std::mt19937_64 rng(epoch_seed(config.seed, epoch));
        std::shuffle(order.begin(), order.end(), rng);
        double train_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(bs)) {
            std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(bs), order.size() - start);
            std::span<const int> chunk(order.data() + start, count);
            Batch b = make_batch(data, cache, chunk);
            Tape tape;
            Var out = model.forward(tape, b.features, b.op);
            Var pred = tape.add_const(tape.mul(out, b.op.keep), b.dirichlet);
            Var loss = simulator_loss(tape, pred, b.loss, config.residual_weight);
            if (!std::isfinite(loss.value()(0, 0))) {
                fail(ErrorCode::NonFiniteState, "training loss became non-finite at epoch " + std::to_string(epoch));
            }
            tape.backward(loss);
            for (Parameter* p : params) p->zero_grad();
            tape.accumulate_param_grads();
            adam_step(params, adam, lr);
            train_loss += loss.value()(0, 0) * static_cast<double>(count);
        }
        train_loss /= static_cast<double>(order.size());

        EvalResult test = evaluate(model, data, cache, test_ids, std::max(bs, 32), config.residual_weight);
        double select = test_ids.empty() ? train_loss : test.loss;
        result.history.push_back({epoch, lr, train_loss, test.loss, test.mre});
        if (select < best_loss) {
            best_loss = select;
            best = model;
            result.best_epoch = epoch;
            if (config.out_dir) {
                json c = cfg;
                c["epoch"] = epoch;
                save_simulator(*config.out_dir / "best.ckpt", best, config.seed, c.dump(), nullptr, epoch);
            }
        }
        if (config.verbose) {
            std::cerr << "epoch " << epoch << " lr " << lr << " train " << train_loss << " test "
                      << test.loss << " mre " << test.mre << "%\n";
        }
        if (config.out_dir) {
            json c = cfg;
            c["history"] = history_json(result.history);
            c["best_epoch"] = result.best_epoch;
            c["best_loss"] = best_loss;
            save_simulator(*config.out_dir / "last.ckpt", model, config.seed, c.dump(), &adam, epoch);
            write_history_csv(*config.out_dir / "history.csv", result.history);
        }
        if (config.stop_after >= 0 && epoch >= config.stop_after) {
            break;
        }
    }
    result.model = best;
    return result;
}

double mean_one_step_mre(const SimulatorModel& model, const SimDataset& data, std::span<const int> sample_ids) {
    if (sample_ids.empty()) {
        fail(ErrorCode::EmptyDataset, "no samples to evaluate");
    }
    for (const ComputationGraph& g : data.graphs) check_kind(model, g);
    const std::vector<GeometryCache> cache = build_cache(data, ResidualScaling::None);
    return evaluate(model, data, cache, sample_ids, 32, 0.0).mre;
}

// ---------------------------------------------------------------------------

void save_simulator(const std::filesystem::path& path, const SimulatorModel& model, std::uint64_t seed,
                    const std::string& config_json, const AdamState* optimizer, int epoch) {
    Checkpoint ck;
    ck.kind = std::string(to_string(model.kind()));
    ck.architecture = model.architecture();
    ck.seed = seed;
    ck.config = config_json.empty() ? "{}" : config_json;
    ck.tensors = collect_tensors(model.parameters());
    if (optimizer != nullptr) ck.optimizer = *optimizer;
    ck.epoch = epoch;
    save_checkpoint(path, ck);
}

namespace {

SimulatorConfig config_from_architecture(const json& a) {
    if (a.value("model", "") != "gn-simulator") {
        fail(ErrorCode::ArchitectureMismatch, "checkpoint does not hold a simulator");
    }
    SimulatorConfig c;
    c.blocks = a.at("blocks").get<int>();
    c.width = a.at("width").get<int>();
    c.output = output_mode_from_string(a.at("output").get<std::string>());
    return c;
}

} // namespace

SimulatorModel load_simulator(const std::filesystem::path& path) {
    Checkpoint ck = load_checkpoint(path);
    json a = json::parse(ck.architecture);
    SimulatorModel model(unit_kind_from_string(a.at("kind").get<std::string>()), config_from_architecture(a));
    auto params = model.parameters();
    assign_tensors(params, ck.tensors);
    return model;
}

void load_simulator_weights(const std::filesystem::path& path, SimulatorModel& model) {
    Checkpoint ck = load_checkpoint(path);
    SimulatorConfig c = config_from_architecture(json::parse(ck.architecture));
    const SimulatorConfig& m = model.config();
    if (c.blocks != m.blocks || c.width != m.width || c.output != m.output) {
        fail(ErrorCode::ArchitectureMismatch, "checkpoint architecture " + ck.architecture +
                                                  " differs from " + model.architecture());
    }
    auto params = model.parameters();
    assign_tensors(params, ck.tensors);
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
    std::ofstream out(path);
    if (!out) {
        fail(ErrorCode::IoError, "cannot write " + path.string());
    }
    out.precision(17);
    out << "epoch,lr,train_loss,test_loss,test_mre\n";
    for (const EpochRecord& e : history) {
        out << e.epoch << ',' << e.lr << ',' << e.train_loss << ',' << e.test_loss << ',' << e.test_mre << '\n';
    }
}

} // namespace ntl

#include "ntl/oracle.hpp"

#include "ntl/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace ntl {

namespace {

constexpr double kRoundOff = 1e-14;

void check_input(const State& s, std::size_t n) {
    if (s.c0.size() != static_cast<Eigen::Index>(n) ||
        s.c_plus.size() != static_cast<Eigen::Index>(n)) {
        fail(ErrorCode::DimensionMismatch, "state size does not match graph");
    }
    for (Eigen::Index i = 0; i < s.c0.size(); ++i) {
        if (!std::isfinite(s.c0[i]) || !std::isfinite(s.c_plus[i])) {
            fail(ErrorCode::NonFiniteState, "state contains non-finite values");
        }
        if (s.c0[i] < -kRoundOff || s.c_plus[i] < -kRoundOff) {
            fail(ErrorCode::NegativeInput, "state contains negative concentrations");
        }
    }
}

void sanitize(Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        double x = v[i];
        if (!std::isfinite(x) || x < -kRoundOff) {
            fail(ErrorCode::NonFiniteState,
                 "solver produced value " + std::to_string(x) + " at node " + std::to_string(i));
        }
        if (x < 0.0) {
            v[i] = 0.0;
        }
    }
}

} // namespace

DiscreteOperators build_operators(const ComputationGraph& graph) {
    const int n = static_cast<int>(graph.size());
    std::vector<Triplet> lap;
    lap.reserve(graph.edges.size() * 4);
    for (const auto& e : graph.edges) {
        double w = 1.0 / (e.length * e.length);
        lap.push_back({e.a, e.b, w});
        lap.push_back({e.b, e.a, w});
        lap.push_back({e.a, e.a, -w});
        lap.push_back({e.b, e.b, -w});
    }
    std::vector<Triplet> up;
    for (int i = 0; i < n; ++i) {
        int p = graph.axial_pred[static_cast<std::size_t>(i)];
        if (p < 0) {
            continue;
        }
        double len = (graph.nodes[static_cast<std::size_t>(i)].position -
                      graph.nodes[static_cast<std::size_t>(p)].position).norm();
        double u = graph.nodes[static_cast<std::size_t>(i)].velocity;
        up.push_back({i, i, u / len});
        up.push_back({i, p, -u / len});
    }
    return {CsrMatrix(n, n, std::move(lap)), CsrMatrix(n, n, std::move(up))};
}

State FieldSeries::state(std::size_t k) const {
    State s;
    s.c0 = c0.at(k);
    s.c_plus = c_plus.at(k);
    s.c_minus = Eigen::VectorXd::Zero(s.c0.size());
    return s;
}

double stable_substep(const ComputationGraph& graph, const SimParams& params) {
    double l_min = std::numeric_limits<double>::infinity();
    for (const auto& e : graph.edges) {
        l_min = std::min(l_min, e.length);
    }
    int deg_max = 0;
    for (std::size_t i = 0; i + 1 < graph.incident_offset.size(); ++i) {
        deg_max = std::max(deg_max, graph.incident_offset[i + 1] - graph.incident_offset[i]);
    }
    double u_max = 0.0;
    for (const auto& node : graph.nodes) {
        u_max = std::max(u_max, std::abs(node.velocity));
    }
    double bound = std::numeric_limits<double>::infinity();
    if (params.D > 0.0 && deg_max > 0) {
        bound = std::min(bound, l_min * l_min / (2.0 * params.D * deg_max));
    }
    if (u_max > 0.0) {
        bound = std::min(bound, l_min / u_max);
    }
    double rates = params.k_plus + params.kp_plus;
    if (rates > 0.0) {
        bound = std::min(bound, 1.0 / rates);
    }
    return 0.5 * bound;
}

TransportSolver::TransportSolver(const ComputationGraph& graph, const SimParams& params,
                                 const BoundaryCondition& bc, Closure closure)
    : TransportSolver(graph, build_operators(graph), params, bc, closure) {}

TransportSolver::TransportSolver(const ComputationGraph& graph, DiscreteOperators ops,
                                 const SimParams& params, const BoundaryCondition& bc,
                                 Closure closure)
    : graph_(&graph), params_(params), bc_(bc), closure_(closure), ops_(std::move(ops)) {
    require(ops_.laplacian.rows() == static_cast<int>(graph.size()) &&
                ops_.upwind.rows() == static_cast<int>(graph.size()),
            ErrorCode::DimensionMismatch, "operators do not match graph");
    params_.validate();
    bc_.validate();
    require(params.dt > 0.0, ErrorCode::InvalidArgument, "dt must be positive");
    require(params.D >= 0.0 && params.k_plus >= 0.0 && params.kp_plus >= 0.0 && params.u_i >= 0.0,
            ErrorCode::NegativeInput, "rates must be nonnegative");
    double bound = stable_substep(graph, params);
    substeps_ = std::isfinite(bound) ? std::max(1, static_cast<int>(std::ceil(params.dt / bound))) : 1;
    delta_ = params.dt / substeps_;
}

void TransportSolver::apply_boundary(State& s) const {
    if (closure_ == Closure::Reflecting) {
        return;
    }
    for (int i : graph_->held_nodes) {
        s.c0[i] = bc_.c_in;
        s.c_plus[i] = bc_.lambda_in * bc_.c_in;
    }
    for (int i : graph_->closure_nodes) {
        int p = graph_->axial_pred[static_cast<std::size_t>(i)];
        if (p >= 0) {
            s.c0[i] = s.c0[p];
            s.c_plus[i] = s.c_plus[p];
        }
    }
}

State TransportSolver::step(const State& state) const {
    const std::size_t n = graph_->size();
    check_input(state, n);
    const CsrMatrix& L = ops_.laplacian;
    const CsrMatrix& U = ops_.upwind;
    const double D = params_.D;
    const double kp = params_.k_plus;
    const double kb = params_.kp_plus;
    const double h = delta_;

    Eigen::VectorXd a0 = state.c0, ap = state.c_plus;
    Eigen::VectorXd b0(a0.size()), bp(ap.size());
    State tmp;
    for (int s = 0; s < substeps_; ++s) {
        for (int i = 0; i < static_cast<int>(n); ++i) {
            double lap = 0.0;
            for (int k = L.row_begin(i); k < L.row_end(i); ++k) {
                lap += L.value(k) * a0[L.col(k)];
            }
            double adv = 0.0;
            for (int k = U.row_begin(i); k < U.row_end(i); ++k) {
                adv += U.value(k) * ap[U.col(k)];
            }
            b0[i] = a0[i] + h * (D * lap - kp * a0[i] + kb * ap[i]);
            bp[i] = ap[i] + h * (-adv + kp * a0[i] - kb * ap[i]);
        }
        tmp.c0.swap(b0);
        tmp.c_plus.swap(bp);
        apply_boundary(tmp);
        a0.swap(tmp.c0);
        ap.swap(tmp.c_plus);
        b0.resize(a0.size());
        bp.resize(ap.size());
    }
    sanitize(a0);
    sanitize(ap);
    State out;
    out.c0 = std::move(a0);
    out.c_plus = std::move(ap);
    out.c_minus = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    return out;
}

double relative_change(const State& prev, const State& next) {
    double num = std::max((next.c0 - prev.c0).lpNorm<Eigen::Infinity>(),
                          (next.c_plus - prev.c_plus).lpNorm<Eigen::Infinity>());
    double den = std::max(next.c0.lpNorm<Eigen::Infinity>(), next.c_plus.lpNorm<Eigen::Infinity>());
    if (num == 0.0) {
        return 0.0;
    }
    return den > 0.0 ? num / den : std::numeric_limits<double>::infinity();
}

FieldSeries TransportSolver::run_to_steady(State initial, const SteadyOptions& opts) const {
    require(opts.tol > 0.0, ErrorCode::InvalidArgument, "tol must be positive");
    require(opts.record_every >= 1, ErrorCode::InvalidArgument, "record_every must be >= 1");
    apply_boundary(initial);
    FieldSeries series;
    series.times.push_back(0.0);
    series.c0.push_back(initial.c0);
    series.c_plus.push_back(initial.c_plus);

    const long max_steps = static_cast<long>(std::floor(opts.max_time / params_.dt + 1e-9));
    State cur = std::move(initial);
    for (long k = 1; k <= max_steps; ++k) {
        State next = step(cur);
        double change = relative_change(cur, next);
        cur = std::move(next);
        bool done = change < opts.tol;
        if (done || k % opts.record_every == 0 || k == max_steps) {
            series.times.push_back(static_cast<double>(k) * params_.dt);
            series.c0.push_back(cur.c0);
            series.c_plus.push_back(cur.c_plus);
        }
        if (done) {
            series.converged = true;
            break;
        }
    }
    return series;
}

FieldSeries TransportSolver::run_to_steady(const SteadyOptions& opts) const {
    return run_to_steady(initial_state(*graph_, bc_), opts);
}

State step(const State& state, const ComputationGraph& graph, const DiscreteOperators& ops,
           const SimParams& params, const BoundaryCondition& bc) {
    return TransportSolver(graph, ops, params, bc).step(state);
}

FieldSeries run_to_steady(const ComputationGraph& graph, const SimParams& params,
                          const BoundaryCondition& bc, double tol, double max_time) {
    SteadyOptions opts;
    opts.tol = tol;
    opts.max_time = max_time;
    return TransportSolver(graph, params, bc).run_to_steady(opts);
}

void write_field_series_csv(const std::filesystem::path& path, const ComputationGraph& graph,
                            const FieldSeries& series) {
    std::ofstream out(path);
    if (!out) {
        fail(ErrorCode::IoError, "cannot write " + path.string());
    }
    out.precision(17);
    out << "node_id,x,y,z";
    for (const char* species : {"c0", "c_plus"}) {
        for (double t : series.times) {
            out << ',' << species << "@t=" << t;
        }
    }
    out << '\n';
    for (std::size_t i = 0; i < graph.size(); ++i) {
        const Vec3& p = graph.nodes[i].position;
        out << i << ',' << p.x() << ',' << p.y() << ',' << p.z();
        for (const auto& col : series.c0) {
            out << ',' << col[static_cast<Eigen::Index>(i)];
        }
        for (const auto& col : series.c_plus) {
            out << ',' << col[static_cast<Eigen::Index>(i)];
        }
        out << '\n';
    }
    if (!out) {
        fail(ErrorCode::IoError, "write failed for " + path.string());
    }
}

} // namespace ntl

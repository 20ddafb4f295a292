#include "ntl/assembly.hpp"

#include "ntl/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <random>

namespace ntl {

using nlohmann::json;

int component_index(InterfaceKind kind) {
    switch (kind) {
    case InterfaceKind::PipePipe: return 0;
    case InterfaceKind::PipeBifurcation: return 1;
    case InterfaceKind::BifurcationBifurcation: return 2;
    }
    fail(ErrorCode::UnknownKind, "unknown interface kind");
}

namespace {

constexpr std::array<InterfaceKind, 3> kKinds{InterfaceKind::PipePipe, InterfaceKind::PipeBifurcation,
                                              InterfaceKind::BifurcationBifurcation};
constexpr int kSide = 2 * kInterfaceSlots; // 34 values per section

void check_rows(const Matrix& m, Eigen::Index cols, const char* what) {
    if (m.cols() != cols) {
        fail(ErrorCode::DimensionMismatch, std::string(what) + " must have " + std::to_string(cols) + " columns");
    }
}

} // namespace

AssemblyModel::AssemblyModel(AssemblyConfig config) : config_(config) {
    if (config_.width < 2) {
        fail(ErrorCode::InvalidArgument, "assembly width must be >= 2");
    }
    const int w = config_.width;
    for (Mlp& m : mlps_) m = Mlp({kAssemblyInput, w, w, w, kAssemblyOutput});
}

void AssemblyModel::init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (Mlp& m : mlps_) m.init_glorot(rng);
}

Matrix AssemblyModel::forward(InterfaceKind kind, const Matrix& inputs, const Matrix& mid) const {
    check_rows(inputs, kAssemblyInput, "assembly input");
    check_rows(mid, kAssemblyOutput, "assembly baseline");
    Matrix out = component(kind).forward(inputs);
    if (config_.output == OutputMode::Increment) out += mid;
    return out;
}

Var AssemblyModel::forward(Tape& tape, InterfaceKind kind, const Matrix& inputs, const Matrix& mid) {
    check_rows(inputs, kAssemblyInput, "assembly input");
    check_rows(mid, kAssemblyOutput, "assembly baseline");
    Var out = component(kind).forward(tape, tape.constant(inputs));
    if (config_.output == OutputMode::Increment) out = tape.add_const(out, mid);
    return out;
}

std::vector<Parameter*> AssemblyModel::parameters(InterfaceKind kind) { return component(kind).parameters(); }

std::vector<Parameter*> AssemblyModel::parameters() {
    std::vector<Parameter*> out;
    for (Mlp& m : mlps_) {
        auto p = m.parameters();
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

std::vector<const Parameter*> AssemblyModel::parameters() const {
    std::vector<const Parameter*> out;
    for (const Mlp& m : mlps_) {
        auto p = m.parameters();
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

std::string AssemblyModel::architecture() const {
    json a{{"model", "gn-assembly"},
           {"width", config_.width},
           {"output", std::string(to_string(config_.output))},
           {"input", kAssemblyInput},
           {"components", {"p-p", "p-b", "b-b"}}};
    return a.dump();
}

// ---------------------------------------------------------------------------

namespace {

// Next section into the unit from a boundary section.
int adjacent_section(const NeuriteUnit& unit, int section) {
    const SectionSite& s = unit.sections[static_cast<std::size_t>(section)];
    if (s.upstream >= 0) return s.upstream;
    for (std::size_t j = 0; j < unit.sections.size(); ++j) {
        if (unit.sections[j].upstream == section) return static_cast<int>(j);
    }
    fail(ErrorCode::SlotMismatch, "unit " + std::to_string(unit.id) + " has a single section");
}

InterfaceSide make_side(const UnitGraph& ug, int unit_idx, int vertex) {
    const NeuriteUnit& unit = ug.units[static_cast<std::size_t>(unit_idx)];
    InterfaceSide side;
    side.unit = unit_idx;
    side.section = unit.find_section(vertex);
    if (side.section < 0) {
        fail(ErrorCode::NotAdjacent, "interface vertex " + std::to_string(vertex) + " is not in unit " +
                                         std::to_string(unit.id));
    }
    side.adjacent = adjacent_section(unit, side.section);
    const SectionSite& a = unit.sections[static_cast<std::size_t>(side.section)];
    const SectionSite& b = unit.sections[static_cast<std::size_t>(side.adjacent)];
    side.radius = b.radius;
    side.spacing = (a.center - b.center).norm();
    return side;
}

} // namespace

NetworkModel build_network_model(const UnitGraph& units, const SimParams& params) {
    params.validate();
    if (units.units.empty()) {
        fail(ErrorCode::InvalidArgument, "network has no units");
    }
    NetworkModel net;
    net.units = units;
    net.network = build_network_graph(units, params);
    std::vector<int> count(net.network.size(), 0);
    for (std::size_t u = 0; u < units.units.size(); ++u) {
        const NeuriteUnit& unit = units.units[u];
        if (unit.id != static_cast<int>(u)) {
            fail(ErrorCode::InvalidArgument, "unit ids must equal their index");
        }
        net.unit_graphs.push_back(build_unit_graph_in_network(unit, net.network, params));
        const ComputationGraph& g = net.unit_graphs.back();
        std::vector<int> map(g.size());
        for (std::size_t s = 0; s < unit.sections.size(); ++s) {
            const int vertex = unit.sections[s].vertex;
            const int slots = g.section_slots(static_cast<int>(s));
            if (slots != net.network.section_slots(vertex)) {
                fail(ErrorCode::SlotMismatch, "unit section slots differ from the network");
            }
            for (int k = 0; k < slots; ++k) {
                const int local = g.node(static_cast<int>(s), k);
                const int global = net.network.node(vertex, k);
                map[static_cast<std::size_t>(local)] = global;
                ++count[static_cast<std::size_t>(global)];
            }
        }
        net.node_map.push_back(std::move(map));
        net.base_features.push_back(node_features(g, params, State::zeros(g.size())));
        net.operators.push_back(message_operator(g));
    }
    net.node_share.resize(count.size());
    for (std::size_t i = 0; i < count.size(); ++i) {
        if (count[i] == 0) {
            fail(ErrorCode::InvalidArgument, "network node " + std::to_string(i) + " belongs to no unit");
        }
        net.node_share[i] = 1.0 / count[i];
    }
    for (const Interface& iface : units.interfaces) {
        InterfaceLink link;
        link.id = iface.id;
        link.kind = iface.kind;
        link.side[0] = make_side(units, iface.upstream_unit, iface.section);
        link.side[1] = make_side(units, iface.downstream_unit, iface.section);
        for (const InterfaceSide& s : link.side) {
            const ComputationGraph& g = net.unit_graphs[static_cast<std::size_t>(s.unit)];
            if (g.section_slots(s.section) != kInterfaceSlots || g.section_slots(s.adjacent) != kInterfaceSlots) {
                fail(ErrorCode::SlotMismatch, "interface " + std::to_string(iface.id) +
                                                  " touches a section without 17 slots");
            }
        }
        net.links.push_back(link);
    }
    std::sort(net.links.begin(), net.links.end(),
              [](const InterfaceLink& a, const InterfaceLink& b) { return a.id < b.id; });
    for (std::size_t u = 0; u < units.units.size(); ++u) {
        net.kind_units[units.units[u].kind == UnitKind::Pipe ? 0 : 1].push_back(static_cast<int>(u));
    }
    for (int k = 0; k < 2; ++k) {
        std::vector<const MessageOperator*> parts;
        Eigen::Index rows = 0;
        net.kind_offset[k].push_back(0);
        for (int u : net.kind_units[k]) {
            parts.push_back(&net.operators[static_cast<std::size_t>(u)]);
            rows += static_cast<Eigen::Index>(net.unit_graphs[static_cast<std::size_t>(u)].size());
            net.kind_offset[k].push_back(rows);
        }
        if (!parts.empty()) net.stacked[k] = stack_operators(parts);
    }
    return net;
}

Matrix section_values(const NetworkModel& net, const Matrix& unit_state, int unit, int section) {
    const ComputationGraph& g = net.unit_graphs.at(static_cast<std::size_t>(unit));
    if (g.section_slots(section) != kInterfaceSlots) {
        fail(ErrorCode::SlotMismatch, "section " + std::to_string(section) + " does not have 17 slots");
    }
    if (unit_state.rows() != static_cast<Eigen::Index>(g.size()) || unit_state.cols() != 2) {
        fail(ErrorCode::MissingPrediction, "unit " + std::to_string(unit) + " state has the wrong shape");
    }
    Matrix out(1, kSide);
    const int first = g.node(section, 0);
    for (int k = 0; k < kInterfaceSlots; ++k) {
        out(0, k) = unit_state(first + k, 0);
        out(0, kInterfaceSlots + k) = unit_state(first + k, 1);
    }
    return out;
}

Matrix component_input(const NetworkModel& net, const InterfaceLink& link, int side,
                       const std::vector<Matrix>& unit_states) {
    const InterfaceSide& own = link.side[static_cast<std::size_t>(side)];
    const InterfaceSide& other = link.side[static_cast<std::size_t>(1 - side)];
    Matrix in(1, kAssemblyInput);
    in.leftCols(kSide) = section_values(net, unit_states.at(static_cast<std::size_t>(own.unit)), own.unit, own.section);
    in.middleCols(kSide, kSide) =
        section_values(net, unit_states.at(static_cast<std::size_t>(other.unit)), other.unit, other.section);
    in(0, 2 * kSide) = own.radius;
    in(0, 2 * kSide + 1) = other.radius;
    in(0, 2 * kSide + 2) = own.spacing;
    return in;
}

Matrix written_region(const NetworkModel& net, const InterfaceLink& link, int side,
                      const std::vector<Matrix>& unit_states) {
    const InterfaceSide& s = link.side[static_cast<std::size_t>(side)];
    const Matrix& state = unit_states.at(static_cast<std::size_t>(s.unit));
    Matrix out(1, kAssemblyOutput);
    out.leftCols(kSide) = section_values(net, state, s.unit, s.section);
    out.rightCols(kSide) = section_values(net, state, s.unit, s.adjacent);
    return out;
}

namespace {

void check_unit_states(const NetworkModel& net, const std::vector<Matrix>& states, const char* what) {
    if (states.size() != net.unit_graphs.size()) {
        fail(ErrorCode::MissingPrediction, std::string(what) + ": expected " + std::to_string(net.unit_graphs.size()) +
                                               " unit states, got " + std::to_string(states.size()));
    }
    for (std::size_t u = 0; u < states.size(); ++u) {
        if (states[u].rows() != static_cast<Eigen::Index>(net.unit_graphs[u].size()) || states[u].cols() != 2) {
            fail(ErrorCode::MissingPrediction, std::string(what) + ": unit " + std::to_string(u) +
                                                   " state has the wrong shape");
        }
    }
}

struct SectionWrite {
    Matrix sum;
    int count = 0;
};

void add_write(std::map<std::pair<int, int>, SectionWrite>& writes, int unit, int section, const Matrix& values) {
    SectionWrite& w = writes[{unit, section}];
    if (w.count == 0) {
        w.sum = values;
    } else {
        w.sum += values;
    }
    ++w.count;
}

} // namespace

std::vector<Matrix> assemble_step(const std::vector<Matrix>& x_mid, const NetworkModel& net,
                                  const AssemblyModel& model) {
    check_unit_states(net, x_mid, "assembly");
    std::vector<Matrix> out = x_mid;
    if (net.links.empty()) return out;

    std::array<std::vector<std::pair<int, int>>, 3> rows; // (link, side) per kind
    for (std::size_t l = 0; l < net.links.size(); ++l) {
        auto& r = rows[static_cast<std::size_t>(component_index(net.links[l].kind))];
        r.emplace_back(static_cast<int>(l), 0);
        r.emplace_back(static_cast<int>(l), 1);
    }
    std::map<std::pair<int, int>, SectionWrite> iface_writes, adj_writes;
    for (int c = 0; c < 3; ++c) {
        const auto& r = rows[static_cast<std::size_t>(c)];
        if (r.empty()) continue;
        const auto n = static_cast<Eigen::Index>(r.size());
        Matrix in(n, kAssemblyInput), mid(n, kAssemblyOutput);
        for (Eigen::Index i = 0; i < n; ++i) {
            const InterfaceLink& link = net.links[static_cast<std::size_t>(r[static_cast<std::size_t>(i)].first)];
            const int side = r[static_cast<std::size_t>(i)].second;
            in.row(i) = component_input(net, link, side, x_mid);
            mid.row(i) = written_region(net, link, side, x_mid);
        }
        Matrix corrected = model.forward(kKinds[static_cast<std::size_t>(c)], in, mid);
        for (Eigen::Index i = 0; i < n; ++i) {
            const InterfaceLink& link = net.links[static_cast<std::size_t>(r[static_cast<std::size_t>(i)].first)];
            const InterfaceSide& s = link.side[static_cast<std::size_t>(r[static_cast<std::size_t>(i)].second)];
            add_write(iface_writes, s.unit, s.section, corrected.block(i, 0, 1, kSide));
            add_write(adj_writes, s.unit, s.adjacent, corrected.block(i, kSide, 1, kSide));
        }
    }
    auto apply = [&](const std::map<std::pair<int, int>, SectionWrite>& writes, bool skip_interfaces) {
        for (const auto& [key, w] : writes) {
            if (skip_interfaces && iface_writes.count(key) > 0) continue;
            Matrix& state = out[static_cast<std::size_t>(key.first)];
            const int first = net.unit_graphs[static_cast<std::size_t>(key.first)].node(key.second, 0);
            const double inv = 1.0 / w.count;
            for (int k = 0; k < kInterfaceSlots; ++k) {
                state(first + k, 0) = w.sum(0, k) * inv;
                state(first + k, 1) = w.sum(0, kInterfaceSlots + k) * inv;
            }
        }
    };
    apply(adj_writes, true);
    apply(iface_writes, false);
    return out;
}

std::vector<Matrix> split_state(const NetworkModel& net, const Matrix& network_state) {
    if (network_state.rows() != static_cast<Eigen::Index>(net.network.size()) || network_state.cols() != 2) {
        fail(ErrorCode::DimensionMismatch, "network state has the wrong shape");
    }
    std::vector<Matrix> out;
    out.reserve(net.node_map.size());
    for (const std::vector<int>& map : net.node_map) {
        Matrix s(static_cast<Eigen::Index>(map.size()), 2);
        for (std::size_t i = 0; i < map.size(); ++i) s.row(static_cast<Eigen::Index>(i)) = network_state.row(map[i]);
        out.push_back(std::move(s));
    }
    return out;
}

Matrix merge_state(const NetworkModel& net, const std::vector<Matrix>& unit_states) {
    check_unit_states(net, unit_states, "merge");
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(net.network.size()), 2);
    for (std::size_t u = 0; u < unit_states.size(); ++u) {
        const std::vector<int>& map = net.node_map[u];
        for (std::size_t i = 0; i < map.size(); ++i) out.row(map[i]) += unit_states[u].row(static_cast<Eigen::Index>(i));
    }
    for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) *= net.node_share[static_cast<std::size_t>(i)];
    return out;
}

std::vector<Matrix> simulate_units(const NetworkModel& net, const SimulatorModel& pipe,
                                   const SimulatorModel& bifurcation, const SimParams& params,
                                   const std::vector<Matrix>& unit_states, const BoundaryCondition& bc) {
    (void)params;
    check_unit_states(net, unit_states, "simulate");
    if (pipe.kind() != UnitKind::Pipe || bifurcation.kind() != UnitKind::Bifurcation) {
        fail(ErrorCode::KindMismatch, "simulators must be a pipe model and a bifurcation model");
    }
    std::vector<Matrix> out(unit_states.size());
    for (int k = 0; k < 2; ++k) {
        const std::vector<int>& ids = net.kind_units[static_cast<std::size_t>(k)];
        if (ids.empty()) continue;
        const std::vector<Eigen::Index>& off = net.kind_offset[static_cast<std::size_t>(k)];
        const Eigen::Index rows = off.back();
        Matrix features(rows, kFeatureWidth);
        Matrix held = Matrix::Zero(rows, 2);
        for (std::size_t j = 0; j < ids.size(); ++j) {
            const auto u = static_cast<std::size_t>(ids[j]);
            const Eigen::Index r = off[j], n = off[j + 1] - off[j];
            features.middleRows(r, n) = net.base_features[u];
            features.block(r, kFeatureWidth - 2, n, 2) = unit_states[u];
            const bool inlet = ids[j] == net.units.inlet_unit;
            for (int h : net.unit_graphs[u].held_nodes) {
                if (inlet) {
                    held(r + h, 0) = bc.c_in;
                    held(r + h, 1) = bc.lambda_in * bc.c_in;
                } else {
                    held.row(r + h) = unit_states[u].row(h);
                }
            }
        }
        const SimulatorModel& model = k == 0 ? pipe : bifurcation;
        const MessageOperator& op = net.stacked[static_cast<std::size_t>(k)];
        Matrix next = model.forward(features, op).cwiseProduct(op.keep) + held;
        for (std::size_t j = 0; j < ids.size(); ++j) {
            out[static_cast<std::size_t>(ids[j])] = next.middleRows(off[j], off[j + 1] - off[j]);
        }
    }
    return out;
}

namespace {

Matrix rollout_start(const NetworkModel& net, const BoundaryCondition& bc, const State& initial) {
    bc.validate();
    if (initial.size() != net.network.size()) {
        fail(ErrorCode::DimensionMismatch, "initial state size differs from the network graph");
    }
    Matrix field(static_cast<Eigen::Index>(initial.size()), 2);
    field.col(0) = initial.c0;
    field.col(1) = initial.c_plus;
    return field;
}

Matrix rollout_step(const NetworkModel& net, const SimulatorModel& pipe, const SimulatorModel& bifurcation,
                    const AssemblyModel* assembly, const SimParams& params, const BoundaryCondition& bc,
                    const Matrix& field, long k) {
    std::vector<Matrix> next = simulate_units(net, pipe, bifurcation, params, split_state(net, field), bc);
    if (assembly != nullptr) next = assemble_step(next, net, *assembly);
    Matrix& inlet = next[static_cast<std::size_t>(net.units.inlet_unit)];
    for (int h : net.unit_graphs[static_cast<std::size_t>(net.units.inlet_unit)].held_nodes) {
        inlet(h, 0) = bc.c_in;
        inlet(h, 1) = bc.lambda_in * bc.c_in;
    }
    Matrix merged = merge_state(net, next);
    if (!merged.allFinite()) {
        fail(ErrorCode::NonFiniteState, "global rollout produced a non-finite value at step " + std::to_string(k));
    }
    return merged;
}

State as_state(const Matrix& field) {
    State s;
    s.c0 = field.col(0);
    s.c_plus = field.col(1);
    return s;
}

void record(FieldSeries& series, double t, const Matrix& field) {
    series.times.push_back(t);
    series.c0.emplace_back(field.col(0));
    series.c_plus.emplace_back(field.col(1));
}

} // namespace

FieldSeries global_rollout(const NetworkModel& net, const SimulatorModel& pipe, const SimulatorModel& bifurcation,
                           const AssemblyModel* assembly, const SimParams& params, const BoundaryCondition& bc,
                           const State& initial, int steps, int record_every) {
    if (steps < 1) {
        fail(ErrorCode::InvalidArgument, "rollout needs steps >= 1");
    }
    if (record_every < 1) {
        fail(ErrorCode::InvalidArgument, "record_every must be >= 1");
    }
    Matrix field = rollout_start(net, bc, initial);
    FieldSeries series;
    record(series, 0.0, field);
    for (int k = 1; k <= steps; ++k) {
        field = rollout_step(net, pipe, bifurcation, assembly, params, bc, field, k);
        if (k % record_every == 0 || k == steps) record(series, k * params.dt, field);
    }
    return series;
}

FieldSeries global_rollout_to_steady(const NetworkModel& net, const SimulatorModel& pipe,
                                     const SimulatorModel& bifurcation, const AssemblyModel* assembly,
                                     const SimParams& params, const BoundaryCondition& bc, const State& initial,
                                     const SteadyOptions& opts) {
    if (!(opts.tol > 0.0) || opts.record_every < 1) {
        fail(ErrorCode::InvalidArgument, "steady detection needs tol > 0 and record_every >= 1");
    }
    Matrix field = rollout_start(net, bc, initial);
    FieldSeries series;
    record(series, 0.0, field);
    const long max_steps = static_cast<long>(std::floor(opts.max_time / params.dt + 1e-9));
    for (long k = 1; k <= max_steps; ++k) {
        Matrix next = rollout_step(net, pipe, bifurcation, assembly, params, bc, field, k);
        const double change = relative_change(as_state(field), as_state(next));
        field = std::move(next);
        const bool done = change < opts.tol;
        if (done || k % opts.record_every == 0 || k == max_steps) record(series, static_cast<double>(k) * params.dt, field);
        if (done) {
            series.converged = true;
            break;
        }
    }
    return series;
}

// ---------------------------------------------------------------------------

AssemblyLossTerms assembly_loss(const std::vector<Matrix>& x_o, const std::vector<Matrix>& truth,
                                const NetworkModel& net, double alpha) {
    check_unit_states(net, x_o, "assembly loss prediction");
    check_unit_states(net, truth, "assembly loss truth");
    AssemblyLossTerms t;
    double nodes = 0.0;
    for (std::size_t u = 0; u < x_o.size(); ++u) {
        t.mse += (x_o[u] - truth[u]).squaredNorm();
        nodes += static_cast<double>(x_o[u].rows());
    }
    t.mse /= nodes;
    if (!net.links.empty()) {
        double gap = 0.0;
        for (const InterfaceLink& link : net.links) {
            Matrix a = section_values(net, x_o[static_cast<std::size_t>(link.side[0].unit)], link.side[0].unit,
                                      link.side[0].section);
            Matrix b = section_values(net, x_o[static_cast<std::size_t>(link.side[1].unit)], link.side[1].unit,
                                      link.side[1].section);
            gap += (a - b).squaredNorm();
        }
        t.penalty = alpha * gap / (static_cast<double>(kInterfaceSlots) * static_cast<double>(net.links.size()));
    }
    t.total = t.mse + t.penalty;
    return t;
}

Var assembly_pair_loss(Tape& tape, Var side0, Var side1, const Matrix& truth0, const Matrix& truth1, double alpha,
                       AssemblyLossTerms* terms) {
    const Eigen::Index b = side0.rows();
    if (side1.rows() != b || truth0.rows() != b || truth1.rows() != b || side0.cols() != kAssemblyOutput ||
        side1.cols() != kAssemblyOutput || truth0.cols() != kAssemblyOutput || truth1.cols() != kAssemblyOutput) {
        fail(ErrorCode::DimensionMismatch, "assembly pair loss needs matching B x 68 blocks");
    }
    const double inv_b = 1.0 / static_cast<double>(b);
    Eigen::VectorXd mse_w = Eigen::VectorXd::Constant(b, inv_b / kSide);
    Eigen::VectorXd gap_w = Eigen::VectorXd::Constant(b, alpha * inv_b / kInterfaceSlots);
    Var e0 = tape.weighted_sum(tape.square(tape.add_const(side0, -truth0)), mse_w);
    Var e1 = tape.weighted_sum(tape.square(tape.add_const(side1, -truth1)), mse_w);
    Var mse = tape.add(e0, e1);
    Var gap = tape.sub(tape.slice_cols(side0, 0, kSide), tape.slice_cols(side1, 0, kSide));
    Var penalty = tape.weighted_sum(tape.square(gap), gap_w);
    Var total = tape.add(mse, penalty);
    if (terms != nullptr) {
        terms->mse = mse.value()(0, 0);
        terms->penalty = penalty.value()(0, 0);
        terms->total = total.value()(0, 0);
    }
    return total;
}

double interface_jump(const Matrix& side0, const Matrix& side1) {
    if (side0.rows() != 1 || side1.rows() != 1 || side0.cols() < kSide || side1.cols() < kSide) {
        fail(ErrorCode::DimensionMismatch, "interface jump needs 1 x 34 (or wider) rows");
    }
    return (side0.leftCols(kSide) - side1.leftCols(kSide)).cwiseAbs().sum() / kSide;
}

std::pair<double, double> pair_jumps(const AssemblyModel& model, const AssemblyPair& pair) {
    Matrix a = model.forward(pair.kind, pair.input[0], pair.mid[0]);
    Matrix b = model.forward(pair.kind, pair.input[1], pair.mid[1]);
    return {interface_jump(pair.mid[0], pair.mid[1]), interface_jump(a, b)};
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

// Distinct indices in [0, pairs), log-uniform so the transient is covered.
std::vector<int> log_uniform_indices(std::uint64_t seed, int pairs, int count) {
    std::vector<int> picks;
    if (count <= 0 || count >= pairs) {
        picks.resize(static_cast<std::size_t>(pairs));
        std::iota(picks.begin(), picks.end(), 0);
        return picks;
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, std::log(static_cast<double>(pairs) + 1.0));
    while (static_cast<int>(picks.size()) < count) {
        int k = std::clamp(static_cast<int>(std::floor(std::exp(dist(rng)))) - 1, 0, pairs - 1);
        if (std::find(picks.begin(), picks.end(), k) == picks.end()) picks.push_back(k);
    }
    std::sort(picks.begin(), picks.end());
    return picks;
}

Matrix scaled_state(const FieldSeries& series, std::size_t k, double c) {
    Matrix m(series.c0[k].size(), 2);
    m.col(0) = c * series.c0[k];
    m.col(1) = c * series.c_plus[k];
    return m;
}

} // namespace

AssemblyDataset generate_assembly_dataset(const std::vector<UnitGraph>& networks, const SimulatorModel& pipe,
                                          const SimulatorModel& bifurcation, const SimParams& params,
                                          const AssemblyDataSettings& settings, std::uint64_t seed) {
    if (networks.empty()) {
        fail(ErrorCode::EmptyDataset, "no networks for assembly data");
    }
    AssemblyDataset data;
    data.networks = static_cast<int>(networks.size());
    for (std::size_t i = 0; i < networks.size(); ++i) {
        NetworkModel net = build_network_model(networks[i], params);
        BoundaryCondition unit_bc;
        unit_bc.c_in = 1.0;
        unit_bc.lambda_in = settings.lambda_in;
        TransportSolver solver(net.network, params, unit_bc);
        FieldSeries series = solver.run_to_steady(settings.steady);
        if (!series.converged) {
            fail(ErrorCode::NotConverged, "oracle did not reach steady state on network " + std::to_string(i));
        }
        const int pairs = static_cast<int>(series.size()) - 1;
        std::vector<int> picks = log_uniform_indices(mix(seed, i, 0), pairs, settings.windows);
        for (double c : settings.boundary) {
            BoundaryCondition bc = unit_bc;
            bc.c_in = c;
            for (int k : picks) {
                std::vector<Matrix> prev = split_state(net, scaled_state(series, static_cast<std::size_t>(k), c));
                std::vector<Matrix> truth = split_state(net, scaled_state(series, static_cast<std::size_t>(k) + 1, c));
                std::vector<Matrix> mid = simulate_units(net, pipe, bifurcation, params, prev, bc);
                for (const InterfaceLink& link : net.links) {
                    AssemblyPair p;
                    p.kind = link.kind;
                    p.network = static_cast<int>(i);
                    for (int s = 0; s < 2; ++s) {
                        p.input[static_cast<std::size_t>(s)] = component_input(net, link, s, mid);
                        p.mid[static_cast<std::size_t>(s)] = written_region(net, link, s, mid);
                        p.truth[static_cast<std::size_t>(s)] = written_region(net, link, s, truth);
                    }
                    data.pairs.push_back(std::move(p));
                }
            }
        }
    }
    return data;
}

// ---------------------------------------------------------------------------

namespace {

struct PairBatch {
    std::array<Matrix, 2> input, mid, truth;
};

PairBatch make_pair_batch(const AssemblyDataset& data, std::span<const int> ids) {
    PairBatch b;
    const auto n = static_cast<Eigen::Index>(ids.size());
    for (int s = 0; s < 2; ++s) {
        b.input[static_cast<std::size_t>(s)].resize(n, kAssemblyInput);
        b.mid[static_cast<std::size_t>(s)].resize(n, kAssemblyOutput);
        b.truth[static_cast<std::size_t>(s)].resize(n, kAssemblyOutput);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const AssemblyPair& p = data.pairs[static_cast<std::size_t>(ids[static_cast<std::size_t>(i)])];
        for (std::size_t s = 0; s < 2; ++s) {
            b.input[s].row(i) = p.input[s];
            b.mid[s].row(i) = p.mid[s];
            b.truth[s].row(i) = p.truth[s];
        }
    }
    return b;
}

struct PairEval {
    double loss = 0.0;
    double jump = 0.0;
};

PairEval evaluate_pairs(AssemblyModel& model, InterfaceKind kind, const AssemblyDataset& data,
                        std::span<const int> ids, double alpha) {
    PairEval r;
    if (ids.empty()) return r;
    PairBatch b = make_pair_batch(data, ids);
    Matrix a = model.forward(kind, b.input[0], b.mid[0]);
    Matrix c = model.forward(kind, b.input[1], b.mid[1]);
    Tape tape;
    r.loss = assembly_pair_loss(tape, tape.constant(a), tape.constant(c), b.truth[0], b.truth[1], alpha)
                 .value()(0, 0);
    for (Eigen::Index i = 0; i < a.rows(); ++i) r.jump += interface_jump(a.row(i), c.row(i));
    r.jump /= static_cast<double>(a.rows());
    return r;
}

std::uint64_t epoch_seed(std::uint64_t seed, int kind, int epoch) {
    return mix(seed, static_cast<std::uint64_t>(kind) + 101, static_cast<std::uint64_t>(epoch));
}

void write_assembly_history(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
    std::ofstream out(path);
    if (!out) {
        fail(ErrorCode::IoError, "cannot write " + path.string());
    }
    out.precision(17);
    out << "epoch,lr,train_loss,test_loss,test_jump\n";
    for (const EpochRecord& e : history) {
        out << e.epoch << ',' << e.lr << ',' << e.train_loss << ',' << e.test_loss << ',' << e.test_mre << '\n';
    }
}

} // namespace

AssemblyTrainResult train_assembly(const AssemblyDataset& data, const AssemblyTrainConfig& config) {
    if (data.pairs.empty() || data.networks < 1) {
        fail(ErrorCode::EmptyDataset, "assembly dataset has no interface pairs");
    }
    if (config.batch_size < 1 || config.epochs < 1) {
        fail(ErrorCode::InvalidArgument, "epochs and batch size must be positive");
    }
    if (!(config.alpha >= 0.0)) {
        fail(ErrorCode::InvalidArgument, "alpha must be non-negative");
    }
    AssemblyTrainResult result{AssemblyModel(config.model), {}, {}, {}, {}};
    if (data.networks >= 2) {
        std::tie(result.train_networks, result.test_networks) =
            split_geometries(data.networks, config.train_fraction, config.seed);
    } else {
        result.train_networks = {0};
    }
    std::vector<char> in_test(static_cast<std::size_t>(data.networks), 0);
    for (int g : result.test_networks) in_test[static_cast<std::size_t>(g)] = 1;
    std::array<std::vector<int>, 3> train_ids, test_ids;
    for (std::size_t i = 0; i < data.pairs.size(); ++i) {
        const AssemblyPair& p = data.pairs[i];
        if (p.network < 0 || p.network >= data.networks) {
            fail(ErrorCode::DimensionMismatch, "pair network index out of range");
        }
        for (std::size_t s = 0; s < 2; ++s) {
            if (p.input[s].cols() != kAssemblyInput || p.mid[s].cols() != kAssemblyOutput ||
                p.truth[s].cols() != kAssemblyOutput) {
                fail(ErrorCode::DimensionMismatch, "pair " + std::to_string(i) + " has malformed blocks");
            }
        }
        const auto c = static_cast<std::size_t>(component_index(p.kind));
        (in_test[static_cast<std::size_t>(p.network)] ? test_ids : train_ids)[c].push_back(static_cast<int>(i));
    }

    AssemblyModel model(config.model);
    model.init(config.seed);
    AssemblyModel best = model;
    if (config.out_dir) std::filesystem::create_directories(*config.out_dir);
    const auto bs = static_cast<std::size_t>(config.batch_size);
    for (int c = 0; c < 3; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        if (train_ids[ci].empty()) continue;
        result.trained[ci] = true;
        const InterfaceKind kind = kKinds[ci];
        auto params = model.parameters(kind);
        AdamState adam;
        double best_loss = std::numeric_limits<double>::infinity();
        for (int epoch = 0; epoch < config.epochs; ++epoch) {
            const double lr = config.schedule.at(epoch);
            std::vector<int> order = train_ids[ci];
            std::mt19937_64 rng(epoch_seed(config.seed, c, epoch));
            std::shuffle(order.begin(), order.end(), rng);
            double train_loss = 0.0;
            for (std::size_t start = 0; start < order.size(); start += bs) {
                const std::size_t count = std::min(bs, order.size() - start);
                PairBatch b = make_pair_batch(data, std::span<const int>(order.data() + start, count));
                Tape tape;
                Var a = model.forward(tape, kind, b.input[0], b.mid[0]);
                Var d = model.forward(tape, kind, b.input[1], b.mid[1]);
                Var loss = assembly_pair_loss(tape, a, d, b.truth[0], b.truth[1], config.alpha);
                if (!std::isfinite(loss.value()(0, 0))) {
                    fail(ErrorCode::NonFiniteState, "assembly loss became non-finite at epoch " + std::to_string(epoch));
                }
                tape.backward(loss);
                for (Parameter* p : params) p->zero_grad();
                tape.accumulate_param_grads();
                adam_step(params, adam, lr);
                train_loss += loss.value()(0, 0) * static_cast<double>(count);
            }
            train_loss /= static_cast<double>(order.size());
            PairEval test = evaluate_pairs(model, kind, data, test_ids[ci], config.alpha);
            const double select = test_ids[ci].empty() ? train_loss : test.loss;
            result.history[ci].push_back({epoch, lr, train_loss, test.loss, test.jump});
            if (select < best_loss) {
                best_loss = select;
                best.component(kind) = model.component(kind);
            }
            if (config.verbose) {
                std::cerr << to_string(kind) << " epoch " << epoch << " lr " << lr << " train " << train_loss
                          << " test " << test.loss << " jump " << test.jump << '\n';
            }
        }
        if (config.out_dir) {
            write_assembly_history(*config.out_dir / ("history_" + std::string(to_string(kind)) + ".csv"),
                                   result.history[ci]);
        }
    }
    if (config.out_dir) {
        json cfg{{"alpha", config.alpha},
                 {"epochs", config.epochs},
                 {"batch_size", config.batch_size},
                 {"train_fraction", config.train_fraction},
                 {"lr", config.schedule.initial},
                 {"lr_period", config.schedule.period},
                 {"trained", {result.trained[0], result.trained[1], result.trained[2]}}};
        save_assembly(*config.out_dir / "best.ckpt", best, config.seed, cfg.dump());
    }
    result.model = best;
    return result;
}

void save_assembly(const std::filesystem::path& path, const AssemblyModel& model, std::uint64_t seed,
                   const std::string& config_json) {
    Checkpoint ck;
    ck.kind = "assembly";
    ck.architecture = model.architecture();
    ck.seed = seed;
    ck.config = config_json.empty() ? "{}" : config_json;
    ck.tensors = collect_tensors(model.parameters());
    save_checkpoint(path, ck);
}

AssemblyModel load_assembly(const std::filesystem::path& path) {
    Checkpoint ck = load_checkpoint(path);
    json a = json::parse(ck.architecture);
    if (a.value("model", "") != "gn-assembly") {
        fail(ErrorCode::ArchitectureMismatch, "checkpoint does not hold an assembly model");
    }
    AssemblyConfig c;
    c.width = a.at("width").get<int>();
    c.output = output_mode_from_string(a.at("output").get<std::string>());
    AssemblyModel model(c);
    auto params = model.parameters();
    assign_tensors(params, ck.tensors);
    return model;
}

} // namespace ntl

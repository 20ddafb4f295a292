#include "ntl/graphgen.hpp"

#include "ntl/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ntl {

void SimParams::validate() const {
    require(D >= 0.0 && k_plus >= 0.0 && k_minus >= 0.0 && kp_plus >= 0.0 && kp_minus >= 0.0 &&
                u_i >= 0.0,
            ErrorCode::InvalidArgument, "simulation coefficients must be non-negative");
    require(dt > 0.0 && std::isfinite(dt), ErrorCode::InvalidArgument, "dt must be positive");
    require(unidirectional, ErrorCode::InvalidArgument,
            "retrograde (bidirectional) transport is not supported at runtime");
}

void BoundaryCondition::validate() const {
    require(c_in >= 0.0 && lambda_in >= 0.0, ErrorCode::NegativeInput,
            "boundary concentration and loading must be non-negative");
}

State State::zeros(std::size_t nodes) {
    auto n = static_cast<Eigen::Index>(nodes);
    return State{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
}

double parabolic_velocity(double u_inlet, double radial_fraction) {
    return u_inlet * (1.0 - radial_fraction * radial_fraction);
}

namespace {

Vec3 orthogonal_unit(const Vec3& axis, const Vec3& hint) {
    Vec3 v = hint - hint.dot(axis) * axis;
    double n = v.norm();
    if (n > 1e-9 * std::max(1.0, hint.norm())) {
        return v / n;
    }
    // Least-aligned coordinate axis.
    Eigen::Index k = 0;
    axis.cwiseAbs().minCoeff(&k);
    Vec3 e = Vec3::Zero();
    e[k] = 1.0;
    v = e - e.dot(axis) * axis;
    return v.normalized();
}

Vec3 intrinsic_slot_frame(const std::vector<SectionSite>& sections) {
    const Vec3& axis = sections.front().axis;
    Vec3 hint = Vec3::Zero();
    double scale = 0.0;
    for (const auto& s : sections) {
        scale = std::max(scale, (s.center - sections.front().center).norm());
    }
    // Farthest-reaching off-axis displacement defines the frame.
    double best = 0.0;
    for (const auto& s : sections) {
        Vec3 d = s.center - sections.front().center;
        Vec3 off = d - d.dot(axis) * axis;
        if (off.norm() > best + 1e-9 * std::max(1.0, scale)) {
            best = off.norm();
            hint = off;
        }
    }
    return orthogonal_unit(axis, hint);
}

struct EdgeSink {
    std::vector<GraphEdge>& edges;
    const std::vector<GraphNode>& nodes;
    void add(int a, int b) {
        if (a > b) std::swap(a, b);
        double len = (nodes[static_cast<std::size_t>(a)].position -
                      nodes[static_cast<std::size_t>(b)].position)
                         .norm();
        require(len > 0.0, ErrorCode::DegenerateSegment,
                "graph nodes " + std::to_string(a) + " and " + std::to_string(b) + " coincide");
        edges.push_back({a, b, len});
    }
};

} // namespace

ComputationGraph build_graph(std::vector<SectionSite> sections, const SimParams& params,
                             std::optional<Vec3> first_slot_frame) {
    require(!sections.empty(), ErrorCode::InvalidArgument, "graph needs at least one section");
    require(sections.front().upstream < 0, ErrorCode::InvalidArgument,
            "first section must not have an upstream section");
    for (std::size_t s = 0; s < sections.size(); ++s) {
        require(sections[s].radius > 0.0, ErrorCode::NonPositiveRadius,
                "section radius must be positive");
        require(s == 0 || (sections[s].upstream >= 0 &&
                           sections[s].upstream < static_cast<int>(s)),
                ErrorCode::InvalidArgument, "sections must be ordered upstream first");
        require(std::abs(sections[s].axis.norm() - 1.0) < 1e-9, ErrorCode::InvalidArgument,
                "section axis must be a unit vector");
    }

    ComputationGraph g;
    const std::size_t ns = sections.size();
    g.slot_frame.resize(ns);
    g.slot_frame[0] = first_slot_frame ? *first_slot_frame : intrinsic_slot_frame(sections);
    for (std::size_t s = 1; s < ns; ++s) {
        // Parallel transport of the slot frame keeps equal slots aligned.
        const Vec3& prev = g.slot_frame[static_cast<std::size_t>(sections[s].upstream)];
        const Vec3& axis = sections[s].axis;
        Vec3 hint = prev;
        if ((prev - prev.dot(axis) * axis).norm() < 1e-6) {
            // Right-angle turn onto e1: fall back to the upstream e2.
            hint = sections[static_cast<std::size_t>(sections[s].upstream)].axis.cross(prev);
        }
        g.slot_frame[s] = orthogonal_unit(axis, hint);
    }

    g.section_offset.assign(ns + 1, 0);
    for (std::size_t s = 0; s < ns; ++s) {
        g.section_offset[s + 1] =
            g.section_offset[s] + (sections[s].branch ? kBranchSlots : kCircularSlots);
    }
    const auto total = static_cast<std::size_t>(g.section_offset[ns]);
    g.nodes.resize(total);
    g.axial_pred.assign(total, -1);

    const double ring_fraction[2] = {0.5, 1.0 - kWallInset};
    for (std::size_t s = 0; s < ns; ++s) {
        const auto& site = sections[s];
        const Vec3 e1 = g.slot_frame[s];
        const Vec3 e2 = site.axis.cross(e1);
        auto place = [&](int slot, const Vec3& position, double fraction) {
            auto& n = g.nodes[static_cast<std::size_t>(g.section_offset[s] + slot)];
            n.position = position;
            n.radius = site.radius;
            n.radial_fraction = fraction;
            n.velocity = parabolic_velocity(params.u_i, fraction);
            n.section = static_cast<int>(s);
            n.slot = slot;
            n.flag = site.role;
        };
        place(0, site.center, 0.0);
        for (int ring = 0; ring < 2; ++ring) {
            for (int k = 0; k < kRingSlots; ++k) {
                double theta = k * std::numbers::pi / 4.0;
                double r = ring_fraction[ring] * site.radius;
                place(1 + ring * kRingSlots + k,
                      site.center + r * (std::cos(theta) * e1 + std::sin(theta) * e2),
                      ring_fraction[ring]);
            }
        }
        if (site.branch) {
            const Vec3& d0 = site.daughter_dirs[0];
            const Vec3& d1 = site.daughter_dirs[1];
            Vec3 normal = d0 - d1;
            normal = normal.norm() > 1e-9 ? normal.normalized() : e1;
            Vec3 mid = d0 + d1;
            mid = mid.norm() > 1e-9 ? mid.normalized() : site.axis;
            mid = (mid - mid.dot(normal) * normal).normalized();
            Vec3 across = normal.cross(mid);
            const double angles[3] = {-std::numbers::pi / 3.0, 0.0, std::numbers::pi / 3.0};
            for (int ring = 0; ring < 2; ++ring) {
                for (int j = 0; j < 3; ++j) {
                    double r = ring_fraction[ring] * site.radius;
                    place(kCircularSlots + ring * 3 + j,
                          site.center + r * (std::cos(angles[j]) * mid + std::sin(angles[j]) * across),
                          ring_fraction[ring]);
                    g.nodes[static_cast<std::size_t>(g.section_offset[s] + kCircularSlots + ring * 3 + j)]
                        .flag = BoundaryRole::Interior;
                }
            }
        }
    }

    EdgeSink sink{g.edges, g.nodes};
    for (std::size_t s = 0; s < ns; ++s) {
        const int o = g.section_offset[s];
        for (int k = 0; k < kRingSlots; ++k) {
            int inner = o + 1 + k;
            int outer = o + 1 + kRingSlots + k;
            sink.add(o, inner);
            sink.add(inner, outer);
            sink.add(inner, o + 1 + (k + 1) % kRingSlots);
            sink.add(outer, o + 1 + kRingSlots + (k + 1) % kRingSlots);
        }
        if (sections[s].branch) {
            const int inner = o + kCircularSlots;
            const int outer = inner + 3;
            for (int j = 0; j < 3; ++j) {
                sink.add(o, inner + j);
                sink.add(inner + j, outer + j);
                g.axial_pred[static_cast<std::size_t>(inner + j)] = o;
                g.axial_pred[static_cast<std::size_t>(outer + j)] = inner + j;
            }
            for (int j = 0; j < 2; ++j) {
                sink.add(inner + j, inner + j + 1);
                sink.add(outer + j, outer + j + 1);
            }
        }
        if (sections[s].upstream >= 0) {
            const int u = g.section_offset[static_cast<std::size_t>(sections[s].upstream)];
            for (int k = 0; k < kCircularSlots; ++k) {
                sink.add(u + k, o + k);
                g.axial_pred[static_cast<std::size_t>(o + k)] = u + k;
            }
        }
    }
    std::sort(g.edges.begin(), g.edges.end(), [](const GraphEdge& x, const GraphEdge& y) {
        return x.a != y.a ? x.a < y.a : x.b < y.b;
    });

    g.incident_offset.assign(total + 1, 0);
    for (const auto& e : g.edges) {
        ++g.incident_offset[static_cast<std::size_t>(e.a) + 1];
        ++g.incident_offset[static_cast<std::size_t>(e.b) + 1];
    }
    for (std::size_t i = 0; i < total; ++i) {
        g.incident_offset[i + 1] += g.incident_offset[i];
    }
    g.incident_edges.resize(g.edges.size() * 2);
    std::vector<int> fill(g.incident_offset.begin(), g.incident_offset.end() - 1);
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        g.incident_edges[static_cast<std::size_t>(fill[static_cast<std::size_t>(g.edges[e].a)]++)] =
            static_cast<int>(e);
        g.incident_edges[static_cast<std::size_t>(fill[static_cast<std::size_t>(g.edges[e].b)]++)] =
            static_cast<int>(e);
    }

    std::vector<bool> has_downstream(ns, false);
    for (std::size_t s = 1; s < ns; ++s) {
        has_downstream[static_cast<std::size_t>(sections[s].upstream)] = true;
    }
    for (int k = 0; k < g.section_slots(0); ++k) {
        g.held_nodes.push_back(k);
    }
    for (std::size_t s = 1; s < ns; ++s) {
        if (!has_downstream[s]) {
            for (int k = 0; k < kCircularSlots; ++k) {
                g.closure_nodes.push_back(g.section_offset[s] + k);
            }
        }
    }

    g.frame_origin = sections[0].center;
    const Vec3 x = sections[0].axis;
    const Vec3 y = g.slot_frame[0];
    const Vec3 z = x.cross(y);
    g.frame_rotation.row(0) = x.transpose();
    g.frame_rotation.row(1) = y.transpose();
    g.frame_rotation.row(2) = z.transpose();
    g.sections = std::move(sections);
    return g;
}

ComputationGraph build_unit_graph(const NeuriteUnit& unit, const SimParams& params) {
    return build_graph(unit.sections, params);
}

ComputationGraph build_network_graph(const UnitGraph& units, const SimParams& params) {
    return build_graph(units.sites, params);
}

ComputationGraph build_unit_graph_in_network(const NeuriteUnit& unit,
                                             const ComputationGraph& network,
                                             const SimParams& params) {
    const int first = unit.sections.front().vertex;
    return build_graph(unit.sections, params, network.slot_frame[static_cast<std::size_t>(first)]);
}

Matrix node_features(const ComputationGraph& graph, const SimParams& params, const State& state) {
    const auto n = static_cast<Eigen::Index>(graph.size());
    require(state.c0.size() == n && state.c_plus.size() == n, ErrorCode::DimensionMismatch,
            "state has " + std::to_string(state.c0.size()) + " entries, graph has " +
                std::to_string(n) + " nodes");
    Matrix f(n, kFeatureWidth);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& node = graph.nodes[static_cast<std::size_t>(i)];
        Vec3 local = graph.to_local(node.position);
        f(i, 0) = local.x();
        f(i, 1) = local.y();
        f(i, 2) = local.z();
        f(i, 3) = node.radius;
        f(i, 4) = node.radial_fraction;
        f(i, 5) = node.velocity;
        f(i, 6) = params.D;
        f(i, 7) = params.k_plus;
        f(i, 8) = params.kp_plus;
        f(i, 9) = params.u_i;
        f(i, 10) = state.c0[i];
        f(i, 11) = state.c_plus[i];
    }
    return f;
}

State initial_state(const ComputationGraph& graph, const BoundaryCondition& bc) {
    State s = State::zeros(graph.size());
    for (int i : graph.held_nodes) {
        s.c0[i] = bc.c_in;
        s.c_plus[i] = bc.lambda_in * bc.c_in;
    }
    return s;
}

} // namespace ntl

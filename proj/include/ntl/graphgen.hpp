#pragma once

// Node/edge computation graphs built from cross-section templates.
//
// A circular section carries 17 nodes: slot 0 at the center, slots 1-8 on an
// inner ring at r = R/2 and slots 9-16 on an outer ring at r = R(1 - 0.05),
// ring slots k at angle k*pi/4 in the section's slot frame. A branch section
// adds six saddle nodes (slots 17-22) on the bisector plane between the two
// daughter directions, three at r = R/2 and three at r = 0.95R.

#include "ntl/decomposition.hpp"

#include <Eigen/Core>

#include <optional>
#include <vector>

namespace ntl {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr int kCircularSlots = 17;
constexpr int kBranchSlots = 23;
constexpr int kRingSlots = 8;
constexpr double kWallInset = 0.05;
constexpr int kFeatureWidth = 12;

struct SimParams {
    double D = 1.0;        // µm²/s
    double k_plus = 1.0;   // 1/s
    double k_minus = 1.0;  // 1/s
    double kp_plus = 0.5;  // 1/s
    double kp_minus = 0.5; // 1/s
    double u_i = 0.1;      // µm/s
    double dt = 0.1;       // s
    bool unidirectional = true;

    void validate() const;
};

struct BoundaryCondition {
    double c_in = 1.0;      // mol/µm³
    double lambda_in = 1.0;
    double c_out = 0.0;     // unused in unidirectional mode
    double lambda_out = 0.0;

    void validate() const;
};

// Concentration snapshot; c_minus is reserved and stays zero.
struct State {
    Eigen::VectorXd c0;
    Eigen::VectorXd c_plus;
    Eigen::VectorXd c_minus;

    static State zeros(std::size_t nodes);
    std::size_t size() const { return static_cast<std::size_t>(c0.size()); }
};

struct GraphNode {
    Vec3 position = Vec3::Zero();
    double radius = 0.0;
    double radial_fraction = 0.0;
    double velocity = 0.0;
    BoundaryRole flag = BoundaryRole::Interior;
    int section = 0;
    int slot = 0;
};

struct GraphEdge {
    int a = 0; // a < b
    int b = 0;
    double length = 0.0;
};

struct ComputationGraph {
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges;
    std::vector<int> axial_pred;          // -1 on the first section
    std::vector<SectionSite> sections;
    std::vector<Vec3> slot_frame;         // e1 per section
    std::vector<int> section_offset;      // size sections + 1
    std::vector<int> held_nodes;          // first section (Dirichlet)
    std::vector<int> closure_nodes;       // sections without downstream
    Vec3 frame_origin = Vec3::Zero();
    Eigen::Matrix3d frame_rotation = Eigen::Matrix3d::Identity(); // rows: local axes

    std::size_t size() const { return nodes.size(); }
    int node(int section, int slot) const {
        return section_offset[static_cast<std::size_t>(section)] + slot;
    }
    int section_slots(int section) const {
        return section_offset[static_cast<std::size_t>(section) + 1] -
               section_offset[static_cast<std::size_t>(section)];
    }
    // Incident edges per node (CSR over `edges`).
    std::vector<int> incident_offset;
    std::vector<int> incident_edges;

    Vec3 to_local(const Vec3& p) const { return frame_rotation * (p - frame_origin); }
};

double parabolic_velocity(double u_inlet, double radial_fraction);

// Builds the graph for an ordered section list (upstream before downstream).
// `first_slot_frame` pins the slot frame of section 0; when absent it is
// derived from the geometry so that rigid motions commute with construction.
ComputationGraph build_graph(std::vector<SectionSite> sections, const SimParams& params,
                             std::optional<Vec3> first_slot_frame = std::nullopt);

ComputationGraph build_unit_graph(const NeuriteUnit& unit, const SimParams& params);

// Whole-network graph over every skeleton site of the unit graph.
ComputationGraph build_network_graph(const UnitGraph& units, const SimParams& params);

// Unit graph whose nodes coincide exactly with the corresponding network
// nodes (same slot frames); used for in-network inference.
ComputationGraph build_unit_graph_in_network(const NeuriteUnit& unit,
                                             const ComputationGraph& network,
                                             const SimParams& params);

// Per-node features [x, y, z (local frame), R, r/R, u(r), D, k_plus, kp_plus,
// u_i, c0, c_plus], rows ordered by (section, slot).
Matrix node_features(const ComputationGraph& graph, const SimParams& params, const State& state);

// State with the held (first-section) nodes set to the Dirichlet values.
State initial_state(const ComputationGraph& graph, const BoundaryCondition& bc);

} // namespace ntl

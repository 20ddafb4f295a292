#pragma once

#include "ntl/graphgen.hpp"
#include "ntl/sparse.hpp"

#include <filesystem>
#include <vector>

namespace ntl {

struct DiscreteOperators {
    CsrMatrix laplacian; // w_ij = 1/l_ij^2, diagonal -sum_j w_ij
    CsrMatrix upwind;    // row i: +u_i/l on i, -u_i/l on pred(i); zero without pred
};

DiscreteOperators build_operators(const ComputationGraph& graph);

enum class Closure {
    InletOutlet, // held first section, zero-gradient outlets
    Reflecting,  // no held or copied nodes
};

struct SteadyOptions {
    double tol = 1e-6;
    double max_time = 1e4; // s
    int record_every = 1;  // keep every n-th output (the final one is always kept)
};

struct FieldSeries {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> c0;
    std::vector<Eigen::VectorXd> c_plus;
    bool converged = false;

    std::size_t size() const { return times.size(); }
    State state(std::size_t k) const;
};

class TransportSolver {
public:
    TransportSolver(const ComputationGraph& graph, const SimParams& params,
                    const BoundaryCondition& bc, Closure closure = Closure::InletOutlet);
    TransportSolver(const ComputationGraph& graph, DiscreteOperators ops, const SimParams& params,
                    const BoundaryCondition& bc, Closure closure = Closure::InletOutlet);

    const DiscreteOperators& operators() const { return ops_; }
    int substeps() const { return substeps_; }
    double substep() const { return delta_; }

    // Advances by one output interval dt.
    State step(const State& state) const;
    FieldSeries run_to_steady(State initial, const SteadyOptions& opts = {}) const;
    FieldSeries run_to_steady(const SteadyOptions& opts = {}) const;

    // Overwrites held and closure nodes in place.
    void apply_boundary(State& state) const;

private:
    const ComputationGraph* graph_;
    SimParams params_;
    BoundaryCondition bc_;
    Closure closure_;
    DiscreteOperators ops_;
    int substeps_ = 1;
    double delta_ = 0.0;
};

// Largest stable explicit sub-step for the graph and rates.
double stable_substep(const ComputationGraph& graph, const SimParams& params);

State step(const State& state, const ComputationGraph& graph, const DiscreteOperators& ops,
           const SimParams& params, const BoundaryCondition& bc);

FieldSeries run_to_steady(const ComputationGraph& graph, const SimParams& params,
                          const BoundaryCondition& bc, double tol = 1e-6, double max_time = 1e4);

// Max-norm relative change used for steady detection; 0/0 counts as 0.
double relative_change(const State& prev, const State& next);

void write_field_series_csv(const std::filesystem::path& path, const ComputationGraph& graph,
                            const FieldSeries& series);

} // namespace ntl

#pragma once

// Field comparison reports, nodal error export and oracle-vs-surrogate timing.

#include "ntl/assembly.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <vector>

namespace ntl {

struct FieldMetrics {
    double mae = 0.0;
    double mre = 0.0; // percent; NaN when the truth range is zero
    double truth_max = 0.0;
    double truth_min = 0.0;
};

struct Timing {
    double oracle_seconds = 0.0;
    double surrogate_seconds = 0.0;
    double ratio = 0.0; // oracle / surrogate
};

struct MetricReport {
    FieldMetrics c0;
    FieldMetrics c_plus;
    FieldMetrics combined; // c0 and c+ concatenated; the headline number
    // Per node: sqrt(e0^2 + e+^2), so sum of squares = combined mae^2 * 2n.
    Eigen::VectorXd nodal_error;
    std::optional<Timing> timing;
};

MetricReport compare_states(const State& pred, const State& truth);

nlohmann::json to_json(const MetricReport& report);
void write_report(const std::filesystem::path& path, const MetricReport& report);
// Columns node_id, x, y, z, abs_error.
void write_nodal_error_csv(const std::filesystem::path& path, const ComputationGraph& graph,
                           const MetricReport& report);

struct BenchmarkOptions {
    int repeats = 5;
    SteadyOptions steady;
};

struct BenchmarkReport {
    int steps = 0; // horizon in dt steps, shared by both runs
    double horizon = 0.0;
    std::vector<double> oracle_runs;
    std::vector<double> surrogate_runs;
    Timing timing; // medians
    State oracle_final;
    State surrogate_final;
    MetricReport accuracy; // surrogate vs oracle at the horizon
};

// Oracle run-to-steady on the network graph, then the surrogate rollout to
// the same horizon. Both single-threaded; medians over the repeats.
BenchmarkReport benchmark(const UnitGraph& units, const SimParams& params, const BoundaryCondition& bc,
                          const SimulatorModel& pipe, const SimulatorModel& bifurcation,
                          const AssemblyModel* assembly, const BenchmarkOptions& options = {});

nlohmann::json to_json(const BenchmarkReport& report);

double median(std::vector<double> values);

} // namespace ntl

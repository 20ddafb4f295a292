#include "ntl/evaluation.hpp"

#include "ntl/error.hpp"
#include "ntl/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

namespace ntl {

using nlohmann::json;

namespace {

FieldMetrics field_metrics(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
    FieldMetrics m;
    m.mae = mae(pred, truth);
    m.truth_max = truth.maxCoeff();
    m.truth_min = truth.minCoeff();
    m.mre = m.truth_max > m.truth_min ? mre(pred, truth) : std::numeric_limits<double>::quiet_NaN();
    return m;
}

json metrics_json(const FieldMetrics& m) {
    json j{{"mae", m.mae}, {"truth_max", m.truth_max}, {"truth_min", m.truth_min}};
    j["mre_percent"] = std::isnan(m.mre) ? json(nullptr) : json(m.mre);
    return j;
}

json timing_json(const Timing& t) {
    return json{{"oracle_seconds", t.oracle_seconds}, {"surrogate_seconds", t.surrogate_seconds}, {"ratio", t.ratio}};
}

} // namespace

MetricReport compare_states(const State& pred, const State& truth) {
    if (truth.size() == 0 || pred.size() == 0) {
        fail(ErrorCode::EmptyInput, "cannot compare empty fields");
    }
    if (pred.size() != truth.size()) {
        fail(ErrorCode::LengthMismatch, "prediction has " + std::to_string(pred.size()) + " nodes, truth has " +
                                            std::to_string(truth.size()));
    }
    MetricReport r;
    r.c0 = field_metrics(pred.c0, truth.c0);
    r.c_plus = field_metrics(pred.c_plus, truth.c_plus);
    const auto n = static_cast<Eigen::Index>(truth.size());
    Eigen::VectorXd p(2 * n), t(2 * n);
    p << pred.c0, pred.c_plus;
    t << truth.c0, truth.c_plus;
    r.combined = field_metrics(p, t);
    r.nodal_error = ((pred.c0 - truth.c0).array().square() + (pred.c_plus - truth.c_plus).array().square()).sqrt();
    return r;
}

json to_json(const MetricReport& report) {
    json j{{"c0", metrics_json(report.c0)},
           {"c_plus", metrics_json(report.c_plus)},
           {"combined", metrics_json(report.combined)},
           {"nodes", report.nodal_error.size()},
           {"max_nodal_error", report.nodal_error.size() > 0 ? report.nodal_error.maxCoeff() : 0.0}};
    if (report.timing) j["timing"] = timing_json(*report.timing);
    return j;
}

void write_report(const std::filesystem::path& path, const MetricReport& report) {
    std::ofstream out(path);
    if (!out) {
        fail(ErrorCode::IoError, "cannot write " + path.string());
    }
    out << to_json(report).dump(2) << '\n';
}

void write_nodal_error_csv(const std::filesystem::path& path, const ComputationGraph& graph,
                           const MetricReport& report) {
    if (report.nodal_error.size() != static_cast<Eigen::Index>(graph.size())) {
        fail(ErrorCode::DimensionMismatch, "nodal error length differs from the graph");
    }
    std::ofstream out(path);
    if (!out) {
        fail(ErrorCode::IoError, "cannot write " + path.string());
    }
    out.precision(17);
    out << "node_id,x,y,z,abs_error\n";
    for (std::size_t i = 0; i < graph.size(); ++i) {
        const Vec3& x = graph.nodes[i].position;
        out << i << ',' << x.x() << ',' << x.y() << ',' << x.z() << ','
            << report.nodal_error[static_cast<Eigen::Index>(i)] << '\n';
    }
}

double median(std::vector<double> values) {
    if (values.empty()) {
        fail(ErrorCode::EmptyInput, "median of nothing");
    }
    std::sort(values.begin(), values.end());
    const std::size_t m = values.size() / 2;
    return values.size() % 2 == 1 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

BenchmarkReport benchmark(const UnitGraph& units, const SimParams& params, const BoundaryCondition& bc,
                          const SimulatorModel& pipe, const SimulatorModel& bifurcation,
                          const AssemblyModel* assembly, const BenchmarkOptions& options) {
    if (options.repeats < 1) {
        fail(ErrorCode::InvalidArgument, "benchmark needs at least one repeat");
    }
    using clock = std::chrono::steady_clock;
    auto seconds = [](clock::time_point a, clock::time_point b) { return std::chrono::duration<double>(b - a).count(); };
    BenchmarkReport r;
    SteadyOptions steady = options.steady;
    steady.record_every = std::numeric_limits<int>::max();
    const ComputationGraph network = build_network_graph(units, params);
    for (int rep = 0; rep < options.repeats; ++rep) {
        auto t0 = clock::now();
        TransportSolver solver(network, params, bc);
        FieldSeries series = solver.run_to_steady(steady);
        auto t1 = clock::now();
        r.oracle_runs.push_back(seconds(t0, t1));
        if (!series.converged) {
            fail(ErrorCode::NotConverged, "oracle did not reach steady state within the time limit");
        }
        const int steps = static_cast<int>(std::lround(series.times.back() / params.dt));
        if (rep == 0) {
            r.steps = steps;
            r.horizon = steps * params.dt;
            r.oracle_final = series.state(series.size() - 1);
        } else if (steps != r.steps) {
            fail(ErrorCode::NotConverged, "oracle horizon changed between repeats");
        }
    }
    for (int rep = 0; rep < options.repeats; ++rep) {
        auto t0 = clock::now();
        NetworkModel net = build_network_model(units, params);
        FieldSeries series = global_rollout(net, pipe, bifurcation, assembly, params, bc,
                                            initial_state(net.network, bc), r.steps, r.steps);
        auto t1 = clock::now();
        r.surrogate_runs.push_back(seconds(t0, t1));
        if (rep == 0) r.surrogate_final = series.state(series.size() - 1);
    }
    r.timing.oracle_seconds = median(r.oracle_runs);
    r.timing.surrogate_seconds = median(r.surrogate_runs);
    r.timing.ratio = r.timing.oracle_seconds / r.timing.surrogate_seconds;
    r.accuracy = compare_states(r.surrogate_final, r.oracle_final);
    r.accuracy.timing = r.timing;
    return r;
}

json to_json(const BenchmarkReport& report) {
    return json{{"steps", report.steps},
                {"horizon_seconds", report.horizon},
                {"oracle_horizon_seconds", report.horizon},
                {"surrogate_horizon_seconds", report.horizon},
                {"oracle_runs", report.oracle_runs},
                {"surrogate_runs", report.surrogate_runs},
                {"timing", timing_json(report.timing)},
                {"accuracy", to_json(report.accuracy)}};
}

} // namespace ntl

#include "support.hpp"

#include "ntl/error.hpp"
#include "ntl/evaluation.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

using namespace ntl;

namespace {

State make_state(std::initializer_list<double> c0, std::initializer_list<double> cp) {
    State s = State::zeros(c0.size());
    Eigen::Index i = 0;
    for (double v : c0) s.c0[i++] = v;
    i = 0;
    for (double v : cp) s.c_plus[i++] = v;
    return s;
}

} // namespace

TEST_CASE("compare_states: hand case and self comparison") {
    State truth = make_state({0.0, 1.0}, {0.0, 2.0});
    State pred = make_state({0.1, 0.9}, {0.0, 2.0});
    MetricReport r = compare_states(pred, truth);
    CHECK(r.c0.mae == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(r.c0.mre == doctest::Approx(10.0).epsilon(1e-14));
    CHECK(r.c_plus.mae == 0.0);
    CHECK(r.c_plus.mre == 0.0);
    // combined: errors (0.1, 0.1, 0, 0) over a truth range of 2
    CHECK(r.combined.mae == doctest::Approx(std::sqrt(0.02 / 4)).epsilon(1e-15));
    CHECK(r.combined.mre == doctest::Approx(std::sqrt(0.02 / 4) / 2.0 * 100.0).epsilon(1e-14));
    CHECK(r.combined.truth_max == 2.0);
    CHECK(r.combined.truth_min == 0.0);

    MetricReport self = compare_states(truth, truth);
    CHECK(self.combined.mre == 0.0);
    CHECK(self.nodal_error.maxCoeff() == 0.0);
}

TEST_CASE("nodal error sums to the combined mae") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    State a = State::zeros(37), b = State::zeros(37);
    for (Eigen::Index i = 0; i < 37; ++i) {
        a.c0[i] = g(rng);
        a.c_plus[i] = g(rng);
        b.c0[i] = g(rng);
        b.c_plus[i] = g(rng);
    }
    MetricReport r = compare_states(a, b);
    CHECK(r.nodal_error.squaredNorm() == doctest::Approx(r.combined.mae * r.combined.mae * 74).epsilon(1e-12));
    // joint scaling leaves mre unchanged
    State a2 = a, b2 = b;
    a2.c0 *= 3.5;
    a2.c_plus *= 3.5;
    b2.c0 *= 3.5;
    b2.c_plus *= 3.5;
    CHECK(compare_states(a2, b2).combined.mre == doctest::Approx(r.combined.mre).epsilon(1e-12));
}

TEST_CASE("compare_states errors and degenerate ranges") {
    try {
        compare_states(State::zeros(2), State::zeros(3));
        FAIL("expected LengthMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::LengthMismatch);
    }
    try {
        compare_states(State::zeros(0), State::zeros(0));
        FAIL("expected EmptyInput");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyInput);
    }
    MetricReport r = compare_states(make_state({1, 1}, {0, 1}), make_state({1, 1}, {0, 1}));
    CHECK(std::isnan(r.c0.mre));
    CHECK(to_json(r)["c0"]["mre_percent"].is_null());
    CHECK(r.combined.mre == 0.0);
}

TEST_CASE("report and nodal CSV export") {
    UnitGraph ug = decompose(testing::straight_chain(3), 8);
    ComputationGraph g = build_unit_graph(ug.units[0], SimParams{});
    State truth = State::zeros(g.size()), pred = State::zeros(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        truth.c0[static_cast<Eigen::Index>(i)] = 0.01 * static_cast<double>(i);
        pred.c0[static_cast<Eigen::Index>(i)] = 0.01 * static_cast<double>(i) + (i == 5 ? 0.3 : 0.0);
    }
    MetricReport r = compare_states(pred, truth);
    auto dir = std::filesystem::temp_directory_path() / "ntl_test_evaluation";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    write_nodal_error_csv(dir / "err.csv", g, r);
    write_report(dir / "report.json", r);
    std::ifstream in(dir / "err.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "node_id,x,y,z,abs_error");
    int rows = 0;
    while (std::getline(in, line)) {
        if (rows == 5) CHECK(line.substr(line.rfind(',') + 1).substr(0, 4) == "0.29");
        ++rows;
    }
    CHECK(rows == static_cast<int>(g.size()));
    std::ifstream rj(dir / "report.json");
    nlohmann::json j = nlohmann::json::parse(rj);
    CHECK(j["combined"]["mae"].get<double>() == r.combined.mae);
    std::filesystem::remove_all(dir);
}

TEST_CASE("median") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK_THROWS_AS(median({}), Error);
}

TEST_CASE("benchmark: shared horizon, oracle final state and repeat counts") {
    UnitGraph ug = decompose(testing::straight_chain(4, 1.0, 1.5), 8);
    SimParams p;
    BoundaryCondition bc;
    SimulatorModel pipe(UnitKind::Pipe, {1, 4, OutputMode::Increment});
    SimulatorModel bif(UnitKind::Bifurcation, {1, 4, OutputMode::Increment});
    BenchmarkOptions opt;
    opt.repeats = 2;
    opt.steady.tol = 1e-4;
    BenchmarkReport r = benchmark(ug, p, bc, pipe, bif, nullptr, opt);
    CHECK(r.oracle_runs.size() == 2);
    CHECK(r.surrogate_runs.size() == 2);
    CHECK(r.steps > 0);
    CHECK(r.horizon == doctest::Approx(r.steps * p.dt));
    CHECK(r.timing.ratio > 0.0);
    ComputationGraph net = build_network_graph(ug, p);
    FieldSeries direct = TransportSolver(net, p, bc).run_to_steady(opt.steady);
    CHECK(direct.c0.back() == r.oracle_final.c0);
    // zero-weight increment models keep the initial state away from the inlet
    State init = initial_state(net, bc);
    CHECK(r.surrogate_final.c0 == init.c0);
    nlohmann::json j = to_json(r);
    CHECK(j["oracle_horizon_seconds"] == j["surrogate_horizon_seconds"]);
    CHECK(j["accuracy"]["timing"]["ratio"].get<double>() == r.timing.ratio);
}

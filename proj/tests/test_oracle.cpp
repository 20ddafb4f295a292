#include "oracle_reference.hpp"
#include "support.hpp"

#include "ntl/error.hpp"
#include "ntl/oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

using namespace ntl;

using namespace testing;

TEST_CASE("laplacian rows sum to zero and weights are symmetric") {
    SimParams p;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> jitter(-0.2, 0.2);
    // random pipe geometry: 20 sections, random spacing and radius
    std::vector<SectionSite> sites;
    Vec3 c = Vec3::Zero();
    for (int i = 0; i < 20; ++i) {
        SectionSite s;
        s.vertex = i;
        s.center = c;
        s.axis = Vec3(1, jitter(rng), jitter(rng)).normalized();
        s.radius = 1.0 + jitter(rng);
        s.upstream = i - 1;
        sites.push_back(s);
        c += s.axis * (1.0 + jitter(rng));
    }
    ComputationGraph g = build_graph(sites, p);
    DiscreteOperators ops = build_operators(g);
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(g.size()));
    CHECK(ops.laplacian.apply(ones).cwiseAbs().maxCoeff() < 1e-12);

    std::map<std::pair<int, int>, double> w;
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = 0; j < g.size(); ++j) {
            if (i == j) continue;
            double v = ops.laplacian.at(static_cast<int>(i), static_cast<int>(j));
            if (v != 0.0) w[{static_cast<int>(i), static_cast<int>(j)}] = v;
        }
    }
    CHECK(w.size() == 2 * g.edges.size());
    for (const auto& e : g.edges) {
        double l = (g.nodes[static_cast<std::size_t>(e.a)].position - g.nodes[static_cast<std::size_t>(e.b)].position).norm();
        CHECK(w[{e.a, e.b}] == w[{e.b, e.a}]);
        CHECK(w[{e.a, e.b}] == doctest::Approx(1.0 / (l * l)).epsilon(1e-13));
    }

    // upwind: two nonzeros on every row with a predecessor, none otherwise
    for (int i = 0; i < static_cast<int>(g.size()); ++i) {
        int nnz = ops.upwind.row_end(i) - ops.upwind.row_begin(i);
        CHECK(nnz == (g.axial_pred[static_cast<std::size_t>(i)] >= 0 ? 2 : 0));
    }
}

TEST_CASE("upwind is exact on linear fields") {
    SimParams p;
    ComputationGraph g = build_graph(straight_sites(10, 0.7, 1.0), p);
    DiscreteOperators ops = build_operators(g);
    const double slope = -0.37;
    Eigen::VectorXd c(static_cast<Eigen::Index>(g.size()));
    for (std::size_t i = 0; i < g.size(); ++i) {
        c[static_cast<Eigen::Index>(i)] = 2.0 + slope * g.nodes[i].position.x();
    }
    Eigen::VectorXd uc = ops.upwind.apply(c);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.axial_pred[i] >= 0) {
            CHECK(uc[static_cast<Eigen::Index>(i)] == doctest::Approx(g.nodes[i].velocity * slope).epsilon(1e-12));
        }
    }
}

TEST_CASE("uniform reaction equilibrium is a fixed point") {
    SimParams p;
    BoundaryCondition bc{0.8, p.k_plus / p.kp_plus, 0, 0};
    ComputationGraph g = build_graph(straight_sites(8, 1.0, 1.0), p);
    State s = State::zeros(g.size());
    s.c0.setConstant(0.8);
    s.c_plus.setConstant(0.8 * 2.0);
    TransportSolver solver(g, p, bc);
    State next = solver.step(s);
    CHECK((next.c0 - s.c0).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((next.c_plus - s.c_plus).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("pure advection moves a front downstream") {
    SimParams p;
    p.D = 0.0;
    p.k_plus = 0.0;
    p.kp_plus = 0.0;
    p.u_i = 0.5;
    BoundaryCondition bc{0.0, 0.0, 0, 0};
    ComputationGraph g = build_graph(straight_sites(20, 1.0, 1.0), p);
    TransportSolver solver(g, p, bc);
    State s = State::zeros(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.nodes[i].section >= 1 && g.nodes[i].section < 6) {
            s.c_plus[static_cast<Eigen::Index>(i)] = 1.0;
        }
    }
    auto upstream_total = [&](const State& st) {
        double t = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (g.nodes[i].section < 8) t += st.c_plus[static_cast<Eigen::Index>(i)];
        }
        return t;
    };
    double prev = upstream_total(s);
    double x0 = 0.0;
    for (int k = 0; k < 40; ++k) {
        s = solver.step(s);
        double now = upstream_total(s);
        CHECK(now <= prev * (1 + 1e-14) + 1e-14);
        prev = now;
        double mass = s.c_plus.sum();
        double xm = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            xm += g.nodes[i].position.x() * s.c_plus[static_cast<Eigen::Index>(i)];
        }
        if (mass > 0) {
            CHECK(xm / mass >= x0 - 1e-12);
            x0 = xm / mass;
        }
    }
}

TEST_CASE("steady state matches the dense solve with ratio two") {
    SimParams p; // D=1, k+=1, k'+=0.5, u_i=0.1, dt=0.1
    BoundaryCondition bc{1.0, 1.0, 0, 0};
    ComputationGraph g = build_graph(straight_sites(11, 1.0, 1.0), p);
    REQUIRE(g.size() <= 200);
    TransportSolver solver(g, p, bc);
    SteadyOptions opts;
    opts.tol = 1e-10;
    opts.max_time = 2000.0;
    opts.record_every = 100;
    FieldSeries fs = solver.run_to_steady(opts);
    REQUIRE(fs.converged);
    State last = fs.state(fs.size() - 1);
    State dense = brute_force_steady(g, p, bc);
    double scale = dense.c0.cwiseAbs().maxCoeff();
    CHECK((last.c0 - dense.c0).cwiseAbs().maxCoeff() / scale < 1e-5);
    CHECK((last.c_plus - dense.c_plus).cwiseAbs().maxCoeff() / scale < 1e-5);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.nodes[i].section >= 5) {
            double ratio = last.c_plus[static_cast<Eigen::Index>(i)] / last.c0[static_cast<Eigen::Index>(i)];
            CHECK(std::abs(ratio - 2.0) / 2.0 < 1e-4);
        }
    }
    for (std::size_t k = 1; k < fs.size(); ++k) {
        CHECK(fs.times[k] > fs.times[k - 1]);
    }
}

TEST_CASE("zero input is steady immediately") {
    SimParams p;
    BoundaryCondition bc{0.0, 0.0, 0, 0};
    ComputationGraph g = build_graph(straight_sites(4, 1.0, 1.0), p);
    FieldSeries fs = run_to_steady(g, p, bc, 1e-6, 100.0);
    CHECK(fs.converged);
    CHECK(fs.size() == 2);
}

TEST_CASE("max_time returns a partial series") {
    SimParams p;
    BoundaryCondition bc;
    ComputationGraph g = build_graph(straight_sites(6, 1.0, 1.0), p);
    FieldSeries fs = run_to_steady(g, p, bc, 1e-12, 1.0);
    CHECK_FALSE(fs.converged);
    CHECK(fs.size() == 11);
    CHECK(fs.times.back() == doctest::Approx(1.0));
    CHECK_THROWS_AS(run_to_steady(g, p, bc, 0.0, 1.0), Error);
}

TEST_CASE("pure diffusion conserves mass and relaxes to the mean") {
    SimParams p;
    p.k_plus = 0.0;
    p.kp_plus = 0.0;
    p.u_i = 0.0;
    BoundaryCondition bc;
    ComputationGraph g = build_graph(straight_sites(5, 1.0, 1.0), p);
    TransportSolver solver(g, p, bc, Closure::Reflecting);
    std::mt19937_64 rng(5);
    State s = random_state(g.size(), rng);
    const double mean = s.c0.mean();
    double mass = s.c0.sum();
    for (int k = 0; k < 50; ++k) {
        s = solver.step(s);
        CHECK(std::abs(s.c0.sum() - mass) < 1e-10);
        mass = s.c0.sum();
    }
    SteadyOptions opts;
    opts.tol = 1e-12;
    opts.max_time = 5000.0;
    opts.record_every = 1000;
    FieldSeries fs = solver.run_to_steady(s, opts);
    REQUIRE(fs.converged);
    CHECK((fs.c0.back().array() - mean).abs().maxCoeff() < 1e-9);
}

TEST_CASE("solution is linear in the inlet value") {
    SimParams p;
    BoundaryCondition one{0.7, 1.0, 0, 0}, two{1.4, 1.0, 0, 0};
    ComputationGraph g = build_graph(straight_sites(6, 1.0, 1.0), p);
    TransportSolver a(g, p, one), b(g, p, two);
    State sa = initial_state(g, one), sb = initial_state(g, two);
    for (int k = 0; k < 30; ++k) {
        sa = a.step(sa);
        sb = b.step(sb);
        for (Eigen::Index i = 0; i < sa.c0.size(); ++i) {
            CHECK(std::abs(sb.c0[i] - 2 * sa.c0[i]) <= 1e-12 * std::max(1.0, std::abs(sb.c0[i])));
            CHECK(std::abs(sb.c_plus[i] - 2 * sa.c_plus[i]) <= 1e-12 * std::max(1.0, std::abs(sb.c_plus[i])));
        }
    }
}

TEST_CASE("positivity over random graphs and parameters") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int trials = 0;
    for (int t = 0; t < 200; ++t) {
        SimParams p;
        p.D = 2.0 * u(rng);
        p.k_plus = 2.0 * u(rng);
        p.kp_plus = 2.0 * u(rng);
        p.u_i = 0.5 * u(rng);
        p.dt = 0.05 + 0.2 * u(rng);
        BoundaryCondition bc{2.0 * u(rng), 2.0 * u(rng), 0, 0};
        int n = 2 + static_cast<int>(6 * u(rng));
        ComputationGraph g = build_graph(straight_sites(n, 0.5 + u(rng), 0.5 + 2 * u(rng)), p);
        TransportSolver solver(g, p, bc);
        State s = random_state(g.size(), rng);
        for (int k = 0; k < 5; ++k) {
            s = solver.step(s);
            CHECK(s.c0.minCoeff() >= 0.0);
            CHECK(s.c_plus.minCoeff() >= 0.0);
        }
        ++trials;
    }
    CHECK(trials == 200);
}

TEST_CASE("negative input is rejected") {
    SimParams p;
    BoundaryCondition bc;
    ComputationGraph g = build_graph(straight_sites(3, 1.0, 1.0), p);
    TransportSolver solver(g, p, bc);
    State s = State::zeros(g.size());
    s.c0[5] = -1.0;
    try {
        solver.step(s);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NegativeInput);
    }
}

TEST_CASE("free step matches the solver") {
    SimParams p;
    BoundaryCondition bc;
    ComputationGraph g = build_graph(straight_sites(4, 1.0, 1.0), p);
    DiscreteOperators ops = build_operators(g);
    State s0 = initial_state(g, bc);
    State a = step(s0, g, ops, p, bc);
    State b = TransportSolver(g, p, bc).step(s0);
    CHECK(a.c0 == b.c0);
    CHECK(a.c_plus == b.c_plus);
}

#pragma once

// Independent reference pieces for the oracle: a dense steady-state solve
// assembled straight from the edge list, plus small fixtures.

#include "ntl/graphgen.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace testing {

using namespace ntl;

inline std::vector<SectionSite> straight_sites(int n, double spacing, double radius) {
    std::vector<SectionSite> out;
    for (int i = 0; i < n; ++i) {
        SectionSite s;
        s.vertex = i;
        s.center = Vec3(i * spacing, 0, 0);
        s.axis = Vec3::UnitX();
        s.radius = radius;
        s.upstream = i - 1;
        out.push_back(s);
    }
    return out;
}

// Dense Gaussian elimination with partial pivoting.
inline Eigen::VectorXd dense_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) {
                piv = r;
            }
        }
        std::swap(a[col], a[piv]);
        std::swap(b[col], b[piv]);
        for (std::size_t r = col + 1; r < n; ++r) {
            double f = a[r][col] / a[col][col];
            if (f == 0.0) {
                continue;
            }
            for (std::size_t c = col; c < n; ++c) {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    Eigen::VectorXd x(static_cast<Eigen::Index>(n));
    for (std::size_t i = n; i-- > 0;) {
        double acc = b[i];
        for (std::size_t c = i + 1; c < n; ++c) {
            acc -= a[i][c] * x[static_cast<Eigen::Index>(c)];
        }
        x[static_cast<Eigen::Index>(i)] = acc / a[i][i];
    }
    return x;
}

// Steady state assembled from the graph's edge list and positions directly.
inline State brute_force_steady(const ComputationGraph& g, const SimParams& p, const BoundaryCondition& bc) {
    const std::size_t n = g.size();
    std::vector<std::vector<double>> a(2 * n, std::vector<double>(2 * n, 0.0));
    std::vector<double> b(2 * n, 0.0);
    std::vector<int> kind(n, 0); // 0 interior, 1 held, 2 closure
    for (int i : g.held_nodes) kind[static_cast<std::size_t>(i)] = 1;
    for (int i : g.closure_nodes) kind[static_cast<std::size_t>(i)] = 2;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t r0 = i, rp = n + i;
        if (kind[i] == 1) {
            a[r0][i] = 1.0;
            b[r0] = bc.c_in;
            a[rp][n + i] = 1.0;
            b[rp] = bc.lambda_in * bc.c_in;
            continue;
        }
        std::size_t pred = static_cast<std::size_t>(g.axial_pred[i]);
        if (kind[i] == 2) {
            a[r0][i] = 1.0;
            a[r0][pred] = -1.0;
            a[rp][n + i] = 1.0;
            a[rp][n + pred] = -1.0;
            continue;
        }
        for (const auto& e : g.edges) {
            if (e.a != static_cast<int>(i) && e.b != static_cast<int>(i)) {
                continue;
            }
            std::size_t j = static_cast<std::size_t>(e.a == static_cast<int>(i) ? e.b : e.a);
            double l = (g.nodes[i].position - g.nodes[j].position).norm();
            a[r0][j] += p.D / (l * l);
            a[r0][i] -= p.D / (l * l);
        }
        a[r0][i] -= p.k_plus;
        a[r0][n + i] += p.kp_plus;
        double l = (g.nodes[i].position - g.nodes[pred].position).norm();
        double u = g.nodes[i].velocity;
        a[rp][n + i] -= u / l + p.kp_plus;
        a[rp][n + pred] += u / l;
        a[rp][i] += p.k_plus;
    }
    Eigen::VectorXd x = dense_solve(a, b);
    State s;
    s.c0 = x.head(static_cast<Eigen::Index>(n));
    s.c_plus = x.tail(static_cast<Eigen::Index>(n));
    return s;
}

inline State random_state(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    State s = State::zeros(n);
    for (std::size_t i = 0; i < n; ++i) {
        s.c0[static_cast<Eigen::Index>(i)] = u(rng);
        s.c_plus[static_cast<Eigen::Index>(i)] = u(rng);
    }
    return s;
}

} // namespace testing

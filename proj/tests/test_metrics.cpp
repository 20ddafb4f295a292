#include "ntl/error.hpp"
#include "ntl/metrics.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace ntl;

TEST_CASE("mae and mre on the hand-computed pair") {
    std::vector<double> truth{0.0, 1.0}, pred{0.1, 0.9};
    CHECK(mae(pred, truth) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(mre(pred, truth) == doctest::Approx(10.0).epsilon(1e-14));
    CHECK(mae(truth, truth) == 0.0);
    CHECK(mre(truth, truth) == 0.0);
}

TEST_CASE("metric errors") {
    std::vector<double> empty, one{1.0}, two{1.0, 2.0}, flat{3.0, 3.0};
    auto code_of = [](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::ConfigError;
    };
    CHECK(code_of([&] { mae(empty, empty); }) == ErrorCode::EmptyInput);
    CHECK(code_of([&] { mae(one, two); }) == ErrorCode::LengthMismatch);
    CHECK(code_of([&] { mre(two, flat); }) == ErrorCode::DegenerateRange);
}

TEST_CASE("frozen reference values") {
    // sin/cos vectors; values from an independent recomputation
    struct Ref {
        int n;
        double mae, mre;
    };
    for (Ref r : {Ref{5, 1.9189866221277483, 52.48390962020611}, Ref{17, 2.3551750056652185, 59.02775738783102},
                  Ref{64, 2.580997838908438, 64.64593895306392}}) {
        std::vector<double> p, t;
        for (int i = 0; i < r.n; ++i) {
            p.push_back(std::sin(0.7 * i + r.n) * 3.0);
            t.push_back(std::cos(1.3 * i - r.n) * 2.0 + 0.5);
        }
        CHECK(std::abs(mae(p, t) - r.mae) <= 1e-15 * r.mae);
        CHECK(std::abs(mre(p, t) - r.mre) <= 1e-14 * r.mre);
    }
}

TEST_CASE("scale and translation invariance") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd p(20), t(20);
        for (int i = 0; i < 20; ++i) {
            p(i) = u(rng);
            t(i) = u(rng);
        }
        double s = std::exp(3.0 * u(rng)), shift = 10.0 * u(rng);
        CHECK(mre(Eigen::VectorXd(s * p), Eigen::VectorXd(s * t)) == doctest::Approx(mre(p, t)).epsilon(1e-12));
        Eigen::VectorXd ps = p.array() + shift, ts = t.array() + shift;
        CHECK(mae(ps, ts) == doctest::Approx(mae(p, t)).epsilon(1e-12));
        double sq = (p - t).squaredNorm();
        CHECK(mae(p, t) * mae(p, t) * 20.0 == doctest::Approx(sq).epsilon(1e-12));
    }
}

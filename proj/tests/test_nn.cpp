#include "ntl/error.hpp"
#include "ntl/nn.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <utility>

using namespace ntl;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
    return m;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("ntl_test_" + name);
}

// Loss mixing every differentiable op used by the models.
Var composite_loss(Tape& t, Mlp& mlp, const Matrix& x, const CsrMatrix& op, const Matrix& target) {
    Var in = t.constant(x);
    Var y = mlp.forward(t, in);                      // n x 2
    Var c0 = t.slice_cols(y, 0, 1);
    Var cp = t.slice_cols(y, 1, 1);
    Var lap = t.sparse(op, c0);
    Var mixed = t.concat_cols({t.add(lap, cp), t.sub(c0, t.scale(cp, 0.3))});
    Var g = t.gather_rows(mixed, {0, 2, 2, 4});
    Var r = t.reshape(g, 2, 4);
    Matrix mask = Matrix::Constant(y.rows(), 2, 0.5);
    mask(0, 0) = 2.0;
    Var err = t.sub(t.mul(y, mask), t.constant(target));
    Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(y.rows(), 0.5, 1.5);
    return t.add(t.add(t.mean(t.square(err)), t.weighted_sum(t.square(mixed), w)),
                 t.sum(t.square(t.relu(r))));
}

} // namespace

TEST_CASE("zero MLP outputs zeros; identity layer passes through") {
    std::mt19937_64 rng(1);
    Mlp zero({3, 5, 4});
    Matrix x = random_matrix(6, 3, rng);
    CHECK(mlp_forward(zero, x).cwiseAbs().maxCoeff() == 0.0);

    Mlp id({4, 4});
    id.weight(0).value = Matrix::Identity(4, 4);
    Matrix y = random_matrix(5, 4, rng);
    CHECK(mlp_forward(id, y) == y);
    CHECK_THROWS_AS(mlp_forward(id, x), Error);
    CHECK(Mlp({12, 32, 32}).parameter_count() == 12 * 32 + 32 + 32 * 32 + 32);
}

TEST_CASE("MLP forward matches a hand-rolled computation") {
    std::mt19937_64 rng(2);
    Mlp mlp({4, 8, 8, 2});
    mlp.init_glorot(rng);
    for (std::size_t l = 0; l < mlp.layers(); ++l) {
        mlp.bias(l).value = random_matrix(1, mlp.bias(l).value.cols(), rng);
    }
    Matrix x = random_matrix(5, 4, rng);
    Matrix y = mlp_forward(mlp, x);
    for (int s = 0; s < 5; ++s) {
        std::vector<double> h(x.row(s).data(), x.row(s).data() + 4);
        for (std::size_t l = 0; l < mlp.layers(); ++l) {
            const Matrix& w = mlp.weight(l).value;
            std::vector<double> next(static_cast<std::size_t>(w.cols()));
            for (Eigen::Index j = 0; j < w.cols(); ++j) {
                double acc = mlp.bias(l).value(0, j);
                for (Eigen::Index i = 0; i < w.rows(); ++i) acc += h[static_cast<std::size_t>(i)] * w(i, j);
                next[static_cast<std::size_t>(j)] = (l + 1 < mlp.layers() && acc < 0) ? 0.0 : acc;
            }
            h = next;
        }
        CHECK(y(s, 0) == doctest::Approx(h[0]).epsilon(1e-13));
        CHECK(y(s, 1) == doctest::Approx(h[1]).epsilon(1e-13));
    }
    // recorded and plain forward agree bit for bit
    Tape t;
    Var out = mlp.forward(t, t.constant(x));
    CHECK(out.value() == y);
}

TEST_CASE("scalar least squares gradient in closed form") {
    std::mt19937_64 rng(3);
    Matrix x = random_matrix(7, 1, rng), y = random_matrix(7, 1, rng);
    Parameter w(Matrix::Constant(1, 1, 0.8));
    Tape t;
    Var loss = t.mean(t.square(t.sub(t.matmul(t.constant(x), t.param(w)), t.constant(y))));
    t.backward(loss);
    double expected = 2.0 * ((0.8 * x - y).cwiseProduct(x)).mean();
    CHECK(t.param_grad(w)(0, 0) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("relu subgradient at zero is zero") {
    Tape t;
    Parameter p(Matrix::Zero(1, 3));
    p.value(0, 2) = 1.0;
    Var loss = t.sum(t.relu(t.param(p)));
    t.backward(loss);
    Matrix g = t.param_grad(p);
    CHECK(g(0, 0) == 0.0);
    CHECK(g(0, 1) == 0.0);
    CHECK(g(0, 2) == 1.0);
}

TEST_CASE("backward without a forward pass") {
    Tape t;
    try {
        t.backward(Var{&t, 0});
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::GraphNotBuilt);
    }
    CHECK_THROWS_AS(t.accumulate_param_grads(), Error);
}

TEST_CASE("analytic gradients match central differences") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(100 + seed);
        Mlp mlp({5, 6, 6, 2});
        mlp.init_glorot(rng);
        for (std::size_t l = 0; l < mlp.layers(); ++l) {
            mlp.bias(l).value = random_matrix(1, mlp.bias(l).value.cols(), rng, 0.3);
        }
        const int n = 6;
        Matrix x = random_matrix(n, 5, rng);
        Matrix target = random_matrix(n, 2, rng);
        std::vector<Triplet> trip;
        for (int i = 0; i + 1 < n; ++i) {
            double w = 0.5 + i;
            trip.push_back({i, i + 1, w});
            trip.push_back({i + 1, i, w});
            trip.push_back({i, i, -w});
            trip.push_back({i + 1, i + 1, -w});
        }
        CsrMatrix op(n, n, trip);

        Tape t;
        Var loss = composite_loss(t, mlp, x, op, target);
        t.backward(loss);
        const double h = 1e-6;
        for (Parameter* p : mlp.parameters()) {
            Matrix g = t.param_grad(*p);
            for (Eigen::Index k = 0; k < p->value.size(); ++k) {
                double keep = p->value.data()[k];
                p->value.data()[k] = keep + h;
                Tape tp;
                double up = composite_loss(tp, mlp, x, op, target).value()(0, 0);
                p->value.data()[k] = keep - h;
                Tape tm;
                double dn = composite_loss(tm, mlp, x, op, target).value()(0, 0);
                p->value.data()[k] = keep;
                double fd = (up - dn) / (2 * h);
                double an = g.data()[k];
                double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
                CHECK(rel < 1e-5);
            }
        }
    }
}

TEST_CASE("adam: zero gradient leaves parameters and advances the step") {
    Parameter p(Matrix::Constant(2, 2, 1.5));
    AdamState st;
    Parameter* ps[] = {&p};
    adam_step(ps, st, 1e-3);
    CHECK(st.step == 1);
    CHECK(p.value == Matrix::Constant(2, 2, 1.5));
}

TEST_CASE("adam matches a scalar reference recurrence") {
    std::mt19937_64 rng(9);
    Parameter p(random_matrix(3, 2, rng));
    Matrix theta = p.value;
    AdamState st;
    Parameter* ps[] = {&p};
    std::vector<double> m(6, 0.0), v(6, 0.0);
    for (int step = 1; step <= 5; ++step) {
        p.grad = random_matrix(3, 2, rng);
        for (int k = 0; k < 6; ++k) {
            double g = p.grad.data()[k];
            m[static_cast<std::size_t>(k)] = 0.9 * m[static_cast<std::size_t>(k)] + 0.1 * g;
            v[static_cast<std::size_t>(k)] = 0.999 * v[static_cast<std::size_t>(k)] + 0.001 * g * g;
            double mh = m[static_cast<std::size_t>(k)] / (1 - std::pow(0.9, step));
            double vh = v[static_cast<std::size_t>(k)] / (1 - std::pow(0.999, step));
            theta.data()[k] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
        }
        adam_step(ps, st, 0.01);
        CHECK((p.value - theta).cwiseAbs().maxCoeff() < 1e-14);
    }
    Parameter q(Matrix::Zero(2, 2));
    Parameter* qs[] = {&p, &q};
    CHECK_THROWS_AS(adam_step(qs, st, 0.01), Error);
}

TEST_CASE("adam step tends to lr times the gradient sign") {
    Parameter p(Matrix::Zero(1, 2));
    AdamState st;
    Parameter* ps[] = {&p};
    p.grad = Matrix(1, 2);
    p.grad << 0.3, -2.0;
    Matrix before;
    for (int i = 0; i < 2000; ++i) {
        before = p.value;
        adam_step(ps, st, 1e-3);
    }
    Matrix delta = p.value - before;
    CHECK(delta(0, 0) == doctest::Approx(-1e-3).epsilon(1e-6));
    CHECK(delta(0, 1) == doctest::Approx(1e-3).epsilon(1e-6));
}

TEST_CASE("step learning-rate schedule") {
    LrSchedule s;
    CHECK(s.at(0) == 1e-3);
    CHECK(s.at(49) == 1e-3);
    CHECK(s.at(50) == 1e-4);
    CHECK(s.at(100) == 1e-5);
    CHECK(s.at(150) == 1e-6);
    CHECK(s.at(199) == 1e-6);
    CHECK(s.at(400) == 1e-6);
    std::set<double> seen;
    for (int e = 0; e < 200; ++e) seen.insert(s.at(e));
    CHECK(seen == std::set<double>{1e-3, 1e-4, 1e-5, 1e-6});
}

TEST_CASE("checkpoint round trip is bit exact") {
    std::mt19937_64 rng(4);
    Mlp mlp({3, 7, 2});
    mlp.init_glorot(rng);
    Checkpoint ck;
    ck.kind = "test";
    ck.architecture = R"({"layers":[3,7,2]})";
    ck.seed = 4;
    ck.config = R"({"lr":0.001})";
    AdamState st;
    for (auto* p : mlp.parameters()) p->grad = random_matrix(p->value.rows(), p->value.cols(), rng);
    auto params = mlp.parameters();
    adam_step(params, st, 1e-3);
    ck.tensors = collect_tensors(std::as_const(mlp).parameters());
    ck.optimizer = st;
    ck.epoch = 12;
    auto path = temp_path("ckpt.bin");
    save_checkpoint(path, ck);
    Checkpoint back = load_checkpoint(path);
    CHECK(back.kind == "test");
    CHECK(back.seed == 4);
    CHECK(back.epoch == 12);
    REQUIRE(back.tensors.size() == ck.tensors.size());
    for (std::size_t k = 0; k < ck.tensors.size(); ++k) {
        CHECK(back.tensors[k] == ck.tensors[k]);
    }
    REQUIRE(back.optimizer);
    CHECK(back.optimizer->step == 1);
    CHECK(back.optimizer->v.back() == st.v.back());

    Mlp other({3, 7, 2});
    auto op = other.parameters();
    assign_tensors(op, back.tensors);
    CHECK(mlp_forward(other, Matrix::Ones(2, 3)) == mlp_forward(mlp, Matrix::Ones(2, 3)));

    Mlp wrong({3, 6, 2});
    auto wp = wrong.parameters();
    try {
        assign_tensors(wp, back.tensors);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ArchitectureMismatch);
    }

    // flip one payload byte
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekg(-3, std::ios::end);
        char c;
        f.get(c);
        f.seekp(-3, std::ios::end);
        f.put(static_cast<char>(c ^ 0x20));
    }
    try {
        load_checkpoint(path);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::CorruptCheckpoint);
    }
    std::filesystem::remove(path);
}

TEST_CASE("relu pattern records input signs in order") {
    Tape t;
    Matrix a(1, 3), b(2, 1);
    a << -1.0, 2.0, 0.0;
    b << 3.0, -4.0;
    t.relu(t.constant(a));
    t.relu(t.constant(b));
    CHECK(t.relu_pattern() == std::vector<bool>{false, true, false, true, false});
    t.clear();
    CHECK(t.relu_pattern().empty());
}

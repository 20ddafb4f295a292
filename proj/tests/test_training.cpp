#include "support.hpp"

#include "ntl/error.hpp"
#include "ntl/graphgen.hpp"
#include "ntl/training.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

using namespace ntl;

namespace {

DatasetSpec small_spec(std::uint64_t seed) {
    DatasetSpec s;
    s.seed = seed;
    s.geometries = 4;
    s.boundary_count = 5;
    s.windows.per_run = 3;
    s.geometry.pipe_sections_max = 5;
    s.geometry.spacing_min = 1.0;
    return s;
}

State as_state(const Matrix& m) {
    State s = State::zeros(static_cast<std::size_t>(m.rows()));
    s.c0 = m.col(0);
    s.c_plus = m.col(1);
    return s;
}

} // namespace

TEST_CASE("generate_geometries: counts and seeded determinism") {
    GeometryPopulation one = generate_geometries(3, 1, 0);
    CHECK(one.pipes.size() == 1);
    CHECK(one.bifurcations.empty());

    GeometryPopulation a = generate_geometries(11, 5, 5), b = generate_geometries(11, 5, 5);
    CHECK(geometry_hash(a.pipes) == geometry_hash(b.pipes));
    CHECK(geometry_hash(a.bifurcations) == geometry_hash(b.bifurcations));
    GeometryPopulation c = generate_geometries(12, 5, 5);
    CHECK(geometry_hash(a.pipes) != geometry_hash(c.pipes));
    // the pipe stream does not depend on how many bifurcations are drawn
    CHECK(geometry_hash(generate_geometries(11, 5, 0).pipes) == geometry_hash(a.pipes));
}

TEST_CASE("property sweep: 100 random pipes satisfy the geometry ranges and build valid graphs") {
    GeometrySettings gs;
    GeometryPopulation pop = generate_geometries(2024, 100, 0, gs);
    REQUIRE(pop.pipes.size() == 100);
    for (const NeuriteUnit& u : pop.pipes) {
        CHECK(u.kind == UnitKind::Pipe);
        const int n = static_cast<int>(u.sections.size());
        CHECK(n >= gs.pipe_sections_min);
        CHECK(n <= gs.pipe_sections_max);
        CHECK(u.sections.front().upstream == -1);
        for (int s = 1; s < n; ++s) {
            const SectionSite& site = u.sections[static_cast<std::size_t>(s)];
            CHECK(site.upstream == s - 1);
            double spacing = (site.center - u.sections[static_cast<std::size_t>(s - 1)].center).norm();
            CHECK(spacing >= gs.spacing_min * 0.95);
            CHECK(spacing <= gs.spacing_max * 1.01);
        }
        for (const SectionSite& site : u.sections) {
            CHECK(site.radius >= gs.radius_min - 1e-12);
            CHECK(site.radius <= gs.radius_max + 1e-12);
            CHECK(!site.branch);
        }
        CHECK(u.sections.back().radius / u.sections.front().radius >= gs.taper_min - 1e-9);
        CHECK(u.sections.back().radius <= u.sections.front().radius + 1e-12);

        ComputationGraph g = build_unit_graph(u, SimParams{});
        CHECK(g.size() == static_cast<std::size_t>(n * kCircularSlots));
        CHECK(g.held_nodes.size() == static_cast<std::size_t>(kCircularSlots));
        CHECK(g.closure_nodes.size() == static_cast<std::size_t>(kCircularSlots));
        for (const GraphEdge& e : g.edges) {
            CHECK(e.a < e.b);
            CHECK(e.length > 0.0);
        }
        for (const GraphNode& node : g.nodes) {
            CHECK(node.velocity >= 0.0);
            CHECK(node.radial_fraction <= 1.0);
        }
    }
}

TEST_CASE("random bifurcations: one branch section, daughter ratios and branch angle in range") {
    GeometrySettings gs;
    GeometryPopulation pop = generate_geometries(77, 0, 40, gs);
    REQUIRE(pop.bifurcations.size() == 40);
    for (const NeuriteUnit& u : pop.bifurcations) {
        CHECK(u.kind == UnitKind::Bifurcation);
        REQUIRE(u.branch_section >= 0);
        int branches = 0;
        for (const SectionSite& s : u.sections) branches += s.branch ? 1 : 0;
        CHECK(branches == 1);
        CHECK(u.sections.size() == static_cast<std::size_t>(1 + 3 * kBifurcationStubSections));
        const SectionSite& bp = u.sections[static_cast<std::size_t>(u.branch_section)];
        const double angle = std::acos(std::clamp(bp.daughter_dirs[0].dot(bp.daughter_dirs[1]), -1.0, 1.0)) * 180.0 /
                             std::numbers::pi;
        CHECK(angle >= gs.angle_min_deg - 10.0);
        CHECK(angle <= gs.angle_max_deg + 10.0);
        for (int d = 1; d <= 2; ++d) {
            const int outer = u.stubs[static_cast<std::size_t>(d)][2];
            const double r = u.sections[static_cast<std::size_t>(outer)].radius;
            const double ratio = r / bp.radius;
            // the radius floor overrides the ratio on thin parents
            CHECK((ratio <= gs.daughter_ratio_max + 1e-9 || std::abs(r - gs.radius_min) < 1e-12));
            CHECK(ratio >= std::min(gs.daughter_ratio_min, gs.radius_min / bp.radius) - 1e-9);
        }
        ComputationGraph g = build_unit_graph(u, SimParams{});
        CHECK(graph_kind(g) == UnitKind::Bifurcation);
        CHECK(g.closure_nodes.size() == static_cast<std::size_t>(2 * kCircularSlots));
    }
}

TEST_CASE("generate_dataset: a full window gives T-1 samples; zero boundary values are filtered") {
    GeometryPopulation pop = generate_geometries(5, 1, 0);
    SimParams p;
    WindowSettings w;
    w.per_run = 0;
    SimDataset d = generate_dataset(UnitKind::Pipe, pop.pipes, {1.0}, 1.0, p, w, 9);
    ComputationGraph g = build_unit_graph(pop.pipes[0], p);
    BoundaryCondition bc;
    TransportSolver solver(g, p, bc);
    FieldSeries series = solver.run_to_steady(w.steady);
    CHECK(d.samples.size() == series.size() - 1);
    for (std::size_t k = 0; k < d.samples.size(); ++k) CHECK(d.samples[k].time_index == static_cast<int>(k));

    SimDataset zero = generate_dataset(UnitKind::Pipe, pop.pipes, {0.0}, 1.0, p, w, 9);
    CHECK(zero.samples.empty());

    try {
        generate_dataset(UnitKind::Bifurcation, pop.pipes, {1.0}, 1.0, p, w, 9);
        FAIL("expected KindMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::KindMismatch);
    }
    SteadyOptions tight;
    tight.max_time = 0.5;
    w.steady = tight;
    try {
        generate_dataset(UnitKind::Pipe, pop.pipes, {1.0}, 1.0, p, w, 9);
        FAIL("expected NotConverged");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotConverged);
    }
}

TEST_CASE("windows: per_run picks distinct sorted indices, early steps over-represented") {
    GeometryPopulation pop = generate_geometries(6, 3, 0);
    WindowSettings w;
    w.per_run = 4;
    SimDataset d = generate_dataset(UnitKind::Pipe, pop.pipes, {0.5, 1.0, 2.0}, 1.0, SimParams{}, w, 1);
    CHECK(d.samples.size() == 3 * 3 * 4);
    int early = 0, late = 0;
    for (std::size_t i = 0; i < d.samples.size(); i += 4) {
        for (std::size_t j = 1; j < 4; ++j) CHECK(d.samples[i + j].time_index > d.samples[i + j - 1].time_index);
    }
    for (const SimSample& s : d.samples) (s.time_index < 100 ? early : late)++;
    CHECK(early > 0);
    CHECK(late > 0);
}

TEST_CASE("sample correctness: one oracle step from the stored state reproduces the truth") {
    DatasetSpec spec = small_spec(31);
    for (UnitKind kind : {UnitKind::Pipe, UnitKind::Bifurcation}) {
        SimDataset d = build_dataset(spec, kind);
        REQUIRE(!d.samples.empty());
        std::mt19937_64 rng(8);
        for (int trial = 0; trial < 50; ++trial) {
            const SimSample& s = d.samples[rng() % d.samples.size()];
            const ComputationGraph& g = d.graphs[static_cast<std::size_t>(s.geometry)];
            BoundaryCondition bc;
            bc.c_in = s.c_in;
            bc.lambda_in = s.lambda_in;
            TransportSolver solver(g, d.params, bc);
            State next = solver.step(as_state(s.prev));
            const double scale = std::max(1.0, s.truth.cwiseAbs().maxCoeff());
            CHECK((next.c0 - s.truth.col(0)).cwiseAbs().maxCoeff() <= 1e-12 * scale);
            CHECK((next.c_plus - s.truth.col(1)).cwiseAbs().maxCoeff() <= 1e-12 * scale);
        }
    }
}

TEST_CASE("kfold: sizes, partition and errors") {
    auto folds = kfold(8, 4, 1);
    REQUIRE(folds.size() == 4);
    std::set<int> seen;
    for (const auto& f : folds) {
        CHECK(f.size() == 2);
        for (int g : f) CHECK(seen.insert(g).second);
    }
    CHECK(seen.size() == 8);
    auto uneven = kfold(50, 4, 3);
    std::size_t lo = 100, hi = 0, total = 0;
    for (const auto& f : uneven) {
        lo = std::min(lo, f.size());
        hi = std::max(hi, f.size());
        total += f.size();
    }
    CHECK(total == 50);
    CHECK(hi - lo <= 1);
    CHECK(kfold(50, 4, 3) == uneven);
    try {
        kfold(3, 4, 1);
        FAIL("expected TooFewGeometries");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::TooFewGeometries);
    }
    try {
        kfold(8, 1, 1);
        FAIL("expected InvalidArgument");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidArgument);
    }
}

TEST_CASE("boundary values and sub-seeds") {
    auto v = boundary_values(4, 200);
    CHECK(v.size() == 200);
    for (double x : v) {
        CHECK(x >= 0.1);
        CHECK(x <= 2.0);
    }
    CHECK(boundary_values(4, 200) == v);
    CHECK(sub_seed(1, "geometry") != sub_seed(1, "boundary"));
    CHECK(sub_seed(1, "geometry") == sub_seed(1, "geometry"));
}

TEST_CASE("dataset directory round trip, byte-identical regeneration, tamper detection") {
    DatasetSpec spec = small_spec(17);
    auto base = std::filesystem::temp_directory_path() / "ntl_test_training";
    std::filesystem::remove_all(base);
    SimDataset d = build_dataset(spec, UnitKind::Pipe);
    save_dataset(base / "a", d, spec);
    save_dataset(base / "b", build_dataset(spec, UnitKind::Pipe), spec);
    for (const char* f : {"samples.bin", "index.csv", "manifest.json"}) {
        CHECK(file_sha256(base / "a" / f) == file_sha256(base / "b" / f));
    }
    DatasetSpec loaded_spec;
    SimDataset back = load_dataset(base / "a", &loaded_spec);
    CHECK(loaded_spec.to_json() == spec.to_json());
    REQUIRE(back.samples.size() == d.samples.size());
    CHECK(back.graphs.size() == d.graphs.size());
    for (std::size_t i = 0; i < d.samples.size(); ++i) {
        CHECK(back.samples[i].prev == d.samples[i].prev);
        CHECK(back.samples[i].truth == d.samples[i].truth);
        CHECK(back.samples[i].c_in == d.samples[i].c_in);
        CHECK(back.samples[i].geometry == d.samples[i].geometry);
    }
    CHECK(DatasetSpec::from_json(spec.to_json()).to_json() == spec.to_json());

    {
        std::fstream f(base / "a" / "samples.bin", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(8);
        f.put('\x7f');
    }
    try {
        load_dataset(base / "a");
        FAIL("expected HashMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::HashMismatch);
    }
    std::filesystem::remove_all(base);
}

TEST_CASE("random trees have the requested branch count and decompose") {
    for (int nb = 3; nb <= 7; ++nb) {
        Morphology m = random_tree(100 + nb, nb);
        Skeleton sk = resample(m, 1.0);
        UnitGraph ug = decompose(sk, 8);
        int bifs = 0;
        for (const NeuriteUnit& u : ug.units) bifs += u.kind == UnitKind::Bifurcation ? 1 : 0;
        CHECK(bifs == nb);
        CHECK(ug.interfaces.size() + 1 == ug.units.size());
        CHECK(to_swc(random_tree(100 + nb, nb)) == to_swc(m));
    }
}

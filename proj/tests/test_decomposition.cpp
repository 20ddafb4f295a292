#include "support.hpp"

#include "ntl/error.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <set>

using namespace ntl;
using testing::rec;

namespace {

ErrorCode decompose_error(const Skeleton& s, int per_pipe = 8) {
    try {
        decompose(s, per_pipe);
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::IoError;
}

int count(const UnitGraph& g, UnitKind kind) {
    int n = 0;
    for (const auto& u : g.units) {
        n += u.kind == kind;
    }
    return n;
}

// Connectivity of the interface graph by union-find.
bool interface_graph_is_tree(const UnitGraph& g) {
    std::vector<int> parent(g.units.size());
    for (std::size_t i = 0; i < parent.size(); ++i) {
        parent[i] = static_cast<int>(i);
    }
    std::function<int(int)> find = [&](int x) {
        return parent[static_cast<std::size_t>(x)] == x ? x : parent[static_cast<std::size_t>(x)] = find(parent[static_cast<std::size_t>(x)]);
    };
    for (const auto& itf : g.interfaces) {
        int a = find(itf.upstream_unit), b = find(itf.downstream_unit);
        if (a == b) {
            return false;
        }
        parent[static_cast<std::size_t>(a)] = b;
    }
    std::set<int> roots;
    for (std::size_t i = 0; i < parent.size(); ++i) {
        roots.insert(find(static_cast<int>(i)));
    }
    return roots.size() == 1 && g.interfaces.size() + 1 == g.units.size();
}

void check_coverage(const Skeleton& s, const UnitGraph& g) {
    std::map<int, int> seen;
    for (const auto& u : g.units) {
        for (int v : u.section_ids()) {
            ++seen[v];
        }
    }
    std::set<int> shared;
    for (const auto& itf : g.interfaces) {
        shared.insert(itf.section);
    }
    CHECK(shared.size() == g.interfaces.size());
    for (int v = 0; v < static_cast<int>(s.size()); ++v) {
        CHECK(seen[v] == (shared.count(v) ? 2 : 1));
    }
}

} // namespace

TEST_CASE("straight chain partition") {
    // pipes share their boundary section, so 9 sections split 5 + 5
    UnitGraph g = decompose(testing::straight_chain(8), 5);
    CHECK(g.units.size() == 2);
    CHECK(count(g, UnitKind::Bifurcation) == 0);
    REQUIRE(g.interfaces.size() == 1);
    CHECK(g.interfaces[0].kind == InterfaceKind::PipePipe);
    CHECK(g.interfaces[0].section == 4);

    UnitGraph g10 = decompose(testing::straight_chain(9), 5);
    CHECK(g10.units.size() == 3);
    CHECK(g10.units.back().sections.size() == 2);
    for (const auto& u : g10.units) {
        CHECK(u.sections.size() >= 2);
        CHECK(u.sections.size() <= 5);
    }
    CHECK(g10.inlet_unit == 0);
    CHECK(g10.inlet_section == 0);
    CHECK(g10.units[0].sections.front().role == BoundaryRole::Inlet);
    CHECK(g10.units[0].sections.back().role == BoundaryRole::Interface);
    CHECK(g10.units[2].sections.back().role == BoundaryRole::Outlet);
    CHECK_THROWS_AS(decompose(testing::straight_chain(9), 1), Error);
}

TEST_CASE("Y tree decomposition") {
    Skeleton s = resample(load_swc(testing::data_dir() / "y_tree.swc"), 1.0);
    UnitGraph g = decompose(s);
    CHECK(count(g, UnitKind::Bifurcation) == 1);
    CHECK(count(g, UnitKind::Pipe) == 3);
    REQUIRE(g.interfaces.size() == 3);
    for (const auto& itf : g.interfaces) {
        CHECK(itf.kind == InterfaceKind::PipeBifurcation);
    }
    check_coverage(s, g);

    const NeuriteUnit* bif = nullptr;
    for (const auto& u : g.units) {
        if (u.kind == UnitKind::Bifurcation) {
            bif = &u;
        }
    }
    REQUIRE(bif != nullptr);
    CHECK(bif->sections.size() == 10);
    const auto& branch = bif->sections[static_cast<std::size_t>(bif->branch_section)];
    CHECK(branch.branch);
    CHECK(branch.vertex == s.branch_points().front());
    for (const auto& stub : bif->stubs) {
        // each stub walks one skeleton edge at a time away from the junction
        int prev = branch.vertex;
        for (int idx : stub) {
            int v = bif->sections[static_cast<std::size_t>(idx)].vertex;
            bool adjacent = s.parent[static_cast<std::size_t>(v)] == prev ||
                            s.parent[static_cast<std::size_t>(prev)] == v;
            CHECK(adjacent);
            prev = v;
        }
    }
}

TEST_CASE("binary tree with seven branch points") {
    Skeleton s = resample(testing::binary_tree(3, 8.0), 1.0);
    // brute-force branch point count
    int branch = 0;
    for (const auto& c : s.children) {
        branch += c.size() >= 2;
    }
    REQUIRE(branch == 7);
    UnitGraph g = decompose(s);
    CHECK(count(g, UnitKind::Bifurcation) == 7);
    CHECK(interface_graph_is_tree(g));
    check_coverage(s, g);
    for (const auto& itf : g.interfaces) {
        CHECK(itf.kind == interface_kind(g.units[static_cast<std::size_t>(itf.upstream_unit)],
                                         g.units[static_cast<std::size_t>(itf.downstream_unit)]));
    }
}

TEST_CASE("abutting junctions give a b-b interface") {
    // junctions 6 sections apart: both claims of 3 meet at one shared section
    std::vector<SwcRecord> recs{rec(1, 0, 0, 0, 1, -1), rec(2, 4, 0, 0, 1, 1),
                                rec(3, 10, 1, 0, 1, 2), rec(4, 14, 4, 0, 1, 3),
                                rec(5, 14, -2, 0, 1, 3), rec(6, 8, -4, 0, 1, 2)};
    Skeleton s = resample(Morphology(recs), 1.0);
    REQUIRE(s.branch_points().size() == 2);
    UnitGraph g = decompose(s);
    int bb = 0;
    for (const auto& itf : g.interfaces) {
        bb += itf.kind == InterfaceKind::BifurcationBifurcation;
    }
    CHECK(bb == 1);
    CHECK(interface_graph_is_tree(g));
    check_coverage(s, g);
}

TEST_CASE("junctions closer than both claims are rejected") {
    std::vector<SwcRecord> recs{rec(1, 0, 0, 0, 1, -1), rec(2, 4, 0, 0, 1, 1),
                                rec(3, 9, 0, 0, 1, 2), rec(4, 13, 3, 0, 1, 3),
                                rec(5, 13, -3, 0, 1, 3), rec(6, 8, -4, 0, 1, 2)};
    Skeleton s = resample(Morphology(recs), 1.0);
    CHECK(decompose_error(s) == ErrorCode::PathTooShort);
}

TEST_CASE("trifurcations are rejected") {
    std::vector<SwcRecord> recs{rec(1, 0, 0, 0, 1, -1), rec(2, 5, 0, 0, 1, 1),
                                rec(3, 10, 3, 0, 1, 2), rec(4, 10, -3, 0, 1, 2),
                                rec(5, 10, 0, 3, 1, 2)};
    Skeleton s = resample(Morphology(recs), 1.0);
    CHECK(decompose_error(s) == ErrorCode::HighOrderBranch);
}

TEST_CASE("interface kind is order-insensitive and needs adjacency") {
    Skeleton s = resample(load_swc(testing::data_dir() / "y_tree.swc"), 1.0);
    UnitGraph g = decompose(s);
    const NeuriteUnit& root_pipe = g.units[0];
    const NeuriteUnit& bif_unit = g.units[1];
    REQUIRE(bif_unit.kind == UnitKind::Bifurcation);
    CHECK(interface_kind(root_pipe, bif_unit) == InterfaceKind::PipeBifurcation);
    CHECK(interface_kind(bif_unit, root_pipe) == InterfaceKind::PipeBifurcation);
    CHECK(interface_kind(g.units[2], g.units[1]) == InterfaceKind::PipeBifurcation);
    try {
        interface_kind(g.units[2], g.units[3]);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotAdjacent);
    }
    UnitGraph chain = decompose(testing::straight_chain(8), 5);
    CHECK(interface_kind(chain.units[0], chain.units[1]) == InterfaceKind::PipePipe);
}

TEST_CASE("decomposition is deterministic and serializes losslessly") {
    Skeleton s = resample(testing::binary_tree(2, 9.0), 1.0);
    UnitGraph a = decompose(s, 4);
    UnitGraph b = decompose(s, 4);
    CHECK(to_json(a).dump() == to_json(b).dump());
    UnitGraph back = unit_graph_from_json(to_json(a));
    CHECK(to_json(back).dump() == to_json(a).dump());
    CHECK_THROWS_AS(unit_graph_from_json(nlohmann::json::object()), Error);
}

TEST_CASE("kind names round trip") {
    for (auto k : {UnitKind::Pipe, UnitKind::Bifurcation}) {
        CHECK(unit_kind_from_string(to_string(k)) == k);
    }
    for (auto k : {InterfaceKind::PipePipe, InterfaceKind::PipeBifurcation,
                   InterfaceKind::BifurcationBifurcation}) {
        CHECK(interface_kind_from_string(to_string(k)) == k);
    }
    CHECK_THROWS_AS(unit_kind_from_string("tripod"), Error);
}

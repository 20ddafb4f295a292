#include "ntl/decomposition.hpp"

#include "ntl/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>

namespace ntl {

std::string_view to_string(UnitKind kind) {
    return kind == UnitKind::Pipe ? "pipe" : "bifurcation";
}

std::string_view to_string(InterfaceKind kind) {
    switch (kind) {
    case InterfaceKind::PipePipe: return "p-p";
    case InterfaceKind::PipeBifurcation: return "p-b";
    case InterfaceKind::BifurcationBifurcation: return "b-b";
    }
    return "?";
}

std::string_view to_string(BoundaryRole role) {
    switch (role) {
    case BoundaryRole::Interior: return "interior";
    case BoundaryRole::Inlet: return "inlet";
    case BoundaryRole::Outlet: return "outlet";
    case BoundaryRole::Interface: return "interface";
    }
    return "?";
}

UnitKind unit_kind_from_string(std::string_view text) {
    if (text == "pipe") return UnitKind::Pipe;
    if (text == "bifurcation") return UnitKind::Bifurcation;
    fail(ErrorCode::UnknownKind, "unknown unit kind '" + std::string(text) + "'");
}

InterfaceKind interface_kind_from_string(std::string_view text) {
    if (text == "p-p") return InterfaceKind::PipePipe;
    if (text == "p-b") return InterfaceKind::PipeBifurcation;
    if (text == "b-b") return InterfaceKind::BifurcationBifurcation;
    fail(ErrorCode::UnknownKind, "unknown interface kind '" + std::string(text) + "'");
}

namespace {

BoundaryRole role_from_string(std::string_view text) {
    if (text == "interior") return BoundaryRole::Interior;
    if (text == "inlet") return BoundaryRole::Inlet;
    if (text == "outlet") return BoundaryRole::Outlet;
    if (text == "interface") return BoundaryRole::Interface;
    fail(ErrorCode::ConfigError, "unknown boundary role '" + std::string(text) + "'");
}

Vec3 direction(const Vec3& from, const Vec3& to) {
    Vec3 d = to - from;
    double n = d.norm();
    require(n > 0.0, ErrorCode::DegenerateSegment, "coincident skeleton vertices");
    return d / n;
}

// One maximal unbranched run of skeleton vertices between key vertices.
struct Path {
    std::vector<int> vertices; // front: root or branch point; back: branch point or tip
};

Path walk_path(const Skeleton& s, int start, int first) {
    Path p{{start}};
    int cur = first;
    while (true) {
        p.vertices.push_back(cur);
        if (s.children[static_cast<std::size_t>(cur)].size() != 1) {
            break;
        }
        cur = s.children[static_cast<std::size_t>(cur)].front();
    }
    return p;
}

class Decomposer {
public:
    Decomposer(const Skeleton& s, int sections_per_pipe)
        : s_(s), per_pipe_(sections_per_pipe), sites_(skeleton_sites(s)) {}

    UnitGraph run() {
        for (std::size_t v = 0; v < s_.size(); ++v) {
            require(s_.children[v].size() <= 2, ErrorCode::HighOrderBranch,
                    "skeleton vertex " + std::to_string(v) + " has " +
                        std::to_string(s_.children[v].size()) + " children");
        }
        require(s_.size() >= 2, ErrorCode::PathTooShort, "skeleton has a single vertex");
        require(s_.children[0].size() == 1, ErrorCode::PathTooShort,
                "root is a branch point; no parent branch for the bifurcation stub");

        graph_.sites = sites_;
        graph_.inlet_section = 0;
        follow(walk_path(s_, 0, s_.children[0].front()), -1);
        graph_.inlet_unit = 0;
        for (auto& unit : graph_.units) {
            assign_roles(unit);
        }
        return std::move(graph_);
    }

private:
    // Walks one path; `upstream_unit` owns the path's first vertex (the
    // branch point's bifurcation) or is -1 at the root.
    void follow(const Path& path, int upstream_unit) {
        const auto& v = path.vertices;
        const int n = static_cast<int>(v.size()) - 1;
        const bool starts_at_branch = upstream_unit >= 0;
        const bool ends_at_branch = s_.children[static_cast<std::size_t>(v.back())].size() == 2;
        const int begin = starts_at_branch ? kBifurcationStubSections : 0;
        const int end = ends_at_branch ? n - kBifurcationStubSections : n;
        require(end >= begin, ErrorCode::PathTooShort,
                "path from vertex " + std::to_string(v.front()) + " to " +
                    std::to_string(v.back()) + " has " + std::to_string(n) +
                    " segments, too short for the bifurcation stubs");

        int previous = upstream_unit;
        // Pipes over [begin, end], consecutive pipes share a section.
        for (int s = begin; s < end;) {
            int last = std::min(s + per_pipe_ - 1, end);
            NeuriteUnit pipe;
            pipe.kind = UnitKind::Pipe;
            for (int i = s; i <= last; ++i) {
                pipe.sections.push_back(site(v[static_cast<std::size_t>(i)], i - s - 1));
            }
            previous = add_unit(std::move(pipe), previous, v[static_cast<std::size_t>(s)]);
            s = last;
        }

        if (!ends_at_branch) {
            return;
        }
        const int b = v.back();
        const auto& kids = s_.children[static_cast<std::size_t>(b)];
        std::array<Path, 2> daughters{walk_path(s_, b, kids[0]), walk_path(s_, b, kids[1])};
        for (const auto& d : daughters) {
            require(static_cast<int>(d.vertices.size()) - 1 >= kBifurcationStubSections,
                    ErrorCode::PathTooShort,
                    "daughter path from branch vertex " + std::to_string(b) +
                        " is shorter than the bifurcation stub");
        }

        NeuriteUnit bif;
        bif.kind = UnitKind::Bifurcation;
        for (int k = 0; k < kBifurcationStubSections; ++k) {
            int idx = n - kBifurcationStubSections + k;
            bif.sections.push_back(site(v[static_cast<std::size_t>(idx)], k - 1));
        }
        bif.stubs[0] = {2, 1, 0};
        bif.branch_section = kBifurcationStubSections;
        bif.sections.push_back(site(b, kBifurcationStubSections - 1));
        for (int d = 0; d < 2; ++d) {
            for (int k = 1; k <= kBifurcationStubSections; ++k) {
                int index = static_cast<int>(bif.sections.size());
                int up = k == 1 ? bif.branch_section : index - 1;
                bif.sections.push_back(site(daughters[static_cast<std::size_t>(d)]
                                                .vertices[static_cast<std::size_t>(k)],
                                            up));
                bif.stubs[static_cast<std::size_t>(d + 1)][static_cast<std::size_t>(k - 1)] = index;
            }
        }
        int bif_id = add_unit(std::move(bif), previous, v[static_cast<std::size_t>(end)]);
        for (const auto& d : daughters) {
            follow(d, bif_id);
        }
    }

    SectionSite site(int vertex, int upstream) const {
        SectionSite out = sites_[static_cast<std::size_t>(vertex)];
        out.upstream = upstream;
        out.role = BoundaryRole::Interior;
        return out;
    }

    int add_unit(NeuriteUnit unit, int upstream_unit, int shared_vertex) {
        unit.id = static_cast<int>(graph_.units.size());
        graph_.units.push_back(std::move(unit));
        if (upstream_unit >= 0) {
            Interface iface;
            iface.id = static_cast<int>(graph_.interfaces.size());
            iface.upstream_unit = upstream_unit;
            iface.downstream_unit = graph_.units.back().id;
            iface.section = shared_vertex;
            iface.kind = interface_kind(graph_.units[static_cast<std::size_t>(upstream_unit)],
                                        graph_.units.back());
            graph_.interfaces.push_back(iface);
        }
        return graph_.units.back().id;
    }

    void assign_roles(NeuriteUnit& unit) const {
        auto shared = [&](int vertex) {
            return std::any_of(graph_.interfaces.begin(), graph_.interfaces.end(),
                               [&](const Interface& i) {
                                   return i.section == vertex &&
                                          (i.upstream_unit == unit.id || i.downstream_unit == unit.id);
                               });
        };
        auto& first = unit.sections.front();
        first.role = shared(first.vertex) ? BoundaryRole::Interface : BoundaryRole::Inlet;
        for (int idx : unit.outlet_sections()) {
            auto& sec = unit.sections[static_cast<std::size_t>(idx)];
            sec.role = shared(sec.vertex) ? BoundaryRole::Interface : BoundaryRole::Outlet;
        }
    }

    const Skeleton& s_;
    int per_pipe_;
    std::vector<SectionSite> sites_;
    UnitGraph graph_;
};

} // namespace

std::vector<int> NeuriteUnit::section_ids() const {
    std::vector<int> ids;
    ids.reserve(sections.size());
    for (const auto& s : sections) {
        ids.push_back(s.vertex);
    }
    return ids;
}

int NeuriteUnit::find_section(int vertex) const {
    for (std::size_t i = 0; i < sections.size(); ++i) {
        if (sections[i].vertex == vertex) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

std::vector<int> NeuriteUnit::outlet_sections() const {
    std::vector<bool> has_downstream(sections.size(), false);
    for (const auto& s : sections) {
        if (s.upstream >= 0) {
            has_downstream[static_cast<std::size_t>(s.upstream)] = true;
        }
    }
    std::vector<int> out;
    for (std::size_t i = 1; i < sections.size(); ++i) {
        if (!has_downstream[i]) {
            out.push_back(static_cast<int>(i));
        }
    }
    return out;
}

std::vector<SectionSite> skeleton_sites(const Skeleton& s) {
    std::vector<SectionSite> sites(s.size());
    for (std::size_t v = 0; v < s.size(); ++v) {
        auto& site = sites[v];
        site.vertex = static_cast<int>(v);
        site.center = s.vertices[v];
        site.radius = s.radii[v];
        site.upstream = s.parent[v];
        const auto& kids = s.children[v];
        const int parent = s.parent[v];
        if (parent < 0) {
            require(!kids.empty(), ErrorCode::PathTooShort, "skeleton has a single vertex");
            site.axis = direction(s.vertices[v], s.vertices[static_cast<std::size_t>(kids[0])]);
        } else if (kids.size() == 1) {
            site.axis = direction(s.vertices[static_cast<std::size_t>(parent)],
                                  s.vertices[static_cast<std::size_t>(kids[0])]);
        } else {
            site.axis = direction(s.vertices[static_cast<std::size_t>(parent)], s.vertices[v]);
        }
        if (kids.size() == 2) {
            site.branch = true;
            for (std::size_t d = 0; d < 2; ++d) {
                site.daughter_dirs[d] =
                    direction(s.vertices[v], s.vertices[static_cast<std::size_t>(kids[d])]);
            }
        }
    }
    sites[0].role = BoundaryRole::Inlet;
    for (std::size_t v = 1; v < s.size(); ++v) {
        if (s.children[v].empty()) {
            sites[v].role = BoundaryRole::Outlet;
        }
    }
    return sites;
}

UnitGraph decompose(const Skeleton& skeleton, int sections_per_pipe) {
    require(sections_per_pipe >= 2, ErrorCode::InvalidArgument,
            "sections_per_pipe must be at least 2");
    return Decomposer(skeleton, sections_per_pipe).run();
}

InterfaceKind interface_kind(const NeuriteUnit& a, const NeuriteUnit& b) {
    bool adjacent = false;
    for (const auto& s : a.sections) {
        if (b.find_section(s.vertex) >= 0) {
            adjacent = true;
            break;
        }
    }
    require(adjacent, ErrorCode::NotAdjacent,
            "units " + std::to_string(a.id) + " and " + std::to_string(b.id) +
                " share no cross section");
    if (a.kind == UnitKind::Pipe && b.kind == UnitKind::Pipe) {
        return InterfaceKind::PipePipe;
    }
    if (a.kind == UnitKind::Bifurcation && b.kind == UnitKind::Bifurcation) {
        return InterfaceKind::BifurcationBifurcation;
    }
    return InterfaceKind::PipeBifurcation;
}

namespace {

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const nlohmann::json& j) {
    return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
}

nlohmann::json site_json(const SectionSite& s) {
    nlohmann::json j{{"vertex", s.vertex},   {"center", vec_json(s.center)},
                     {"axis", vec_json(s.axis)}, {"radius", s.radius},
                     {"upstream", s.upstream}, {"role", to_string(s.role)}};
    if (s.branch) {
        j["daughter_dirs"] = {vec_json(s.daughter_dirs[0]), vec_json(s.daughter_dirs[1])};
    }
    return j;
}

SectionSite site_from(const nlohmann::json& j) {
    SectionSite s;
    s.vertex = j.at("vertex").get<int>();
    s.center = vec_from(j.at("center"));
    s.axis = vec_from(j.at("axis"));
    s.radius = j.at("radius").get<double>();
    s.upstream = j.at("upstream").get<int>();
    s.role = role_from_string(j.at("role").get<std::string>());
    if (j.contains("daughter_dirs")) {
        s.branch = true;
        s.daughter_dirs[0] = vec_from(j["daughter_dirs"].at(0));
        s.daughter_dirs[1] = vec_from(j["daughter_dirs"].at(1));
    }
    return s;
}

} // namespace

nlohmann::json to_json(const UnitGraph& graph) {
    nlohmann::json j;
    j["format"] = "ntl-unitgraph";
    j["version"] = 1;
    j["inlet_unit"] = graph.inlet_unit;
    j["inlet_section"] = graph.inlet_section;
    auto& sites = j["sites"] = nlohmann::json::array();
    for (const auto& s : graph.sites) {
        sites.push_back(site_json(s));
    }
    auto& units = j["units"] = nlohmann::json::array();
    for (const auto& u : graph.units) {
        nlohmann::json ju{{"id", u.id}, {"kind", to_string(u.kind)}};
        auto& secs = ju["sections"] = nlohmann::json::array();
        for (const auto& s : u.sections) {
            secs.push_back(site_json(s));
        }
        if (u.kind == UnitKind::Bifurcation) {
            ju["branch_section"] = u.branch_section;
            ju["stubs"] = u.stubs;
        }
        units.push_back(std::move(ju));
    }
    auto& ifaces = j["interfaces"] = nlohmann::json::array();
    for (const auto& i : graph.interfaces) {
        ifaces.push_back({{"id", i.id},
                          {"upstream_unit", i.upstream_unit},
                          {"downstream_unit", i.downstream_unit},
                          {"kind", to_string(i.kind)},
                          {"section", i.section}});
    }
    return j;
}

UnitGraph unit_graph_from_json(const nlohmann::json& j) {
    try {
        require(j.at("format").get<std::string>() == "ntl-unitgraph", ErrorCode::ConfigError,
                "not a unit graph manifest");
        UnitGraph g;
        g.inlet_unit = j.at("inlet_unit").get<int>();
        g.inlet_section = j.at("inlet_section").get<int>();
        for (const auto& s : j.at("sites")) {
            g.sites.push_back(site_from(s));
        }
        for (const auto& ju : j.at("units")) {
            NeuriteUnit u;
            u.id = ju.at("id").get<int>();
            u.kind = unit_kind_from_string(ju.at("kind").get<std::string>());
            for (const auto& s : ju.at("sections")) {
                u.sections.push_back(site_from(s));
            }
            if (u.kind == UnitKind::Bifurcation) {
                u.branch_section = ju.at("branch_section").get<int>();
                u.stubs = ju.at("stubs").get<std::array<std::array<int, 3>, 3>>();
            }
            g.units.push_back(std::move(u));
        }
        for (const auto& ji : j.at("interfaces")) {
            Interface i;
            i.id = ji.at("id").get<int>();
            i.upstream_unit = ji.at("upstream_unit").get<int>();
            i.downstream_unit = ji.at("downstream_unit").get<int>();
            i.kind = interface_kind_from_string(ji.at("kind").get<std::string>());
            i.section = ji.at("section").get<int>();
            g.interfaces.push_back(i);
        }
        return g;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ConfigError, std::string("malformed unit graph manifest: ") + e.what());
    }
}

} // namespace ntl

#pragma once

// Splits a resampled skeleton into pipe and bifurcation units joined by
// interfaces at shared cross sections.

#include "ntl/morphology.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace ntl {

enum class UnitKind { Pipe, Bifurcation };
enum class InterfaceKind { PipePipe, PipeBifurcation, BifurcationBifurcation };

// Role of a cross section at the boundary of its unit.
enum class BoundaryRole { Interior, Inlet, Outlet, Interface };

std::string_view to_string(UnitKind kind);
std::string_view to_string(InterfaceKind kind);
std::string_view to_string(BoundaryRole role);
UnitKind unit_kind_from_string(std::string_view text);
InterfaceKind interface_kind_from_string(std::string_view text);

// One cross-section site on the skeleton. `upstream` indexes the list the
// site lives in (a unit's section list, or the skeleton-wide list where the
// index equals the vertex id); -1 marks the first section of that list.
struct SectionSite {
    int vertex = -1;
    Vec3 center = Vec3::Zero();
    Vec3 axis = Vec3::UnitX(); // unit flow direction
    double radius = 1.0;
    int upstream = -1;
    bool branch = false;                   // 23-node branch-point section
    std::array<Vec3, 2> daughter_dirs{};   // branch sections only
    BoundaryRole role = BoundaryRole::Interior;
};

struct NeuriteUnit {
    int id = 0;
    UnitKind kind = UnitKind::Pipe;
    // Upstream before downstream. Bifurcations list the parent stub
    // (outermost first), the branch section, then each daughter stub from the
    // junction outwards.
    std::vector<SectionSite> sections;
    int branch_section = -1;
    // Section indices of each stub ordered from the junction outwards; stub 0
    // is the parent branch. Bifurcations only.
    std::array<std::array<int, 3>, 3> stubs{};

    std::vector<int> section_ids() const;
    int find_section(int vertex) const; // -1 when absent
    std::vector<int> outlet_sections() const; // sections with no downstream
};

struct Interface {
    int id = 0;
    int upstream_unit = 0;
    int downstream_unit = 0;
    InterfaceKind kind = InterfaceKind::PipePipe;
    int section = -1; // shared skeleton vertex id
};

struct UnitGraph {
    std::vector<NeuriteUnit> units;
    std::vector<Interface> interfaces;
    std::vector<SectionSite> sites; // skeleton-wide, indexed by vertex id
    int inlet_unit = 0;
    int inlet_section = 0; // skeleton vertex id
};

constexpr int kBifurcationStubSections = 3;

// Flow direction at each skeleton vertex and daughter directions at branch
// points, assembled into skeleton-wide section sites.
std::vector<SectionSite> skeleton_sites(const Skeleton& skeleton);

UnitGraph decompose(const Skeleton& skeleton, int sections_per_pipe = 8);

InterfaceKind interface_kind(const NeuriteUnit& a, const NeuriteUnit& b);

nlohmann::json to_json(const UnitGraph& graph);
UnitGraph unit_graph_from_json(const nlohmann::json& json);

} // namespace ntl

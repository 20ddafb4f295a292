#pragma once

// SWC morphology parsing, validation and uniform arc-length resampling.

#include <Eigen/Core>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ntl {

using Vec3 = Eigen::Vector3d;

struct SwcRecord {
    int id = 0;
    int structure_type = 0;
    Vec3 position = Vec3::Zero(); // µm
    double radius = 0.0;          // µm, cross-section radius
    int parent_id = -1;           // -1 for the root

    bool operator==(const SwcRecord& other) const {
        return id == other.id && structure_type == other.structure_type &&
               position == other.position && radius == other.radius &&
               parent_id == other.parent_id;
    }
};

// A validated SWC tree. Records keep file order; construction throws
// ntl::Error when any tree invariant is violated.
class Morphology {
public:
    explicit Morphology(std::vector<SwcRecord> records);

    const std::vector<SwcRecord>& records() const { return records_; }
    const SwcRecord& record(int id) const;
    bool contains(int id) const { return index_.count(id) != 0; }

    int root_id() const { return root_id_; }

    // Child ids in ascending order.
    const std::vector<int>& children(int id) const;

    std::vector<int> branch_points() const; // >= 2 children
    std::vector<int> tips() const;          // non-root, 0 children

    // Sum of parent-child segment lengths.
    double total_length() const;

private:
    std::vector<SwcRecord> records_;
    std::map<int, std::size_t> index_;
    std::map<int, std::vector<int>> children_;
    int root_id_ = -1;
};

Morphology parse_swc(std::istream& in);
Morphology parse_swc(std::string_view text);
Morphology load_swc(const std::filesystem::path& path);

// Serializes with shortest round-trip number formatting, so
// parse_swc(to_swc(m)) reproduces every field exactly.
std::string to_swc(const Morphology& morphology);

// Resampled skeleton tree. Vertex 0 is the root; vertices are numbered in
// depth-first order with children visited by ascending source id, so every
// vertex id is larger than its parent's.
struct Skeleton {
    std::vector<Vec3> vertices;
    std::vector<double> radii;
    std::vector<int> parent;                 // -1 at the root
    std::vector<std::vector<int>> children;  // ascending
    std::vector<int> source_record;          // SWC id, or -1 if interpolated
    // Edge (parent[v], v) is stored at index v; entry 0 is unused (0.0).
    // Arc length measured along the original SWC polyline.
    std::vector<double> edge_arc_length;

    std::size_t size() const { return vertices.size(); }
    std::vector<std::pair<int, int>> edges() const;
    std::vector<int> branch_points() const;
    std::vector<int> tips() const;
    double total_arc_length() const;
};

// Uniform resampling with target spacing h (µm). Root, branch points and tips
// are kept exactly; every path between them is split into round(L/h)
// (at least one) equal arc-length pieces.
Skeleton resample(const Morphology& morphology, double h);

} // namespace ntl

#include "ntl/morphology.hpp"

#include "ntl/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

namespace ntl {

namespace {

std::vector<std::string_view> split_whitespace(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
        }
        std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
        }
        if (i > start) {
            fields.push_back(line.substr(start, i - start));
        }
    }
    return fields;
}

bool parse_double(std::string_view text, double& out) {
    if (!text.empty() && text.front() == '+') {
        text.remove_prefix(1);
    }
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(out);
}

// Integer fields may be written in decimal form ("3.0") by some exporters.
bool parse_integer(std::string_view text, int& out) {
    double value = 0.0;
    if (!parse_double(text, value) || value != std::floor(value) ||
        std::abs(value) > 2.0e9) {
        return false;
    }
    out = static_cast<int>(value);
    return true;
}

std::string format_double(double value) {
    char buffer[64];
    auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, ptr);
}

} // namespace

Morphology::Morphology(std::vector<SwcRecord> records) : records_(std::move(records)) {
    require(!records_.empty(), ErrorCode::NoRoot, "morphology has no records");

    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& r = records_[i];
        require(r.radius > 0.0, ErrorCode::NonPositiveRadius,
                "record " + std::to_string(r.id) + " has non-positive radius");
        require(index_.emplace(r.id, i).second, ErrorCode::DuplicateId,
                "record id " + std::to_string(r.id) + " appears more than once");
    }

    std::vector<int> roots;
    for (const auto& r : records_) {
        children_[r.id];
        if (r.parent_id == -1) {
            roots.push_back(r.id);
            continue;
        }
        require(index_.count(r.parent_id) != 0, ErrorCode::DanglingParent,
                "record " + std::to_string(r.id) + " references missing parent " +
                    std::to_string(r.parent_id));
    }
    for (const auto& r : records_) {
        if (r.parent_id != -1) {
            children_[r.parent_id].push_back(r.id);
        }
    }
    for (auto& [id, kids] : children_) {
        std::sort(kids.begin(), kids.end());
    }

    require(roots.size() <= 1, ErrorCode::MultipleRoots,
            "morphology has " + std::to_string(roots.size()) + " root records");
    // Every record has a parent, so following parents must loop.
    require(roots.size() == 1, ErrorCode::CycleDetected,
            "morphology has no root record; parent links form a cycle");
    root_id_ = roots.front();

    // Records not reachable from the root sit on, or hang off, a cycle.
    std::map<int, bool> reached;
    std::vector<int> stack{root_id_};
    while (!stack.empty()) {
        int id = stack.back();
        stack.pop_back();
        reached[id] = true;
        for (int child : children_.at(id)) {
            stack.push_back(child);
        }
    }
    for (const auto& r : records_) {
        require(reached.count(r.id) != 0, ErrorCode::CycleDetected,
                "record " + std::to_string(r.id) + " is not reachable from the root (cycle)");
    }
}

const SwcRecord& Morphology::record(int id) const {
    auto it = index_.find(id);
    require(it != index_.end(), ErrorCode::InvalidArgument,
            "no record with id " + std::to_string(id));
    return records_[it->second];
}

const std::vector<int>& Morphology::children(int id) const {
    auto it = children_.find(id);
    require(it != children_.end(), ErrorCode::InvalidArgument,
            "no record with id " + std::to_string(id));
    return it->second;
}

std::vector<int> Morphology::branch_points() const {
    std::vector<int> out;
    for (const auto& r : records_) {
        if (children_.at(r.id).size() >= 2) {
            out.push_back(r.id);
        }
    }
    return out;
}

std::vector<int> Morphology::tips() const {
    std::vector<int> out;
    for (const auto& r : records_) {
        if (r.id != root_id_ && children_.at(r.id).empty()) {
            out.push_back(r.id);
        }
    }
    return out;
}

double Morphology::total_length() const {
    double total = 0.0;
    for (const auto& r : records_) {
        if (r.parent_id != -1) {
            total += (r.position - record(r.parent_id).position).norm();
        }
    }
    return total;
}

Morphology parse_swc(std::istream& in) {
    std::vector<SwcRecord> records;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        std::string_view view(line);
        if (auto hash = view.find('#'); hash != std::string_view::npos) {
            view = view.substr(0, hash);
        }
        auto fields = split_whitespace(view);
        if (fields.empty()) {
            continue;
        }
        auto malformed = [&](const std::string& what) {
            fail(ErrorCode::MalformedLine,
                 "line " + std::to_string(line_number) + ": " + what);
        };
        if (fields.size() != 7) {
            malformed("expected 7 fields, found " + std::to_string(fields.size()));
        }
        SwcRecord r;
        if (!parse_integer(fields[0], r.id)) malformed("id is not an integer");
        if (!parse_integer(fields[1], r.structure_type)) malformed("type is not an integer");
        for (int k = 0; k < 3; ++k) {
            if (!parse_double(fields[2 + k], r.position[k])) malformed("coordinate is not numeric");
        }
        if (!parse_double(fields[5], r.radius)) malformed("radius is not numeric");
        if (!parse_integer(fields[6], r.parent_id)) malformed("parent is not an integer");
        records.push_back(r);
    }
    return Morphology(std::move(records));
}

Morphology parse_swc(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_swc(in);
}

Morphology load_swc(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::IoError, "cannot open SWC file " + path.string());
    return parse_swc(in);
}

std::string to_swc(const Morphology& morphology) {
    std::ostringstream out;
    out << "# id type x y z radius parent\n";
    for (const auto& r : morphology.records()) {
        out << r.id << ' ' << r.structure_type << ' ' << format_double(r.position.x()) << ' '
            << format_double(r.position.y()) << ' ' << format_double(r.position.z()) << ' '
            << format_double(r.radius) << ' ' << r.parent_id << '\n';
    }
    return out.str();
}

std::vector<std::pair<int, int>> Skeleton::edges() const {
    std::vector<std::pair<int, int>> out;
    for (std::size_t v = 0; v < parent.size(); ++v) {
        if (parent[v] >= 0) {
            out.emplace_back(parent[v], static_cast<int>(v));
        }
    }
    return out;
}

std::vector<int> Skeleton::branch_points() const {
    std::vector<int> out;
    for (std::size_t v = 0; v < children.size(); ++v) {
        if (children[v].size() >= 2) {
            out.push_back(static_cast<int>(v));
        }
    }
    return out;
}

std::vector<int> Skeleton::tips() const {
    std::vector<int> out;
    for (std::size_t v = 1; v < children.size(); ++v) {
        if (children[v].empty()) {
            out.push_back(static_cast<int>(v));
        }
    }
    return out;
}

double Skeleton::total_arc_length() const {
    double total = 0.0;
    for (std::size_t v = 1; v < edge_arc_length.size(); ++v) {
        total += edge_arc_length[v];
    }
    return total;
}

Skeleton resample(const Morphology& morphology, double h) {
    require(h > 0.0 && std::isfinite(h), ErrorCode::InvalidArgument,
            "resample spacing must be positive");

    Skeleton skeleton;
    auto add_vertex = [&](const Vec3& position, double radius, int parent, int source,
                          double arc) {
        int id = static_cast<int>(skeleton.vertices.size());
        skeleton.vertices.push_back(position);
        skeleton.radii.push_back(radius);
        skeleton.parent.push_back(parent);
        skeleton.children.emplace_back();
        skeleton.source_record.push_back(source);
        skeleton.edge_arc_length.push_back(arc);
        if (parent >= 0) {
            skeleton.children[static_cast<std::size_t>(parent)].push_back(id);
        }
        return id;
    };

    const auto& root = morphology.record(morphology.root_id());
    add_vertex(root.position, root.radius, -1, root.id, 0.0);

    // Depth first from the root, children by ascending record id.
    auto descend = [&](auto&& self, int record_id, int vertex_id) -> void {
        for (int child : morphology.children(record_id)) {
            // Walk the unbranched path until the next kept record.
            std::vector<const SwcRecord*> path{&morphology.record(record_id)};
            int cur = child;
            while (true) {
                path.push_back(&morphology.record(cur));
                const auto& next = morphology.children(cur);
                if (next.size() != 1) {
                    break;
                }
                cur = next.front();
            }
            std::vector<double> cumulative{0.0};
            for (std::size_t i = 1; i < path.size(); ++i) {
                double seg = (path[i]->position - path[i - 1]->position).norm();
                require(seg > 0.0, ErrorCode::DegenerateSegment,
                        "records " + std::to_string(path[i - 1]->id) + " and " +
                            std::to_string(path[i]->id) + " share a position");
                cumulative.push_back(cumulative.back() + seg);
            }
            const double length = cumulative.back();
            const long pieces = std::max(1L, std::lround(length / h));
            const double step = length / static_cast<double>(pieces);

            int previous = vertex_id;
            std::size_t segment = 1;
            for (long k = 1; k < pieces; ++k) {
                double s = step * static_cast<double>(k);
                while (segment + 1 < cumulative.size() && cumulative[segment] < s) {
                    ++segment;
                }
                double t = (s - cumulative[segment - 1]) /
                           (cumulative[segment] - cumulative[segment - 1]);
                Vec3 p = (1.0 - t) * path[segment - 1]->position + t * path[segment]->position;
                double r = (1.0 - t) * path[segment - 1]->radius + t * path[segment]->radius;
                previous = add_vertex(p, r, previous, -1, step);
            }
            // Last piece absorbs rounding so the path sum matches the polyline.
            double last_arc = length - step * static_cast<double>(pieces - 1);
            const auto* end = path.back();
            int end_vertex = add_vertex(end->position, end->radius, previous, end->id, last_arc);
            self(self, end->id, end_vertex);
        }
    };
    descend(descend, root.id, 0);
    return skeleton;
}

} // namespace ntl

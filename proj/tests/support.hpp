#pragma once

#include "ntl/decomposition.hpp"
#include "ntl/morphology.hpp"

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace testing {

inline std::filesystem::path data_dir() { return NTL_TEST_DATA_DIR; }

inline ntl::SwcRecord rec(int id, double x, double y, double z, double r, int parent) {
    ntl::SwcRecord s;
    s.id = id;
    s.structure_type = parent < 0 ? 1 : 3;
    s.position = {x, y, z};
    s.radius = r;
    s.parent_id = parent;
    return s;
}

// Straight chain along x with `segments` equal pieces of length `spacing`.
inline ntl::Skeleton straight_chain(int segments, double spacing = 1.0, double radius = 1.0) {
    ntl::Morphology m({rec(1, 0, 0, 0, radius, -1), rec(2, segments * spacing, 0, 0, radius, 1)});
    return ntl::resample(m, spacing);
}

// Full binary tree of the given depth in the xy-plane. Every path has
// `path_len` unit-spaced segments after resampling with h = 1.
inline ntl::Morphology binary_tree(int depth, double path_len) {
    std::vector<ntl::SwcRecord> recs;
    int next = 1;
    recs.push_back(rec(next++, 0, 0, 0, 2.0, -1));
    struct Item {
        int id;
        double x, y, angle, r;
        int level;
    };
    std::vector<Item> stack;
    recs.push_back(rec(next, path_len, 0, 0, 1.8, 1));
    stack.push_back({next++, path_len, 0, 0.0, 1.8, 0});
    while (!stack.empty()) {
        Item it = stack.back();
        stack.pop_back();
        if (it.level >= depth) {
            continue;
        }
        double spread = 0.9 / (it.level + 1);
        for (int side : {1, -1}) {
            double a = it.angle + side * spread;
            double x = it.x + path_len * std::cos(a);
            double y = it.y + path_len * std::sin(a);
            double r = it.r * 0.85;
            recs.push_back(rec(next, x, y, 0, r, it.id));
            stack.push_back({next++, x, y, a, r, it.level + 1});
        }
    }
    return ntl::Morphology(std::move(recs));
}

} // namespace testing

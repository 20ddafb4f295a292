#pragma once

// Synthetic geometry populations, oracle-generated datasets, splits and
// cross-validation folds.

#include "ntl/morphology.hpp"
#include "ntl/simulator.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ntl {

struct GeometrySettings {
    double radius_min = 0.5; // µm
    double radius_max = 3.0;
    double spacing_min = 0.5; // section spacing, µm
    double spacing_max = 2.0;
    double taper_min = 0.5; // end radius / start radius
    double taper_max = 1.0;
    double turn_max = 0.15; // heading change per µm of arc, rad
    double daughter_ratio_min = 0.6;
    double daughter_ratio_max = 0.9;
    double angle_min_deg = 20.0; // angle between the two daughters
    double angle_max_deg = 70.0;
    int pipe_sections_min = 3;
    int pipe_sections_max = 8;
    int stub_segments = 4; // skeleton segments per path of a generated bifurcation

    nlohmann::json to_json() const;
    static GeometrySettings from_json(const nlohmann::json& j);
};

struct GeometryPopulation {
    std::vector<NeuriteUnit> pipes;
    std::vector<NeuriteUnit> bifurcations;
};

GeometryPopulation generate_geometries(std::uint64_t seed, int pipes, int bifurcations,
                                       const GeometrySettings& settings = {});

// SHA-256 over the serialized section lists.
std::string geometry_hash(const std::vector<NeuriteUnit>& units);

struct TreeSettings {
    double spacing = 1.0;
    int path_min = 6; // skeleton segments between junctions
    int path_max = 12;
    int terminal_min = 4;
    int terminal_max = 8;
    double root_radius_min = 1.5;
    double root_radius_max = 2.5;
    double daughter_ratio_min = 0.75;
    double daughter_ratio_max = 0.95;
    double radius_floor = 0.5;
    double angle_min_deg = 30.0;
    double angle_max_deg = 70.0;

    nlohmann::json to_json() const;
    static TreeSettings from_json(const nlohmann::json& j);
};

// Random binary tree with exactly `bifurcations` branch points.
Morphology random_tree(std::uint64_t seed, int bifurcations, const TreeSettings& settings = {});

struct WindowSettings {
    int per_run = 2; // samples per (geometry, boundary value); <= 0 keeps every pair
    SteadyOptions steady;
};

std::vector<double> boundary_values(std::uint64_t seed, int count, double lo = 0.1, double hi = 2.0);

// One oracle run per geometry at c_in = 1; samples for other boundary values
// scale that run (the solution is linear in c_in). Window indices are drawn
// log-uniformly over the run so early transients are represented.
SimDataset generate_dataset(UnitKind kind, const std::vector<NeuriteUnit>& units,
                            const std::vector<double>& boundary, double lambda_in, const SimParams& params,
                            const WindowSettings& windows, std::uint64_t seed);

// Test folds over geometry ids; fold sizes differ by at most one.
std::vector<std::vector<int>> kfold(int geometries, int k, std::uint64_t seed);

struct DatasetSpec {
    std::uint64_t seed = 0;
    int geometries = 50; // per kind
    int boundary_count = 20;
    double c_min = 0.1;
    double c_max = 2.0;
    double lambda_in = 1.0;
    WindowSettings windows;
    GeometrySettings geometry;
    SimParams params;

    nlohmann::json to_json() const;
    static DatasetSpec from_json(const nlohmann::json& j);
};

// Named sub-seeds derived from the run seed.
std::uint64_t sub_seed(std::uint64_t seed, std::string_view name);

SimDataset build_dataset(const DatasetSpec& spec, UnitKind kind);

// Directory layout: manifest.json, index.csv, samples.bin (little-endian
// doubles, prev then truth per sample, row-major n x 2 each).
void save_dataset(const std::filesystem::path& dir, const SimDataset& data, const DatasetSpec& spec);
SimDataset load_dataset(const std::filesystem::path& dir, DatasetSpec* spec = nullptr);

nlohmann::json to_json(const SimParams& p);
SimParams sim_params_from_json(const nlohmann::json& j);

std::string file_sha256(const std::filesystem::path& path);

} // namespace ntl

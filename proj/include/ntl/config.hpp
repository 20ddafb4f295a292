#pragma once

// Single structured run configuration shared by every CLI subcommand.

#include "ntl/assembly.hpp"
#include "ntl/training.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>

namespace ntl {

constexpr int kConfigVersion = 1;

struct AssemblyRunSettings {
    AssemblyConfig model;
    double alpha = 10.0;
    int epochs = 200;
    int batch_size = 16;
    int networks = 16;        // random training trees
    int bifurcations_min = 1; // per training tree
    int bifurcations_max = 3;
    AssemblyDataSettings data;
    TreeSettings trees;
};

struct RunConfig {
    std::uint64_t seed = 1;
    SimParams params;
    BoundaryCondition boundary;
    double h = 1.0; // resampling spacing, µm
    int sections_per_pipe = 8;
    DatasetSpec data; // seed and params follow the top-level values
    SimulatorConfig simulator{3, 32, OutputMode::Increment};
    int epochs = 200;
    int batch_size = 16;
    double split = 0.75;
    int folds = 4;
    double residual_weight = 1.0;
    ResidualScaling residual_scaling = ResidualScaling::Diagonal;
    LrSchedule lr;
    AssemblyRunSettings assembly;
    SteadyOptions steady;
    int record_every = 100; // outputs kept in written field series

    nlohmann::json to_json() const;
    // Unknown keys and a different version are ConfigError.
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    DatasetSpec dataset_spec() const;
};

} // namespace ntl

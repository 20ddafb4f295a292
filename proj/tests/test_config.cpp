#include "ntl/config.hpp"
#include "ntl/error.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace ntl;
using nlohmann::json;

namespace {

ErrorCode code_of(const json& j) {
    try {
        RunConfig::from_json(j);
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::InvalidArgument;
}

} // namespace

TEST_CASE("default config round trips") {
    RunConfig c;
    json j = c.to_json();
    CHECK(RunConfig::from_json(j).to_json() == j);
    CHECK(j["version"] == kConfigVersion);
    CHECK(j["training"]["epochs"] == 200);
    CHECK(j["training"]["split"] == 0.75);
    CHECK(j["training"]["folds"] == 4);
    CHECK(j["assembly"]["alpha"] == 10.0);
    CHECK(RunConfig::from_json(json::object()).to_json() == j);
}

TEST_CASE("non-default values survive a file round trip bit for bit") {
    RunConfig c;
    c.seed = 18446744073709551557ull;
    c.params.D = 0.1 + 0.2;
    c.params.dt = 1.0 / 3.0;
    c.boundary.c_in = 1.7;
    c.h = 0.75;
    c.sections_per_pipe = 5;
    c.data.geometries = 7;
    c.data.geometry.radius_max = 2.25;
    c.simulator = {2, 16, OutputMode::Absolute};
    c.residual_weight = 3e-5;
    c.residual_scaling = ResidualScaling::None;
    c.lr.period = 17;
    c.assembly.alpha = 0.0;
    c.assembly.data.boundary = {0.5, 1.25};
    c.assembly.trees.path_max = 9;
    c.steady.tol = 1e-7;
    c.record_every = 3;
    auto path = std::filesystem::temp_directory_path() / "ntl_test_config.json";
    c.save(path);
    RunConfig back = RunConfig::load(path);
    std::filesystem::remove(path);
    CHECK(back.to_json() == c.to_json());
    CHECK(back.seed == c.seed);
    CHECK(back.params.D == c.params.D);
    CHECK(back.params.dt == c.params.dt);
    CHECK(back.assembly.data.boundary == c.assembly.data.boundary);
    CHECK(back.simulator.output == OutputMode::Absolute);
}

TEST_CASE("dataset spec follows the top-level seed, params and steady settings") {
    RunConfig c;
    c.seed = 99;
    c.params.u_i = 0.2;
    c.steady.tol = 1e-5;
    c.data.geometries = 3;
    DatasetSpec s = c.dataset_spec();
    CHECK(s.seed == 99);
    CHECK(s.params.u_i == 0.2);
    CHECK(s.windows.steady.tol == 1e-5);
    CHECK(s.geometries == 3);
}

TEST_CASE("unknown keys, bad versions and invalid values are ConfigError") {
    CHECK(code_of(json{{"sed", 1}}) == ErrorCode::ConfigError);
    CHECK(code_of(json{{"training", {{"epoch", 3}}}}) == ErrorCode::ConfigError);
    CHECK(code_of(json{{"assembly", {{"trees", {{"depth", 3}}}}}}) == ErrorCode::ConfigError);
    CHECK(code_of(json{{"data", {{"seed", 3}}}}) == ErrorCode::ConfigError);
    CHECK(code_of(json{{"version", 2}}) == ErrorCode::ConfigError);
    CHECK(code_of(json{{"training", {{"split", 1.5}}}}) == ErrorCode::ConfigError);
    CHECK(code_of(json{{"training", {{"folds", 1}}}}) == ErrorCode::ConfigError);
    CHECK(code_of(json{{"training", {{"residual_scaling", "cubic"}}}}) == ErrorCode::ConfigError);
    CHECK(code_of(json{{"assembly", {{"bifurcations", {3, 2}}}}}) == ErrorCode::ConfigError);
    CHECK(code_of(json{{"decomposition", 5}}) == ErrorCode::ConfigError);
}

TEST_CASE("load reports unreadable and malformed files") {
    auto path = std::filesystem::temp_directory_path() / "ntl_test_config_bad.json";
    {
        std::ofstream out(path);
        out << "{ not json";
    }
    try {
        RunConfig::load(path);
        FAIL("expected ConfigError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ConfigError);
    }
    std::filesystem::remove(path);
    try {
        RunConfig::load(path);
        FAIL("expected IoError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IoError);
    }
}

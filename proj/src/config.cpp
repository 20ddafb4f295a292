#include "ntl/config.hpp"

#include "ntl/error.hpp"

#include <fstream>

namespace ntl {

using nlohmann::json;

namespace {

// Every key in `j` must exist in `schema`; nested objects are checked recursively.
void check_keys(const json& j, const json& schema, const std::string& where) {
    if (!j.is_object()) {
        fail(ErrorCode::ConfigError, "config section '" + where + "' must be an object");
    }
    for (const auto& [key, value] : j.items()) {
        const std::string path = where.empty() ? key : where + "." + key;
        if (!schema.contains(key)) {
            fail(ErrorCode::ConfigError, "unknown config key '" + path + "'");
        }
        if (schema.at(key).is_object()) check_keys(value, schema.at(key), path);
    }
}

json section(const json& j, const char* key) { return j.contains(key) ? j.at(key) : json::object(); }

json lr_json(const LrSchedule& s) {
    return json{{"initial", s.initial}, {"floor", s.floor}, {"factor", s.factor}, {"period", s.period}};
}

LrSchedule lr_from_json(const json& j) {
    LrSchedule s;
    s.initial = j.value("initial", s.initial);
    s.floor = j.value("floor", s.floor);
    s.factor = j.value("factor", s.factor);
    s.period = j.value("period", s.period);
    if (!(s.initial > 0.0) || s.floor < 0.0 || !(s.factor > 0.0) || s.period < 1) {
        fail(ErrorCode::ConfigError, "invalid learning-rate schedule");
    }
    return s;
}

void require(bool ok, const std::string& message) {
    if (!ok) fail(ErrorCode::ConfigError, message);
}

} // namespace

json RunConfig::to_json() const {
    json dataset = data.to_json();
    dataset.erase("seed");
    dataset.erase("params");
    dataset.erase("steady_tol");
    dataset.erase("steady_max_time");
    return json{
        {"version", kConfigVersion},
        {"seed", seed},
        {"params", ntl::to_json(params)},
        {"boundary",
         {{"c_in", boundary.c_in},
          {"lambda_in", boundary.lambda_in},
          {"c_out", boundary.c_out},
          {"lambda_out", boundary.lambda_out}}},
        {"decomposition", {{"h", h}, {"sections_per_pipe", sections_per_pipe}}},
        {"data", dataset},
        {"simulator",
         {{"blocks", simulator.blocks}, {"width", simulator.width}, {"output", std::string(ntl::to_string(simulator.output))}}},
        {"training",
         {{"epochs", epochs},
          {"batch_size", batch_size},
          {"split", split},
          {"folds", folds},
          {"residual_weight", residual_weight},
          {"residual_scaling", std::string(ntl::to_string(residual_scaling))},
          {"lr", lr_json(lr)}}},
        {"assembly",
         {{"width", assembly.model.width},
          {"output", std::string(ntl::to_string(assembly.model.output))},
          {"alpha", assembly.alpha},
          {"epochs", assembly.epochs},
          {"batch_size", assembly.batch_size},
          {"networks", assembly.networks},
          {"bifurcations", {assembly.bifurcations_min, assembly.bifurcations_max}},
          {"windows", assembly.data.windows},
          {"boundary", assembly.data.boundary},
          {"lambda_in", assembly.data.lambda_in},
          {"trees", assembly.trees.to_json()}}},
        {"steady", {{"tol", steady.tol}, {"max_time", steady.max_time}}},
        {"output", {{"record_every", record_every}}}};
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig c;
    check_keys(j, c.to_json(), "");
    if (j.contains("version") && j.at("version") != kConfigVersion) {
        fail(ErrorCode::ConfigError, "config version " + j.at("version").dump() + " is not supported (expected " +
                                         std::to_string(kConfigVersion) + ")");
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("params")) c.params = sim_params_from_json(j.at("params"));

    const json b = section(j, "boundary");
    c.boundary.c_in = b.value("c_in", c.boundary.c_in);
    c.boundary.lambda_in = b.value("lambda_in", c.boundary.lambda_in);
    c.boundary.c_out = b.value("c_out", c.boundary.c_out);
    c.boundary.lambda_out = b.value("lambda_out", c.boundary.lambda_out);
    c.boundary.validate();

    const json d = section(j, "decomposition");
    c.h = d.value("h", c.h);
    c.sections_per_pipe = d.value("sections_per_pipe", c.sections_per_pipe);
    require(c.h > 0.0, "decomposition.h must be positive");
    require(c.sections_per_pipe >= 2, "decomposition.sections_per_pipe must be at least 2");

    c.data = DatasetSpec::from_json(section(j, "data"));

    const json s = section(j, "simulator");
    c.simulator.blocks = s.value("blocks", c.simulator.blocks);
    c.simulator.width = s.value("width", c.simulator.width);
    if (s.contains("output")) c.simulator.output = output_mode_from_string(s.at("output").get<std::string>());
    require(c.simulator.blocks >= 1 && c.simulator.width >= 1, "simulator blocks and width must be positive");

    const json t = section(j, "training");
    c.epochs = t.value("epochs", c.epochs);
    c.batch_size = t.value("batch_size", c.batch_size);
    c.split = t.value("split", c.split);
    c.folds = t.value("folds", c.folds);
    c.residual_weight = t.value("residual_weight", c.residual_weight);
    if (t.contains("residual_scaling")) {
        c.residual_scaling = residual_scaling_from_string(t.at("residual_scaling").get<std::string>());
    }
    if (t.contains("lr")) c.lr = lr_from_json(t.at("lr"));
    require(c.epochs >= 1 && c.batch_size >= 1, "training epochs and batch_size must be positive");
    require(c.split > 0.0 && c.split < 1.0, "training.split must lie in (0, 1)");
    require(c.folds >= 2, "training.folds must be at least 2");
    require(c.residual_weight >= 0.0, "training.residual_weight must be non-negative");

    const json a = section(j, "assembly");
    c.assembly.model.width = a.value("width", c.assembly.model.width);
    if (a.contains("output")) c.assembly.model.output = output_mode_from_string(a.at("output").get<std::string>());
    c.assembly.alpha = a.value("alpha", c.assembly.alpha);
    c.assembly.epochs = a.value("epochs", c.assembly.epochs);
    c.assembly.batch_size = a.value("batch_size", c.assembly.batch_size);
    c.assembly.networks = a.value("networks", c.assembly.networks);
    if (a.contains("bifurcations")) {
        c.assembly.bifurcations_min = a.at("bifurcations").at(0).get<int>();
        c.assembly.bifurcations_max = a.at("bifurcations").at(1).get<int>();
    }
    c.assembly.data.windows = a.value("windows", c.assembly.data.windows);
    if (a.contains("boundary")) c.assembly.data.boundary = a.at("boundary").get<std::vector<double>>();
    c.assembly.data.lambda_in = a.value("lambda_in", c.assembly.data.lambda_in);
    if (a.contains("trees")) c.assembly.trees = TreeSettings::from_json(a.at("trees"));
    require(c.assembly.model.width >= 1 && c.assembly.epochs >= 1 && c.assembly.batch_size >= 1,
            "assembly width, epochs and batch_size must be positive");
    require(c.assembly.alpha >= 0.0, "assembly.alpha must be non-negative");
    require(c.assembly.networks >= 1 && c.assembly.data.windows >= 1, "assembly needs networks and windows");
    require(c.assembly.bifurcations_min >= 1 && c.assembly.bifurcations_max >= c.assembly.bifurcations_min,
            "assembly.bifurcations must be an increasing pair starting at 1 or more");
    require(!c.assembly.data.boundary.empty(), "assembly.boundary must list at least one value");

    const json st = section(j, "steady");
    c.steady.tol = st.value("tol", c.steady.tol);
    c.steady.max_time = st.value("max_time", c.steady.max_time);
    require(c.steady.tol > 0.0 && c.steady.max_time > 0.0, "steady tol and max_time must be positive");
    c.data.windows.steady = c.steady;
    c.assembly.data.steady = c.steady;

    c.record_every = section(j, "output").value("record_every", c.record_every);
    require(c.record_every >= 1, "output.record_every must be at least 1");
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorCode::IoError, "cannot read config " + path.string());
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
    }
    try {
        return from_json(j);
    } catch (const json::exception& e) {
        fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
    }
}

void RunConfig::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) {
        fail(ErrorCode::IoError, "cannot write " + path.string());
    }
    out << to_json().dump(2) << '\n';
}

DatasetSpec RunConfig::dataset_spec() const {
    DatasetSpec spec = data;
    spec.seed = seed;
    spec.params = params;
    spec.windows.steady = steady;
    return spec;
}

} // namespace ntl

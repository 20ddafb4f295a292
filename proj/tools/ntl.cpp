// ntl: command-line driver for the neurite transport pipeline.
//
// Results go to stdout, logs to stderr. Failures print one line
// "error: <Code>: <message>" and exit with the code's documented status.

#include "ntl/assembly.hpp"
#include "ntl/config.hpp"
#include "ntl/error.hpp"
#include "ntl/evaluation.hpp"
#include "ntl/morphology.hpp"
#include "ntl/nn.hpp"
#include "ntl/oracle.hpp"
#include "ntl/training.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ntl;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kFinalState = "final_state.csv";

// Output directory written under "<out>.partial" and renamed on success.
class StagedDir {
public:
    explicit StagedDir(fs::path out) : out_(std::move(out)), partial_(out_.string() + ".partial") {
        if (out_.empty()) fail(ErrorCode::InvalidArgument, "--out is required");
        fs::remove_all(partial_);
        fs::create_directories(partial_);
    }
    StagedDir(const StagedDir&) = delete;
    StagedDir& operator=(const StagedDir&) = delete;
    ~StagedDir() {
        if (!committed_) {
            std::error_code ec;
            fs::remove_all(partial_, ec);
        }
    }

    const fs::path& path() const { return partial_; }

    void commit() {
        fs::remove_all(out_);
        fs::rename(partial_, out_);
        committed_ = true;
    }

private:
    fs::path out_;
    fs::path partial_;
    bool committed_ = false;
};

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorCode::IoError, path.string() + ": " + e.what());
    }
}

// Writes config.json, then manifest.json with the hash of every other file.
json finalize(const fs::path& dir, const std::string& command, const RunConfig& config, json extra = json::object()) {
    config.save(dir / "config.json");
    std::vector<std::string> names;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string rel = fs::relative(entry.path(), dir).generic_string();
        if (rel != kManifest) names.push_back(rel);
    }
    std::sort(names.begin(), names.end());
    json files = json::object();
    for (const std::string& name : names) files[name] = file_sha256(dir / name);
    json manifest = std::move(extra);
    manifest["command"] = command;
    manifest["config_version"] = kConfigVersion;
    manifest["files"] = files;
    write_json(dir / kManifest, manifest);
    return manifest;
}

RunConfig load_config(const std::string& path) { return path.empty() ? RunConfig{} : RunConfig::load(path); }

std::string graph_hash(const UnitGraph& ug) { return sha256_hex(to_json(ug).dump()); }

// An SWC file, a unit_graph.json, or a directory holding unit_graph.json.
UnitGraph load_units(const fs::path& input, const RunConfig& config) {
    if (fs::is_directory(input)) return load_units(input / "unit_graph.json", config);
    if (input.extension() == ".json") {
        try {
            return unit_graph_from_json(read_json(input));
        } catch (const json::exception& e) {
            fail(ErrorCode::IoError, input.string() + ": " + e.what());
        }
    }
    return decompose(resample(load_swc(input), config.h), config.sections_per_pipe);
}

void write_state_csv(const fs::path& path, const ComputationGraph& graph, const State& s) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out.precision(17);
    out << "node_id,x,y,z,c0,c_plus\n";
    for (std::size_t i = 0; i < graph.size(); ++i) {
        const Vec3& p = graph.nodes[i].position;
        const auto k = static_cast<Eigen::Index>(i);
        out << i << ',' << p.x() << ',' << p.y() << ',' << p.z() << ',' << s.c0[k] << ',' << s.c_plus[k] << '\n';
    }
}

State read_state_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "node_id,x,y,z,c0,c_plus") fail(ErrorCode::IoError, path.string() + ": unexpected header");
    std::vector<double> c0, cp;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != 6 || row[0] != static_cast<double>(c0.size())) {
            fail(ErrorCode::IoError, path.string() + ": malformed row " + std::to_string(c0.size()));
        }
        c0.push_back(row[4]);
        cp.push_back(row[5]);
    }
    State s = State::zeros(c0.size());
    for (std::size_t i = 0; i < c0.size(); ++i) {
        s.c0[static_cast<Eigen::Index>(i)] = c0[i];
        s.c_plus[static_cast<Eigen::Index>(i)] = cp[i];
    }
    return s;
}

// Field outputs shared by simulate and predict.
json write_fields(const fs::path& dir, const UnitGraph& ug, const ComputationGraph& graph, const FieldSeries& series,
                  const SimParams& params) {
    write_json(dir / "unit_graph.json", to_json(ug));
    write_field_series_csv(dir / "field_series.csv", graph, series);
    write_state_csv(dir / kFinalState, graph, series.state(series.size() - 1));
    const double t = series.times.back();
    return json{{"graph_hash", graph_hash(ug)},
                {"nodes", graph.size()},
                {"steps", std::lround(t / params.dt)},
                {"horizon_seconds", t},
                {"converged", series.converged}};
}

struct Models {
    SimulatorModel pipe;
    SimulatorModel bifurcation;
    std::optional<AssemblyModel> assembly;
    json hashes;
};

Models load_models(const fs::path& dir, bool use_assembly) {
    Models m{load_simulator(dir / "pipe" / "best.ckpt"), load_simulator(dir / "bifurcation" / "best.ckpt"),
             std::nullopt, json::object()};
    if (m.pipe.kind() != UnitKind::Pipe || m.bifurcation.kind() != UnitKind::Bifurcation) {
        fail(ErrorCode::KindMismatch, dir.string() + ": pipe/ and bifurcation/ checkpoints hold the wrong kinds");
    }
    m.hashes["pipe"] = file_sha256(dir / "pipe" / "best.ckpt");
    m.hashes["bifurcation"] = file_sha256(dir / "bifurcation" / "best.ckpt");
    const fs::path asm_path = dir / "assembly" / "best.ckpt";
    if (use_assembly && fs::exists(asm_path)) {
        m.assembly = load_assembly(asm_path);
        m.hashes["assembly"] = file_sha256(asm_path);
    }
    return m;
}

void log(const std::string& text) { std::cerr << text << '\n'; }

// ---------------------------------------------------------------------------

int cmd_parse(const std::string& swc) {
    Morphology m = load_swc(swc);
    json j{{"file", swc},
           {"sha256", file_sha256(swc)},
           {"records", m.records().size()},
           {"root_id", m.root_id()},
           {"branch_points", m.branch_points().size()},
           {"tips", m.tips().size()},
           {"total_length_um", m.total_length()}};
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_decompose(const std::string& swc, const std::string& out, const RunConfig& config) {
    UnitGraph ug = load_units(swc, config);
    StagedDir dir(out);
    write_json(dir.path() / "unit_graph.json", to_json(ug));
    int pipes = 0;
    for (const NeuriteUnit& u : ug.units) pipes += u.kind == UnitKind::Pipe ? 1 : 0;
    std::map<std::string, int> kinds;
    for (const Interface& i : ug.interfaces) ++kinds[std::string(to_string(i.kind))];
    json summary{{"graph_hash", graph_hash(ug)},
                 {"units", ug.units.size()},
                 {"pipes", pipes},
                 {"bifurcations", static_cast<int>(ug.units.size()) - pipes},
                 {"interfaces", ug.interfaces.size()},
                 {"interface_kinds", kinds}};
    finalize(dir.path(), "decompose", config, summary);
    dir.commit();
    std::cout << summary.dump(2) << '\n';
    return 0;
}

int cmd_simulate(const std::string& input, const std::string& out, const RunConfig& config) {
    UnitGraph ug = load_units(input, config);
    const ComputationGraph graph = build_network_graph(ug, config.params);
    SteadyOptions steady = config.steady;
    steady.record_every = config.record_every;
    StagedDir dir(out);
    FieldSeries series = TransportSolver(graph, config.params, config.boundary).run_to_steady(steady);
    if (!series.converged) log("warning: oracle stopped at max_time before reaching steady state");
    json summary = write_fields(dir.path(), ug, graph, series, config.params);
    summary["solver"] = "oracle";
    json manifest = finalize(dir.path(), "simulate", config, summary);
    dir.commit();
    std::cout << summary.dump(2) << '\n';
    return 0;
}

int cmd_gen_data(const std::string& out, const RunConfig& config) {
    const DatasetSpec spec = config.dataset_spec();
    StagedDir dir(out);
    json summary = json::object();
    for (UnitKind kind : {UnitKind::Pipe, UnitKind::Bifurcation}) {
        const std::string name(to_string(kind));
        log("generating " + name + " dataset");
        SimDataset data = build_dataset(spec, kind);
        save_dataset(dir.path() / name, data, spec);
        summary[name] = {{"geometries", data.graphs.size()}, {"samples", data.samples.size()}};
    }
    // Random trees for assembly training; their unit graphs follow from the config.
    fs::create_directories(dir.path() / "trees");
    std::mt19937_64 rng(sub_seed(config.seed, "tree-sizes"));
    std::uniform_int_distribution<int> size(config.assembly.bifurcations_min, config.assembly.bifurcations_max);
    json trees = json::array();
    for (int i = 0; i < config.assembly.networks; ++i) {
        const int nb = size(rng);
        char name[32];
        std::snprintf(name, sizeof name, "tree_%03d.swc", i);
        Morphology m = random_tree(sub_seed(config.seed, "tree/" + std::to_string(i)), nb, config.assembly.trees);
        std::ofstream f(dir.path() / "trees" / name);
        if (!f) fail(ErrorCode::IoError, "cannot write tree " + std::string(name));
        f << to_swc(m);
        trees.push_back({{"file", name}, {"bifurcations", nb}});
    }
    summary["trees"] = trees;
    json manifest = finalize(dir.path(), "gen-data", config, summary);
    dir.commit();
    summary["files"] = manifest["files"];
    std::cout << summary.dump(2) << '\n';
    return 0;
}

SimDataset load_kind_dataset(const fs::path& data, UnitKind kind) {
    const fs::path sub = data / std::string(to_string(kind));
    SimDataset d = load_dataset(fs::exists(sub / kManifest) ? sub : data);
    if (d.kind != kind) {
        fail(ErrorCode::KindMismatch, data.string() + " holds " + std::string(to_string(d.kind)) + " samples");
    }
    return d;
}

int cmd_train_sim(const std::string& kind_name, const std::string& data_dir, const std::string& out,
                  const std::string& init_from, const std::string& resume_from, int fold, bool verbose,
                  const RunConfig& config) {
    const UnitKind kind = unit_kind_from_string(kind_name);
    SimDataset data = load_kind_dataset(data_dir, kind);
    SimTrainConfig tc;
    tc.epochs = config.epochs;
    tc.batch_size = config.batch_size;
    tc.train_fraction = config.split;
    tc.seed = sub_seed(config.seed, "train/" + kind_name);
    tc.residual_weight = config.residual_weight;
    tc.residual_scaling = config.residual_scaling;
    tc.schedule = config.lr;
    tc.model = config.simulator;
    tc.verbose = verbose;
    if (fold >= 0) {
        auto folds = kfold(static_cast<int>(data.graphs.size()), config.folds, sub_seed(config.seed, "folds/" + kind_name));
        if (fold >= static_cast<int>(folds.size())) {
            fail(ErrorCode::InvalidArgument, "--fold must be below " + std::to_string(folds.size()));
        }
        tc.test_geometries = folds[static_cast<std::size_t>(fold)];
    }
    if (!init_from.empty()) tc.init_from = init_from;
    if (!resume_from.empty()) tc.resume_from = resume_from;
    StagedDir dir(out);
    tc.out_dir = dir.path();
    SimTrainResult r = train_simulator(data, tc);
    const EpochRecord& best = r.history.at(static_cast<std::size_t>(r.best_epoch));
    json summary{{"kind", kind_name},
                 {"best_epoch", r.best_epoch},
                 {"test_mre_percent", best.test_mre},
                 {"test_loss", best.test_loss},
                 {"train_geometries", r.train_geometries},
                 {"test_geometries", r.test_geometries},
                 {"fold", fold}};
    finalize(dir.path(), "train-sim", config, summary);
    dir.commit();
    std::cout << summary.dump(2) << '\n';
    return 0;
}

std::vector<UnitGraph> load_trees(const fs::path& data, const RunConfig& config) {
    const fs::path dir = fs::exists(data / "trees") ? data / "trees" : data;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".swc") files.push_back(entry.path());
    }
    if (files.empty()) fail(ErrorCode::EmptyDataset, "no .swc trees under " + dir.string());
    std::sort(files.begin(), files.end());
    std::vector<UnitGraph> nets;
    for (const fs::path& f : files) nets.push_back(load_units(f, config));
    return nets;
}

int cmd_train_asm(const std::string& data_dir, const std::string& models_dir, const std::string& out, bool verbose,
                  const RunConfig& config) {
    Models models = load_models(models_dir, false);
    std::vector<UnitGraph> nets = load_trees(data_dir, config);
    log("generating assembly pairs from " + std::to_string(nets.size()) + " trees");
    AssemblyDataset data = generate_assembly_dataset(nets, models.pipe, models.bifurcation, config.params,
                                                     config.assembly.data, sub_seed(config.seed, "assembly-data"));
    AssemblyTrainConfig tc;
    tc.alpha = config.assembly.alpha;
    tc.epochs = config.assembly.epochs;
    tc.batch_size = config.assembly.batch_size;
    tc.train_fraction = config.split;
    tc.seed = sub_seed(config.seed, "train/assembly");
    tc.schedule = config.lr;
    tc.model = config.assembly.model;
    tc.verbose = verbose;
    StagedDir dir(out);
    tc.out_dir = dir.path();
    AssemblyTrainResult r = train_assembly(data, tc);
    int held_out = 0, improved = 0;
    double before = 0.0, after = 0.0;
    for (const AssemblyPair& pair : data.pairs) {
        if (std::find(r.test_networks.begin(), r.test_networks.end(), pair.network) == r.test_networks.end()) continue;
        if (!r.trained[static_cast<std::size_t>(component_index(pair.kind))]) continue;
        auto [b, a] = pair_jumps(r.model, pair);
        ++held_out;
        improved += a < b ? 1 : 0;
        before += b;
        after += a;
    }
    json summary{{"pairs", data.pairs.size()},
                 {"train_networks", r.train_networks},
                 {"test_networks", r.test_networks},
                 {"trained", {r.trained[0], r.trained[1], r.trained[2]}},
                 {"held_out_pairs", held_out},
                 {"held_out_improved", improved},
                 {"mean_jump_before", held_out > 0 ? before / held_out : 0.0},
                 {"mean_jump_after", held_out > 0 ? after / held_out : 0.0},
                 {"models", models.hashes}};
    finalize(dir.path(), "train-asm", config, summary);
    dir.commit();
    std::cout << summary.dump(2) << '\n';
    return 0;
}

int cmd_predict(const std::string& input, const std::string& models_dir, const std::string& out, int steps,
                const std::string& match, bool no_assembly, const RunConfig& config) {
    UnitGraph ug = load_units(input, config);
    Models models = load_models(models_dir, !no_assembly);
    if (!match.empty()) {
        json ref = read_json(fs::path(match) / kManifest);
        if (ref.at("graph_hash").get<std::string>() != graph_hash(ug)) {
            fail(ErrorCode::HashMismatch, "--match run was made on a different unit graph");
        }
        steps = ref.at("steps").get<int>();
    }
    NetworkModel net = build_network_model(ug, config.params);
    const AssemblyModel* assembly = models.assembly ? &*models.assembly : nullptr;
    const State init = initial_state(net.network, config.boundary);
    StagedDir dir(out);
    FieldSeries series;
    if (steps > 0) {
        series = global_rollout(net, models.pipe, models.bifurcation, assembly, config.params, config.boundary, init,
                                steps, config.record_every);
        series.converged = true;
    } else {
        SteadyOptions steady = config.steady;
        steady.record_every = config.record_every;
        series = global_rollout_to_steady(net, models.pipe, models.bifurcation, assembly, config.params,
                                          config.boundary, init, steady);
        if (!series.converged) log("warning: surrogate stopped at max_time before reaching steady state");
    }
    json summary = write_fields(dir.path(), ug, net.network, series, config.params);
    summary["solver"] = "surrogate";
    summary["assembly"] = assembly != nullptr;
    summary["models"] = models.hashes;
    if (steps > 0) summary["fixed_steps"] = true;
    finalize(dir.path(), "predict", config, summary);
    dir.commit();
    std::cout << summary.dump(2) << '\n';
    return 0;
}

// Verifies a run directory's final state against its manifest.
json checked_manifest(const fs::path& dir) {
    json m = read_json(dir / kManifest);
    if (!m.contains("graph_hash") || !m.contains("files") || !m["files"].contains(kFinalState)) {
        fail(ErrorCode::HashMismatch, dir.string() + " is not a simulate/predict output");
    }
    for (const char* name : {kFinalState, "unit_graph.json", "config.json"}) {
        if (!m["files"].contains(name) || m["files"][name].get<std::string>() != file_sha256(dir / name)) {
            fail(ErrorCode::HashMismatch, (dir / name).string() + " does not match its manifest hash");
        }
    }
    return m;
}

int cmd_eval(const std::string& pred_dir, const std::string& truth_dir, const std::string& out) {
    json pm = checked_manifest(pred_dir);
    json tm = checked_manifest(truth_dir);
    if (pm["graph_hash"] != tm["graph_hash"]) {
        fail(ErrorCode::HashMismatch, "prediction and truth were computed on different unit graphs");
    }
    if (pm["steps"] != tm["steps"]) {
        log("warning: prediction horizon " + pm["steps"].dump() + " steps, truth " + tm["steps"].dump() + " steps");
    }
    MetricReport r = compare_states(read_state_csv(fs::path(pred_dir) / kFinalState),
                                    read_state_csv(fs::path(truth_dir) / kFinalState));
    json report = to_json(r);
    report["graph_hash"] = tm["graph_hash"];
    report["pred_steps"] = pm["steps"];
    report["truth_steps"] = tm["steps"];
    if (!out.empty()) {
        const RunConfig config = RunConfig::load(fs::path(truth_dir) / "config.json");
        UnitGraph ug = load_units(fs::path(truth_dir) / "unit_graph.json", config);
        StagedDir dir(out);
        write_json(dir.path() / "report.json", report);
        write_nodal_error_csv(dir.path() / "nodal_error.csv", build_network_graph(ug, config.params), r);
        finalize(dir.path(), "eval", config,
                 json{{"graph_hash", tm["graph_hash"]},
                      {"pred_manifest", file_sha256(fs::path(pred_dir) / kManifest)},
                      {"truth_manifest", file_sha256(fs::path(truth_dir) / kManifest)}});
        dir.commit();
    }
    std::cout << report.dump(2) << '\n';
    return 0;
}

int cmd_bench(const std::string& input, const std::string& models_dir, int repeats, bool no_assembly,
              const std::string& out, const RunConfig& config) {
    UnitGraph ug = load_units(input, config);
    Models models = load_models(models_dir, !no_assembly);
    BenchmarkOptions opt;
    opt.repeats = repeats;
    opt.steady = config.steady;
    BenchmarkReport r = benchmark(ug, config.params, config.boundary, models.pipe, models.bifurcation,
                                  models.assembly ? &*models.assembly : nullptr, opt);
    json j = to_json(r);
    j["graph_hash"] = graph_hash(ug);
    j["units"] = ug.units.size();
    j["nodes"] = r.oracle_final.size();
    j["assembly"] = models.assembly.has_value();
    if (!out.empty()) {
        StagedDir dir(out);
        write_json(dir.path() / "bench.json", j);
        finalize(dir.path(), "bench", config, json{{"graph_hash", j["graph_hash"]}, {"models", models.hashes}});
        dir.commit();
    }
    std::cout << j.dump(2) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neurite transport: oracle solver, learned simulators and assembly"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");
    int threads = 1;
    std::string config_path;
    app.add_option("--threads", threads, "Worker threads (every stage currently runs on one)")
        ->check(CLI::PositiveNumber);
    app.add_option("--config", config_path, "Run config (JSON); defaults apply when omitted");

    std::string input, out, models, data, kind, init_from, resume_from, match, pred, truth;
    int fold = -1, steps = 0, repeats = 5;
    bool verbose = false, no_assembly = false;

    auto* parse = app.add_subcommand("parse", "Validate and summarize an SWC morphology");
    parse->add_option("swc", input)->required();

    auto* dec = app.add_subcommand("decompose", "Write the unit graph of a morphology");
    dec->add_option("swc", input)->required();
    dec->add_option("--out", out)->required();

    auto* sim = app.add_subcommand("simulate", "Oracle run to steady state");
    sim->add_option("input", input, "SWC file, unit_graph.json or a directory holding one")->required();
    sim->add_option("--out", out)->required();

    auto* gen = app.add_subcommand("gen-data", "Synthetic geometries, simulator datasets and assembly trees");
    gen->add_option("--out", out)->required();

    auto* ts = app.add_subcommand("train-sim", "Train a pipe or bifurcation simulator");
    ts->add_option("--kind", kind)->required()->check(CLI::IsMember({"pipe", "bifurcation"}));
    ts->add_option("--data", data)->required();
    ts->add_option("--out", out)->required();
    ts->add_option("--init-from", init_from, "Warm start from a checkpoint");
    ts->add_option("--resume-from", resume_from, "Continue an interrupted run from its last.ckpt");
    ts->add_option("--fold", fold, "Hold out this cross-validation fold instead of the default split");
    ts->add_flag("--verbose", verbose);

    auto* ta = app.add_subcommand("train-asm", "Train the assembly components");
    ta->add_option("--data", data)->required();
    ta->add_option("--models", models, "Directory holding pipe/ and bifurcation/ checkpoints")->required();
    ta->add_option("--out", out)->required();
    ta->add_flag("--verbose", verbose);

    auto* pr = app.add_subcommand("predict", "Surrogate global rollout");
    pr->add_option("input", input)->required();
    pr->add_option("--models", models)->required();
    pr->add_option("--out", out)->required();
    auto* steps_opt = pr->add_option("--steps", steps, "Fixed horizon in time steps")->check(CLI::PositiveNumber);
    pr->add_option("--match", match, "Use the horizon of this simulate output")->excludes(steps_opt);
    pr->add_flag("--no-assembly", no_assembly);

    auto* ev = app.add_subcommand("eval", "Compare prediction and truth final states");
    ev->add_option("--pred", pred)->required();
    ev->add_option("--truth", truth)->required();
    ev->add_option("--out", out, "Write report.json and nodal_error.csv here");

    auto* be = app.add_subcommand("bench", "Oracle vs surrogate wall time");
    be->add_option("input", input)->required();
    be->add_option("--models", models)->required();
    be->add_option("--repeats", repeats)->check(CLI::PositiveNumber);
    be->add_option("--out", out);
    be->add_flag("--no-assembly", no_assembly);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << error_code_name(ErrorCode::InvalidArgument) << ": " << e.what() << '\n';
        return error_exit_code(ErrorCode::InvalidArgument);
    }

    try {
        const RunConfig config = load_config(config_path);
        if (*parse) return cmd_parse(input);
        if (*dec) return cmd_decompose(input, out, config);
        if (*sim) return cmd_simulate(input, out, config);
        if (*gen) return cmd_gen_data(out, config);
        if (*ts) return cmd_train_sim(kind, data, out, init_from, resume_from, fold, verbose, config);
        if (*ta) return cmd_train_asm(data, models, out, verbose, config);
        if (*pr) return cmd_predict(input, models, out, steps, match, no_assembly, config);
        if (*ev) return cmd_eval(pred, truth, out);
        if (*be) return cmd_bench(input, models, repeats, no_assembly, out, config);
    } catch (const Error& e) {
        std::cerr << "error: " << error_code_name(e.code()) << ": " << e.what() << '\n';
        return error_exit_code(e.code());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << error_code_name(ErrorCode::IoError) << ": " << e.what() << '\n';
        return error_exit_code(ErrorCode::IoError);
    } catch (const std::exception& e) {
        std::cerr << "error: Internal: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

#include "ntl/training.hpp"

#include "ntl/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace ntl {

using nlohmann::json;

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

Vec3 any_perpendicular(const Vec3& d) {
    Vec3 t = std::abs(d.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    return d.cross(t).normalized();
}

// Perpendicular to d at a random angle around it.
Vec3 random_perpendicular(std::mt19937_64& rng, const Vec3& d) {
    Vec3 a = any_perpendicular(d);
    Vec3 b = d.cross(a);
    double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    return (std::cos(phi) * a + std::sin(phi) * b).normalized();
}

Vec3 turn(const Vec3& d, const Vec3& axis, double angle) {
    return (Eigen::AngleAxisd(angle, axis) * d).normalized();
}

struct PathBuilder {
    std::vector<SwcRecord> records;
    int next_id = 1;

    int add(const Vec3& p, double r, int parent) {
        SwcRecord s;
        s.id = next_id++;
        s.structure_type = parent < 0 ? 1 : 3;
        s.position = p;
        s.radius = r;
        s.parent_id = parent;
        records.push_back(s);
        return s.id;
    }

    // Wiggly path of `segments` pieces of length h; four SWC points per piece
    // so the resampled arc length matches segments * h closely.
    int extend(std::mt19937_64& rng, int from, Vec3 pos, Vec3 dir, double h, int segments, double r0,
               double r1, double turn_max, Vec3* end_dir = nullptr) {
        constexpr int sub = 4;
        const int total = segments * sub;
        const double piece = h / sub;
        int last = from;
        for (int k = 1; k <= total; ++k) {
            double bend = uniform(rng, -turn_max, turn_max) * piece;
            dir = turn(dir, random_perpendicular(rng, dir), bend);
            pos += piece * dir;
            double t = static_cast<double>(k) / total;
            last = add(pos, r0 + (r1 - r0) * t, last);
        }
        if (end_dir != nullptr) *end_dir = dir;
        return last;
    }
};

NeuriteUnit single_unit(const Morphology& m, double h, UnitKind kind, int sections_per_pipe) {
    UnitGraph ug = decompose(resample(m, h), sections_per_pipe);
    for (const NeuriteUnit& u : ug.units) {
        if (u.kind == kind) return u;
    }
    fail(ErrorCode::InvalidArgument, "generated geometry has no unit of the requested kind");
}

NeuriteUnit random_pipe(std::mt19937_64& rng, const GeometrySettings& s) {
    const int sections = uniform_int(rng, s.pipe_sections_min, s.pipe_sections_max);
    const double h = uniform(rng, s.spacing_min, s.spacing_max);
    const double r0 = uniform(rng, s.radius_min, s.radius_max);
    const double r1 = std::max(s.radius_min, r0 * uniform(rng, s.taper_min, s.taper_max));
    PathBuilder b;
    Vec3 dir = Vec3::UnitX();
    int root = b.add(Vec3::Zero(), r0, -1);
    b.extend(rng, root, Vec3::Zero(), dir, h, sections - 1, r0, r1, s.turn_max);
    return single_unit(Morphology(std::move(b.records)), h, UnitKind::Pipe, sections);
}

NeuriteUnit random_bifurcation(std::mt19937_64& rng, const GeometrySettings& s) {
    const double h = uniform(rng, s.spacing_min, s.spacing_max);
    const double r0 = uniform(rng, s.radius_min, s.radius_max);
    const double r_bp = std::max(s.radius_min, r0 * uniform(rng, s.taper_min, s.taper_max));
    const double angle = uniform(rng, s.angle_min_deg, s.angle_max_deg) * std::numbers::pi / 180.0;
    const double share = uniform(rng, 0.3, 0.7);
    PathBuilder b;
    int root = b.add(Vec3::Zero(), r0, -1);
    Vec3 dir;
    int bp = b.extend(rng, root, Vec3::Zero(), Vec3::UnitX(), h, s.stub_segments, r0, r_bp, s.turn_max, &dir);
    Vec3 bp_pos = b.records.back().position;
    Vec3 axis = random_perpendicular(rng, dir);
    for (double side : {share, share - 1.0}) {
        double r = std::max(s.radius_min, r_bp * uniform(rng, s.daughter_ratio_min, s.daughter_ratio_max));
        Vec3 d = turn(dir, axis, side * angle);
        b.extend(rng, bp, bp_pos, d, h, s.stub_segments, r, r, s.turn_max);
    }
    return single_unit(Morphology(std::move(b.records)), h, UnitKind::Bifurcation, 8);
}

void append_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a,", v);
    out += buf;
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
    std::uint32_t w[2];
    seq.generate(w, w + 2);
    return (static_cast<std::uint64_t>(w[0]) << 32) | w[1];
}

} // namespace

json GeometrySettings::to_json() const {
    return json{{"radius", {radius_min, radius_max}},
                {"spacing", {spacing_min, spacing_max}},
                {"taper", {taper_min, taper_max}},
                {"turn_max", turn_max},
                {"daughter_ratio", {daughter_ratio_min, daughter_ratio_max}},
                {"angle_deg", {angle_min_deg, angle_max_deg}},
                {"pipe_sections", {pipe_sections_min, pipe_sections_max}},
                {"stub_segments", stub_segments}};
}

GeometrySettings GeometrySettings::from_json(const json& j) {
    GeometrySettings s;
    auto pair = [&](const char* key, double& lo, double& hi) {
        if (j.contains(key)) {
            lo = j.at(key).at(0).get<double>();
            hi = j.at(key).at(1).get<double>();
        }
    };
    pair("radius", s.radius_min, s.radius_max);
    pair("spacing", s.spacing_min, s.spacing_max);
    pair("taper", s.taper_min, s.taper_max);
    pair("daughter_ratio", s.daughter_ratio_min, s.daughter_ratio_max);
    pair("angle_deg", s.angle_min_deg, s.angle_max_deg);
    s.turn_max = j.value("turn_max", s.turn_max);
    if (j.contains("pipe_sections")) {
        s.pipe_sections_min = j.at("pipe_sections").at(0).get<int>();
        s.pipe_sections_max = j.at("pipe_sections").at(1).get<int>();
    }
    s.stub_segments = j.value("stub_segments", s.stub_segments);
    return s;
}

GeometryPopulation generate_geometries(std::uint64_t seed, int pipes, int bifurcations,
                                       const GeometrySettings& settings) {
    if (pipes < 0 || bifurcations < 0 || pipes + bifurcations < 1) {
        fail(ErrorCode::InvalidArgument, "geometry counts must be non-negative with at least one unit");
    }
    if (settings.pipe_sections_min < 2 || settings.pipe_sections_max < settings.pipe_sections_min ||
        settings.stub_segments < 4) {
        fail(ErrorCode::InvalidArgument, "pipe sections must be >= 2 and stub segments >= 4");
    }
    GeometryPopulation pop;
    std::mt19937_64 pipe_rng(mix(seed, 1, 0));
    for (int i = 0; i < pipes; ++i) pop.pipes.push_back(random_pipe(pipe_rng, settings));
    std::mt19937_64 bif_rng(mix(seed, 2, 0));
    for (int i = 0; i < bifurcations; ++i) pop.bifurcations.push_back(random_bifurcation(bif_rng, settings));
    return pop;
}

std::string geometry_hash(const std::vector<NeuriteUnit>& units) {
    std::string text;
    for (const NeuriteUnit& u : units) {
        text += u.kind == UnitKind::Pipe ? "P[" : "B[";
        for (const SectionSite& s : u.sections) {
            for (int k = 0; k < 3; ++k) append_double(text, s.center[k]);
            for (int k = 0; k < 3; ++k) append_double(text, s.axis[k]);
            append_double(text, s.radius);
            text += std::to_string(s.upstream) + (s.branch ? "b;" : ";");
        }
        text += "]";
    }
    return sha256_hex(text);
}

json TreeSettings::to_json() const {
    return json{{"spacing", spacing},
                {"path", {path_min, path_max}},
                {"terminal", {terminal_min, terminal_max}},
                {"root_radius", {root_radius_min, root_radius_max}},
                {"daughter_ratio", {daughter_ratio_min, daughter_ratio_max}},
                {"radius_floor", radius_floor},
                {"angle_deg", {angle_min_deg, angle_max_deg}}};
}

TreeSettings TreeSettings::from_json(const json& j) {
    TreeSettings s;
    s.spacing = j.value("spacing", s.spacing);
    auto pair_i = [&](const char* key, int& lo, int& hi) {
        if (j.contains(key)) {
            lo = j.at(key).at(0).get<int>();
            hi = j.at(key).at(1).get<int>();
        }
    };
    auto pair_d = [&](const char* key, double& lo, double& hi) {
        if (j.contains(key)) {
            lo = j.at(key).at(0).get<double>();
            hi = j.at(key).at(1).get<double>();
        }
    };
    pair_i("path", s.path_min, s.path_max);
    pair_i("terminal", s.terminal_min, s.terminal_max);
    pair_d("root_radius", s.root_radius_min, s.root_radius_max);
    pair_d("daughter_ratio", s.daughter_ratio_min, s.daughter_ratio_max);
    pair_d("angle_deg", s.angle_min_deg, s.angle_max_deg);
    s.radius_floor = j.value("radius_floor", s.radius_floor);
    return s;
}

Morphology random_tree(std::uint64_t seed, int bifurcations, const TreeSettings& s) {
    if (bifurcations < 0) {
        fail(ErrorCode::InvalidArgument, "bifurcation count must be non-negative");
    }
    if (s.path_min < 6 || s.terminal_min < 4) {
        fail(ErrorCode::InvalidArgument, "tree paths too short for bifurcation stubs");
    }
    std::mt19937_64 rng(mix(seed, 3, static_cast<std::uint64_t>(bifurcations)));
    // Topology: split random leaves until the branch count is reached.
    std::vector<std::vector<int>> children(1);
    std::vector<int> leaves{0};
    for (int b = 0; b < bifurcations; ++b) {
        std::size_t pick = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(leaves.size()) - 1));
        int node = leaves[pick];
        leaves.erase(leaves.begin() + static_cast<std::ptrdiff_t>(pick));
        for (int c = 0; c < 2; ++c) {
            children[static_cast<std::size_t>(node)].push_back(static_cast<int>(children.size()));
            leaves.push_back(static_cast<int>(children.size()));
            children.emplace_back();
        }
    }
    PathBuilder b;
    struct Item {
        int node, from;
        Vec3 pos, dir;
        double radius;
    };
    double r_root = uniform(rng, s.root_radius_min, s.root_radius_max);
    int root = b.add(Vec3::Zero(), r_root, -1);
    std::vector<Item> stack{{0, root, Vec3::Zero(), Vec3::UnitX(), r_root}};
    while (!stack.empty()) {
        Item it = stack.back();
        stack.pop_back();
        const auto& kids = children[static_cast<std::size_t>(it.node)];
        bool terminal = kids.empty();
        int segments = terminal ? uniform_int(rng, s.terminal_min, s.terminal_max)
                                : uniform_int(rng, s.path_min, s.path_max);
        if (it.node == 0 && !terminal) segments = uniform_int(rng, s.terminal_min, s.path_max);
        Vec3 dir;
        int end = b.extend(rng, it.from, it.pos, it.dir, s.spacing, segments, it.radius, it.radius, 0.05, &dir);
        if (terminal) continue;
        Vec3 pos = b.records.back().position;
        double angle = uniform(rng, s.angle_min_deg, s.angle_max_deg) * std::numbers::pi / 180.0;
        Vec3 axis = random_perpendicular(rng, dir);
        double share = uniform(rng, 0.35, 0.65);
        double sides[2] = {share, share - 1.0};
        for (int c = 1; c >= 0; --c) {
            double r = std::max(s.radius_floor, it.radius * uniform(rng, s.daughter_ratio_min, s.daughter_ratio_max));
            stack.push_back({kids[static_cast<std::size_t>(c)], end, pos, turn(dir, axis, sides[c] * angle), r});
        }
    }
    return Morphology(std::move(b.records));
}

std::vector<double> boundary_values(std::uint64_t seed, int count, double lo, double hi) {
    if (count < 1 || !(lo >= 0.0) || !(hi >= lo)) {
        fail(ErrorCode::InvalidArgument, "boundary values need count >= 1 and 0 <= lo <= hi");
    }
    std::mt19937_64 rng(mix(seed, 4, 0));
    std::vector<double> out;
    for (int i = 0; i < count; ++i) out.push_back(uniform(rng, lo, hi));
    return out;
}

SimDataset generate_dataset(UnitKind kind, const std::vector<NeuriteUnit>& units,
                            const std::vector<double>& boundary, double lambda_in, const SimParams& params,
                            const WindowSettings& windows, std::uint64_t seed) {
    params.validate();
    SimDataset data;
    data.kind = kind;
    data.params = params;
    for (std::size_t g = 0; g < units.size(); ++g) {
        if (units[g].kind != kind) {
            fail(ErrorCode::KindMismatch, "geometry " + std::to_string(g) + " is not a " +
                                              std::string(to_string(kind)));
        }
        data.graphs.push_back(build_unit_graph(units[g], params));
        const ComputationGraph& graph = data.graphs.back();
        BoundaryCondition unit_bc;
        unit_bc.c_in = 1.0;
        unit_bc.lambda_in = lambda_in;
        TransportSolver solver(graph, params, unit_bc);
        FieldSeries series = solver.run_to_steady(windows.steady);
        if (!series.converged) {
            fail(ErrorCode::NotConverged, "oracle did not reach steady state on geometry " + std::to_string(g));
        }
        const int pairs = static_cast<int>(series.size()) - 1;
        const auto n = static_cast<Eigen::Index>(graph.size());
        for (std::size_t b = 0; b < boundary.size(); ++b) {
            std::vector<int> picks;
            if (windows.per_run <= 0 || windows.per_run >= pairs) {
                picks.resize(static_cast<std::size_t>(pairs));
                std::iota(picks.begin(), picks.end(), 0);
            } else {
                std::mt19937_64 rng(mix(seed, g, b));
                const double top = std::log(static_cast<double>(pairs) + 1.0);
                while (static_cast<int>(picks.size()) < windows.per_run) {
                    int k = static_cast<int>(std::floor(std::exp(uniform(rng, 0.0, top)))) - 1;
                    k = std::clamp(k, 0, pairs - 1);
                    if (std::find(picks.begin(), picks.end(), k) == picks.end()) picks.push_back(k);
                }
                std::sort(picks.begin(), picks.end());
            }
            const double c = boundary[b];
            for (int k : picks) {
                SimSample s;
                s.geometry = static_cast<int>(g);
                s.time_index = k;
                s.c_in = c;
                s.lambda_in = lambda_in;
                s.prev.resize(n, 2);
                s.truth.resize(n, 2);
                s.prev.col(0) = c * series.c0[static_cast<std::size_t>(k)];
                s.prev.col(1) = c * series.c_plus[static_cast<std::size_t>(k)];
                s.truth.col(0) = c * series.c0[static_cast<std::size_t>(k) + 1];
                s.truth.col(1) = c * series.c_plus[static_cast<std::size_t>(k) + 1];
                if (s.truth.maxCoeff() < 1e-12) continue;
                data.samples.push_back(std::move(s));
            }
        }
    }
    return data;
}

std::vector<std::vector<int>> kfold(int geometries, int k, std::uint64_t seed) {
    if (k < 2) {
        fail(ErrorCode::InvalidArgument, "k-fold needs k >= 2");
    }
    if (geometries < k) {
        fail(ErrorCode::TooFewGeometries, std::to_string(geometries) + " geometries cannot fill " +
                                              std::to_string(k) + " folds");
    }
    std::vector<int> ids(static_cast<std::size_t>(geometries));
    std::iota(ids.begin(), ids.end(), 0);
    std::mt19937_64 rng(mix(seed, 5, 0));
    std::shuffle(ids.begin(), ids.end(), rng);
    std::vector<std::vector<int>> folds(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < ids.size(); ++i) {
        folds[i % static_cast<std::size_t>(k)].push_back(ids[i]);
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

std::uint64_t sub_seed(std::uint64_t seed, std::string_view name) {
    std::string h = sha256_hex(std::to_string(seed) + "/" + std::string(name));
    return std::stoull(h.substr(0, 16), nullptr, 16);
}

json to_json(const SimParams& p) {
    return json{{"D", p.D},         {"k_plus", p.k_plus},     {"k_minus", p.k_minus},
                {"kp_plus", p.kp_plus}, {"kp_minus", p.kp_minus}, {"u_i", p.u_i},
                {"dt", p.dt},       {"unidirectional", p.unidirectional}};
}

SimParams sim_params_from_json(const json& j) {
    SimParams p;
    p.D = j.value("D", p.D);
    p.k_plus = j.value("k_plus", p.k_plus);
    p.k_minus = j.value("k_minus", p.k_minus);
    p.kp_plus = j.value("kp_plus", p.kp_plus);
    p.kp_minus = j.value("kp_minus", p.kp_minus);
    p.u_i = j.value("u_i", p.u_i);
    p.dt = j.value("dt", p.dt);
    p.unidirectional = j.value("unidirectional", p.unidirectional);
    p.validate();
    return p;
}

json DatasetSpec::to_json() const {
    return json{{"seed", seed},
                {"geometries", geometries},
                {"boundary_count", boundary_count},
                {"c_range", {c_min, c_max}},
                {"lambda_in", lambda_in},
                {"windows_per_run", windows.per_run},
                {"steady_tol", windows.steady.tol},
                {"steady_max_time", windows.steady.max_time},
                {"geometry", geometry.to_json()},
                {"params", ntl::to_json(params)}};
}

DatasetSpec DatasetSpec::from_json(const json& j) {
    DatasetSpec s;
    s.seed = j.value("seed", s.seed);
    s.geometries = j.value("geometries", s.geometries);
    s.boundary_count = j.value("boundary_count", s.boundary_count);
    if (j.contains("c_range")) {
        s.c_min = j.at("c_range").at(0).get<double>();
        s.c_max = j.at("c_range").at(1).get<double>();
    }
    s.lambda_in = j.value("lambda_in", s.lambda_in);
    s.windows.per_run = j.value("windows_per_run", s.windows.per_run);
    s.windows.steady.tol = j.value("steady_tol", s.windows.steady.tol);
    s.windows.steady.max_time = j.value("steady_max_time", s.windows.steady.max_time);
    if (j.contains("geometry")) s.geometry = GeometrySettings::from_json(j.at("geometry"));
    if (j.contains("params")) s.params = sim_params_from_json(j.at("params"));
    if (s.geometries < 1 || s.boundary_count < 1) {
        fail(ErrorCode::ConfigError, "dataset needs at least one geometry and one boundary value");
    }
    return s;
}

namespace {

const std::vector<NeuriteUnit>& units_of(const GeometryPopulation& pop, UnitKind kind) {
    return kind == UnitKind::Pipe ? pop.pipes : pop.bifurcations;
}

GeometryPopulation spec_population(const DatasetSpec& spec, UnitKind kind) {
    int pipes = kind == UnitKind::Pipe ? spec.geometries : 0;
    int bifs = kind == UnitKind::Bifurcation ? spec.geometries : 0;
    return generate_geometries(sub_seed(spec.seed, "geometry"), pipes, bifs, spec.geometry);
}

} // namespace

SimDataset build_dataset(const DatasetSpec& spec, UnitKind kind) {
    GeometryPopulation pop = spec_population(spec, kind);
    std::vector<double> bvals = boundary_values(sub_seed(spec.seed, "boundary"), spec.boundary_count, spec.c_min,
                                                spec.c_max);
    return generate_dataset(kind, units_of(pop, kind), bvals, spec.lambda_in, spec.params, spec.windows,
                            sub_seed(spec.seed, "windows"));
}

std::string file_sha256(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::IoError, "cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

void save_dataset(const std::filesystem::path& dir, const SimDataset& data, const DatasetSpec& spec) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream bin(dir / "samples.bin", std::ios::binary);
        std::ofstream idx(dir / "index.csv");
        if (!bin || !idx) {
            fail(ErrorCode::IoError, "cannot write dataset files in " + dir.string());
        }
        idx.precision(17);
        idx << "sample,geometry,time_index,c_in,lambda_in,offset,rows\n";
        std::uint64_t offset = 0;
        for (std::size_t i = 0; i < data.samples.size(); ++i) {
            const SimSample& s = data.samples[i];
            idx << i << ',' << s.geometry << ',' << s.time_index << ',' << s.c_in << ',' << s.lambda_in << ','
                << offset << ',' << s.prev.rows() << '\n';
            bin.write(reinterpret_cast<const char*>(s.prev.data()),
                      static_cast<std::streamsize>(s.prev.size() * sizeof(double)));
            bin.write(reinterpret_cast<const char*>(s.truth.data()),
                      static_cast<std::streamsize>(s.truth.size() * sizeof(double)));
            offset += static_cast<std::uint64_t>(s.prev.size() + s.truth.size());
        }
    }
    GeometryPopulation pop = spec_population(spec, data.kind);
    json manifest{{"format", "ntl-dataset 1"},
                  {"kind", std::string(to_string(data.kind))},
                  {"spec", spec.to_json()},
                  {"boundary_values", boundary_values(sub_seed(spec.seed, "boundary"), spec.boundary_count,
                                                      spec.c_min, spec.c_max)},
                  {"samples", data.samples.size()},
                  {"geometries", data.graphs.size()},
                  {"hashes",
                   {{"geometry", geometry_hash(units_of(pop, data.kind))},
                    {"samples.bin", file_sha256(dir / "samples.bin")},
                    {"index.csv", file_sha256(dir / "index.csv")}}}};
    std::ofstream out(dir / "manifest.json");
    out << manifest.dump(2) << '\n';
    if (!out) {
        fail(ErrorCode::IoError, "cannot write manifest in " + dir.string());
    }
}

SimDataset load_dataset(const std::filesystem::path& dir, DatasetSpec* spec_out) {
    std::ifstream mf(dir / "manifest.json");
    if (!mf) {
        fail(ErrorCode::IoError, "missing manifest.json in " + dir.string());
    }
    json manifest;
    try {
        manifest = json::parse(mf);
    } catch (const json::exception& e) {
        fail(ErrorCode::ConfigError, std::string("manifest.json: ") + e.what());
    }
    const json& hashes = manifest.at("hashes");
    for (const char* f : {"samples.bin", "index.csv"}) {
        if (file_sha256(dir / f) != hashes.at(f).get<std::string>()) {
            fail(ErrorCode::HashMismatch, std::string(f) + " does not match its manifest hash");
        }
    }
    DatasetSpec spec = DatasetSpec::from_json(manifest.at("spec"));
    UnitKind kind = unit_kind_from_string(manifest.at("kind").get<std::string>());
    GeometryPopulation pop = spec_population(spec, kind);
    const auto& units = units_of(pop, kind);
    if (geometry_hash(units) != hashes.at("geometry").get<std::string>()) {
        fail(ErrorCode::HashMismatch, "regenerated geometries do not match the manifest hash");
    }
    SimDataset data;
    data.kind = kind;
    data.params = spec.params;
    for (const NeuriteUnit& u : units) data.graphs.push_back(build_unit_graph(u, spec.params));

    std::ifstream idx(dir / "index.csv");
    std::ifstream bin(dir / "samples.bin", std::ios::binary);
    std::string line;
    std::getline(idx, line);
    while (std::getline(idx, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string field;
        std::vector<std::string> f;
        while (std::getline(ls, field, ',')) f.push_back(field);
        if (f.size() != 7) {
            fail(ErrorCode::MalformedLine, "index.csv: " + line);
        }
        SimSample s;
        s.geometry = std::stoi(f[1]);
        s.time_index = std::stoi(f[2]);
        s.c_in = std::stod(f[3]);
        s.lambda_in = std::stod(f[4]);
        auto offset = std::stoull(f[5]);
        auto rows = static_cast<Eigen::Index>(std::stoll(f[6]));
        if (s.geometry < 0 || s.geometry >= static_cast<int>(data.graphs.size()) ||
            rows != static_cast<Eigen::Index>(data.graphs[static_cast<std::size_t>(s.geometry)].size())) {
            fail(ErrorCode::DimensionMismatch, "index.csv row does not match its geometry: " + line);
        }
        s.prev.resize(rows, 2);
        s.truth.resize(rows, 2);
        bin.seekg(static_cast<std::streamoff>(offset * sizeof(double)));
        bin.read(reinterpret_cast<char*>(s.prev.data()), static_cast<std::streamsize>(rows * 2 * sizeof(double)));
        bin.read(reinterpret_cast<char*>(s.truth.data()), static_cast<std::streamsize>(rows * 2 * sizeof(double)));
        if (!bin) {
            fail(ErrorCode::IoError, "samples.bin is shorter than the index");
        }
        data.samples.push_back(std::move(s));
    }
    if (spec_out != nullptr) *spec_out = spec;
    return data;
}

} // namespace ntl

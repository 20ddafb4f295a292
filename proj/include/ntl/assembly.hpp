#pragma once

// Interface assembly: per-kind MLP components that exchange interface-section
// predictions between neighbouring units and correct them, plus the
// network-level rollout that interleaves unit simulators and assembly.

#include "ntl/simulator.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

namespace ntl {

constexpr int kInterfaceSlots = kCircularSlots;              // 17
constexpr int kAssemblyInput = 4 * kInterfaceSlots + 3;      // 71
constexpr int kAssemblyOutput = 4 * kInterfaceSlots;         // 68

int component_index(InterfaceKind kind);

struct AssemblyConfig {
    int width = 32;
    OutputMode output = OutputMode::Increment; // increment: corrected = x_mid + MLP
};

class AssemblyModel {
public:
    explicit AssemblyModel(AssemblyConfig config = {});

    const AssemblyConfig& config() const { return config_; }
    void init(std::uint64_t seed);

    Mlp& component(InterfaceKind kind) { return mlps_[static_cast<std::size_t>(component_index(kind))]; }
    const Mlp& component(InterfaceKind kind) const {
        return mlps_[static_cast<std::size_t>(component_index(kind))];
    }

    // inputs B x 71, mid B x 68 (the uncorrected written region) -> B x 68
    Matrix forward(InterfaceKind kind, const Matrix& inputs, const Matrix& mid) const;
    Var forward(Tape& tape, InterfaceKind kind, const Matrix& inputs, const Matrix& mid);

    std::vector<Parameter*> parameters(InterfaceKind kind);
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    std::string architecture() const;

private:
    AssemblyConfig config_;
    std::array<Mlp, 3> mlps_;
};

// One side of an interface inside a unit: the shared section and the next
// section into the unit.
struct InterfaceSide {
    int unit = 0;
    int section = 0;  // unit-local section index
    int adjacent = 0; // unit-local section index
    double radius = 0.0;  // adjacent section radius
    double spacing = 0.0; // distance between the two section centers
};

struct InterfaceLink {
    int id = 0;
    InterfaceKind kind = InterfaceKind::PipePipe;
    std::array<InterfaceSide, 2> side; // 0 upstream unit, 1 downstream unit
};

// Everything precomputed for running unit models inside one network.
struct NetworkModel {
    UnitGraph units;
    ComputationGraph network;
    std::vector<ComputationGraph> unit_graphs;
    std::vector<std::vector<int>> node_map; // unit-local node -> network node
    std::vector<InterfaceLink> links;       // sorted by interface id
    std::vector<Matrix> base_features;      // per unit, zero state
    std::vector<double> node_share;         // 1 / number of units holding each network node
    std::vector<MessageOperator> operators; // per unit
    std::array<std::vector<int>, 2> kind_units;            // pipes, bifurcations
    std::array<std::vector<Eigen::Index>, 2> kind_offset;  // row offsets in the stacked batch
    std::array<MessageOperator, 2> stacked;
};

NetworkModel build_network_model(const UnitGraph& units, const SimParams& params);

// Interface-section values of one side: 1 x 34 (c0 slots, then c+ slots).
Matrix section_values(const NetworkModel& net, const Matrix& unit_state, int unit, int section);

// Component input for `side` reading both sides of the link: 1 x 71.
Matrix component_input(const NetworkModel& net, const InterfaceLink& link, int side,
                       const std::vector<Matrix>& unit_states);
// Current values of the region a side writes: 1 x 68.
Matrix written_region(const NetworkModel& net, const InterfaceLink& link, int side,
                      const std::vector<Matrix>& unit_states);

std::vector<Matrix> assemble_step(const std::vector<Matrix>& x_mid, const NetworkModel& net,
                                  const AssemblyModel& model);

// Per-unit states gathered from a network-wide state.
std::vector<Matrix> split_state(const NetworkModel& net, const Matrix& network_state);
// Network field with interface duplicates averaged.
Matrix merge_state(const NetworkModel& net, const std::vector<Matrix>& unit_states);

// One simulator step for every unit, batched by kind. Held nodes take the
// Dirichlet values at the network inlet and the current shared-section
// values at every other unit inlet.
std::vector<Matrix> simulate_units(const NetworkModel& net, const SimulatorModel& pipe,
                                   const SimulatorModel& bifurcation, const SimParams& params,
                                   const std::vector<Matrix>& unit_states, const BoundaryCondition& bc);

FieldSeries global_rollout(const NetworkModel& net, const SimulatorModel& pipe, const SimulatorModel& bifurcation,
                           const AssemblyModel* assembly, const SimParams& params, const BoundaryCondition& bc,
                           const State& initial, int steps, int record_every = 1);

// Steps until the relative change between successive states drops below
// opts.tol, using the same criterion as the oracle; converged is false when
// opts.max_time runs out first.
FieldSeries global_rollout_to_steady(const NetworkModel& net, const SimulatorModel& pipe,
                                     const SimulatorModel& bifurcation, const AssemblyModel* assembly,
                                     const SimParams& params, const BoundaryCondition& bc, const State& initial,
                                     const SteadyOptions& opts);

struct AssemblyLossTerms {
    double mse = 0.0;
    double penalty = 0.0;
    double total = 0.0;
};

// Network-level loss: MSE over every unit node plus alpha times the mean
// squared slot gap over all interfaces.
AssemblyLossTerms assembly_loss(const std::vector<Matrix>& x_o, const std::vector<Matrix>& truth,
                                const NetworkModel& net, double alpha);

// Pair loss on a batch: corrected outputs of both sides (B x 68 each).
Var assembly_pair_loss(Tape& tape, Var side0, Var side1, const Matrix& truth0, const Matrix& truth1, double alpha,
                       AssemblyLossTerms* terms = nullptr);

// Mean |s1 - s2| over the interface slots and both species.
double interface_jump(const Matrix& side0, const Matrix& side1);

struct AssemblyPair {
    InterfaceKind kind = InterfaceKind::PipePipe;
    int network = 0;
    std::array<Matrix, 2> input; // 1 x 71
    std::array<Matrix, 2> mid;   // 1 x 68
    std::array<Matrix, 2> truth; // 1 x 68
};

struct AssemblyDataset {
    std::vector<AssemblyPair> pairs;
    int networks = 0;
};

struct AssemblyDataSettings {
    int windows = 4; // time windows per network run
    std::vector<double> boundary{1.0};
    double lambda_in = 1.0;
    SteadyOptions steady;
};

AssemblyDataset generate_assembly_dataset(const std::vector<UnitGraph>& networks, const SimulatorModel& pipe,
                                          const SimulatorModel& bifurcation, const SimParams& params,
                                          const AssemblyDataSettings& settings, std::uint64_t seed);

struct AssemblyTrainConfig {
    double alpha = 10.0;
    int epochs = 200;
    int batch_size = 16;
    double train_fraction = 0.75;
    std::uint64_t seed = 0;
    LrSchedule schedule;
    AssemblyConfig model;
    std::optional<std::filesystem::path> out_dir;
    bool verbose = false;
};

struct AssemblyTrainResult {
    AssemblyModel model;
    std::array<std::vector<EpochRecord>, 3> history; // test_mre holds the mean test jump
    std::array<bool, 3> trained{};
    std::vector<int> train_networks;
    std::vector<int> test_networks;
};

AssemblyTrainResult train_assembly(const AssemblyDataset& data, const AssemblyTrainConfig& config);

// Mean interface jump of the given pairs before (mid) and after correction.
std::pair<double, double> pair_jumps(const AssemblyModel& model, const AssemblyPair& pair);

void save_assembly(const std::filesystem::path& path, const AssemblyModel& model, std::uint64_t seed,
                   const std::string& config_json);
AssemblyModel load_assembly(const std::filesystem::path& path);

} // namespace ntl

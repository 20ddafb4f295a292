#pragma once

// Graph-network unit simulators: encoder, L message-passing blocks with a
// fixed gradient edge function, and an MLP decoder.

#include "ntl/graphgen.hpp"
#include "ntl/nn.hpp"
#include "ntl/oracle.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ntl {

enum class OutputMode {
    Absolute,  // decoder emits the next state
    Increment, // decoder emits the change from the input state
};

std::string_view to_string(OutputMode mode);
OutputMode output_mode_from_string(std::string_view text);

struct SimulatorConfig {
    int blocks = 3;
    int width = 32;
    OutputMode output = OutputMode::Absolute;
};

// Per-graph constants for message passing and the inlet overwrite.
struct MessageOperator {
    CsrMatrix gradient; // (G c)_i = sum_j (c_j - c_i) / l_ij
    Matrix length_sum;  // n x 1
    Matrix keep;        // n x 2, zero on held nodes
};

MessageOperator message_operator(const ComputationGraph& graph);
MessageOperator stack_operators(std::span<const MessageOperator* const> parts);

// Attributes of every edge oriented a -> b (or b -> a when reversed):
// [(c0_to - c0_from) / l, (c+_to - c+_from) / l, l].
Matrix edge_attributes(const ComputationGraph& graph, const Matrix& conc, bool reversed = false);
// Per-node sum of the attributes of incident edges oriented away from the node.
Matrix aggregate(const ComputationGraph& graph, const Matrix& conc);

// n x 2 matrix with (c_in, lambda_in * c_in) on held nodes, zero elsewhere.
Matrix dirichlet_values(const ComputationGraph& graph, const BoundaryCondition& bc);

UnitKind graph_kind(const ComputationGraph& graph);

class SimulatorModel {
public:
    explicit SimulatorModel(UnitKind kind = UnitKind::Pipe, SimulatorConfig config = {});

    UnitKind kind() const { return kind_; }
    const SimulatorConfig& config() const { return config_; }

    void init(std::uint64_t seed);

    // Decoded output before the inlet overwrite.
    Matrix forward(const Matrix& features, const MessageOperator& op) const;
    Var forward(Tape& tape, const Matrix& features, const MessageOperator& op);

    Mlp& encoder() { return encoder_; }
    Mlp& block(std::size_t i) { return blocks_[i]; }
    Mlp& decoder() { return decoder_; }

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    std::string architecture() const; // JSON

private:
    UnitKind kind_;
    SimulatorConfig config_;
    Mlp encoder_;
    std::vector<Mlp> blocks_;
    Mlp decoder_;
};

// One step: n x 2 (c0, c+) with held nodes overwritten by the inlet values.
Matrix predict_step(const SimulatorModel& model, const ComputationGraph& graph,
                    const Matrix& features, const BoundaryCondition& bc);

FieldSeries rollout(const SimulatorModel& model, const ComputationGraph& graph, const SimParams& params,
                    const BoundaryCondition& bc, const State& initial, int steps);

// Row scaling of the physics residuals. Diagonal divides every row by its
// own diagonal coefficient (1/dt + reaction + transport), which turns the
// residual into a concentration-like correction and removes the 1/l^2
// stiffness of short edges.
enum class ResidualScaling { None, Diagonal };

std::string_view to_string(ResidualScaling scaling);
ResidualScaling residual_scaling_from_string(std::string_view text);

struct LossTerms {
    double mse = 0.0;
    double r0 = 0.0;
    double r_plus = 0.0;
    double total = 0.0;
};

// Everything the loss needs besides the prediction. Rows may stack several
// graphs; weights carry the per-graph means.
struct LossInputs {
    const CsrMatrix* laplacian = nullptr;
    const CsrMatrix* upwind = nullptr;
    Matrix prev;                     // n x 2 state at t_k
    Matrix truth;                    // n x 2 state at t_{k+1}
    Eigen::VectorXd node_weight;     // MSE row weights
    Eigen::VectorXd residual_weight; // residual row weights (zero on boundary rows)
    Eigen::VectorXd residual_weight_plus; // c+ residual rows; empty means residual_weight
    SimParams params;
};

// Row weights for one graph: 1/n on every node and 1/n_interior on nodes
// that are neither held nor closure nodes.
void graph_loss_weights(const ComputationGraph& graph, Eigen::VectorXd& node_weight,
                        Eigen::VectorXd& residual_weight);
// Per-species residual row weights with the requested scaling applied.
void scaled_residual_weights(const Eigen::VectorXd& residual_weight, const DiscreteOperators& ops,
                             const SimParams& params, ResidualScaling scaling, Eigen::VectorXd& w0,
                             Eigen::VectorXd& w_plus);

Var simulator_loss(Tape& tape, Var pred, const LossInputs& in, double residual_weight,
                   LossTerms* terms = nullptr);

LossTerms simulator_loss(const Matrix& pred, const Matrix& truth, const State& prev,
                         const ComputationGraph& graph, const DiscreteOperators& ops,
                         const SimParams& params, double residual_weight = 1.0,
                         ResidualScaling scaling = ResidualScaling::None);

// Pointwise residuals (n x 2: R0, R+) of the backward-difference equations.
Matrix residuals(const Matrix& pred, const Matrix& prev, const DiscreteOperators& ops,
                 const SimParams& params);

// Training data: each sample is one oracle step on one geometry.
struct SimSample {
    int geometry = 0;
    int time_index = 0;
    double c_in = 0.0;
    double lambda_in = 1.0;
    Matrix prev;  // n x 2
    Matrix truth; // n x 2
};

struct SimDataset {
    UnitKind kind = UnitKind::Pipe;
    SimParams params;
    std::vector<ComputationGraph> graphs;
    std::vector<SimSample> samples;
};

struct SimTrainConfig {
    int epochs = 200;
    int batch_size = 16;
    double train_fraction = 0.75;
    std::uint64_t seed = 0;
    double residual_weight = 1.0;
    ResidualScaling residual_scaling = ResidualScaling::None;
    LrSchedule schedule;
    SimulatorConfig model;
    // When set, these geometries form the test set and the rest train.
    std::optional<std::vector<int>> test_geometries;
    std::optional<std::filesystem::path> out_dir; // checkpoints + history
    std::optional<std::filesystem::path> init_from;
    std::optional<std::filesystem::path> resume_from;
    int stop_after = -1; // last epoch to run in this call (for interrupted runs)
    bool verbose = false;
};

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double test_loss = 0.0;
    double test_mre = 0.0;
};

struct SimTrainResult {
    SimulatorModel model; // best test loss
    std::vector<EpochRecord> history;
    int best_epoch = -1;
    std::vector<int> train_geometries;
    std::vector<int> test_geometries;
};

SimTrainResult train_simulator(const SimDataset& data, const SimTrainConfig& config);

// Mean one-step MRE (%) of the model over the given samples.
double mean_one_step_mre(const SimulatorModel& model, const SimDataset& data,
                         std::span<const int> sample_ids);

std::pair<std::vector<int>, std::vector<int>> split_geometries(int count, double train_fraction,
                                                               std::uint64_t seed);

void save_simulator(const std::filesystem::path& path, const SimulatorModel& model,
                    std::uint64_t seed, const std::string& config_json,
                    const AdamState* optimizer = nullptr, int epoch = 0);
SimulatorModel load_simulator(const std::filesystem::path& path);
// Loads weights into an existing model, rejecting a different architecture.
void load_simulator_weights(const std::filesystem::path& path, SimulatorModel& model);

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

} // namespace ntl

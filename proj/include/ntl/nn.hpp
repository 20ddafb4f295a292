#pragma once

#include "ntl/autodiff.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ntl {

// Fully connected network: ReLU on hidden layers, identity on the output.
// Weights are stored n_in x n_out so a batch of row vectors maps as X*W + b.
class Mlp {
public:
    Mlp() = default;
    explicit Mlp(std::vector<int> layer_sizes); // zero-initialized

    const std::vector<int>& layer_sizes() const { return sizes_; }
    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    std::size_t layers() const { return weights_.size(); }
    std::size_t parameter_count() const;

    // Uniform in +-sqrt(6/(fan_in+fan_out)); biases zero.
    void init_glorot(std::mt19937_64& rng);

    Matrix forward(const Matrix& x) const;
    Var forward(Tape& tape, Var x);

    Parameter& weight(std::size_t layer) { return weights_[layer]; }
    Parameter& bias(std::size_t layer) { return biases_[layer]; }
    const Parameter& weight(std::size_t layer) const { return weights_[layer]; }
    const Parameter& bias(std::size_t layer) const { return biases_[layer]; }

    // Layer-major, weight then bias.
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;

private:
    std::vector<int> sizes_;
    std::vector<Parameter> weights_;
    std::vector<Parameter> biases_;
};

Matrix mlp_forward(const Mlp& mlp, const Matrix& x);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<Matrix> m;
    std::vector<Matrix> v;
};

// One bias-corrected Adam update using each parameter's accumulated grad.
void adam_step(std::span<Parameter* const> params, AdamState& state, double lr);

struct LrSchedule {
    double initial = 1e-3;
    double floor = 1e-6;
    double factor = 0.1;
    int period = 50;

    double at(int epoch) const;
};

struct Checkpoint {
    std::string kind;
    std::string architecture; // JSON text
    std::uint64_t seed = 0;
    std::string config; // JSON text
    std::vector<Matrix> tensors;
    std::optional<AdamState> optimizer;
    int epoch = 0;
};

std::string sha256_hex(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies tensors into parameters, checking every shape.
void assign_tensors(std::span<Parameter* const> params, const std::vector<Matrix>& tensors,
                    std::size_t offset = 0);
std::vector<Matrix> collect_tensors(std::span<const Parameter* const> params);

} // namespace ntl

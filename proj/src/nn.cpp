#include "ntl/nn.hpp"

#include "ntl/error.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ntl {

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes little-endian");

Mlp::Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
    require(sizes_.size() >= 2, ErrorCode::InvalidArgument, "an MLP needs at least two layer sizes");
    for (int s : sizes_) {
        require(s > 0, ErrorCode::InvalidArgument, "layer sizes must be positive");
    }
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        weights_.emplace_back(Matrix::Zero(sizes_[l], sizes_[l + 1]));
        biases_.emplace_back(Matrix::Zero(1, sizes_[l + 1]));
    }
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        n += static_cast<std::size_t>(sizes_[l]) * static_cast<std::size_t>(sizes_[l + 1]) +
             static_cast<std::size_t>(sizes_[l + 1]);
    }
    return n;
}

void Mlp::init_glorot(std::mt19937_64& rng) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        double bound = std::sqrt(6.0 / (sizes_[l] + sizes_[l + 1]));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Matrix& w = weights_[l].value;
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.cols(); ++j) {
                w(i, j) = dist(rng);
            }
        }
        biases_[l].value.setZero();
    }
}

Matrix Mlp::forward(const Matrix& x) const {
    if (x.cols() != sizes_.front()) {
        fail(ErrorCode::DimensionMismatch, "MLP input has " + std::to_string(x.cols()) +
                                               " columns, expected " + std::to_string(sizes_.front()));
    }
    Matrix h = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        Matrix z = row_product(h, weights_[l].value);
        z.rowwise() += biases_[l].value.row(0);
        if (l + 1 < weights_.size()) {
            z = z.cwiseMax(0.0);
        }
        h = std::move(z);
    }
    return h;
}

Var Mlp::forward(Tape& tape, Var x) {
    if (x.cols() != sizes_.front()) {
        fail(ErrorCode::DimensionMismatch, "MLP input has " + std::to_string(x.cols()) +
                                               " columns, expected " + std::to_string(sizes_.front()));
    }
    Var h = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        h = tape.add_bias(tape.matmul(h, tape.param(weights_[l])), tape.param(biases_[l]));
        if (l + 1 < weights_.size()) {
            h = tape.relu(h);
        }
    }
    return h;
}

std::vector<Parameter*> Mlp::parameters() {
    std::vector<Parameter*> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out.push_back(&weights_[l]);
        out.push_back(&biases_[l]);
    }
    return out;
}

std::vector<const Parameter*> Mlp::parameters() const {
    std::vector<const Parameter*> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out.push_back(&weights_[l]);
        out.push_back(&biases_[l]);
    }
    return out;
}

Matrix mlp_forward(const Mlp& mlp, const Matrix& x) { return mlp.forward(x); }

void adam_step(std::span<Parameter* const> params, AdamState& st, double lr) {
    if (st.m.empty() && st.step == 0) {
        for (const Parameter* p : params) {
            st.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
            st.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        }
    }
    if (st.m.size() != params.size() || st.v.size() != params.size()) {
        fail(ErrorCode::ShapeMismatch, "optimizer state does not match parameter count");
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        const Parameter& p = *params[k];
        if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols() ||
            st.m[k].rows() != p.value.rows() || st.m[k].cols() != p.value.cols()) {
            fail(ErrorCode::ShapeMismatch, "gradient or moment shape differs from parameter " +
                                               std::to_string(k));
        }
    }
    ++st.step;
    const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Parameter& p = *params[k];
        Matrix& m = st.m[k];
        Matrix& v = st.v[k];
        m = st.beta1 * m + (1.0 - st.beta1) * p.grad;
        v = st.beta2 * v + (1.0 - st.beta2) * p.grad.cwiseAbs2();
        p.value.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + st.eps);
    }
}

double LrSchedule::at(int epoch) const {
    require(epoch >= 0, ErrorCode::InvalidArgument, "epoch must be non-negative");
    int k = period > 0 ? epoch / period : 0;
    double lr = factor > 0.0 && factor < 1.0 ? initial / std::pow(1.0 / factor, k)
                                               : initial * std::pow(factor, k);
    return std::max(lr, floor);
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        fail(ErrorCode::IoError, "sha256 failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 15]);
    }
    return out;
}

namespace {

constexpr const char* kMagic = "ntl-checkpoint 1";

void append_matrix(std::string& buf, const Matrix& m) {
    buf.append(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double));
}

nlohmann::json shape_list(const std::vector<Matrix>& ts) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& t : ts) {
        out.push_back({t.rows(), t.cols()});
    }
    return out;
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    nlohmann::json header;
    header["kind"] = ckpt.kind;
    header["architecture"] = ckpt.architecture.empty() ? nlohmann::json() : nlohmann::json::parse(ckpt.architecture);
    header["seed"] = ckpt.seed;
    header["config"] = ckpt.config.empty() ? nlohmann::json() : nlohmann::json::parse(ckpt.config);
    header["parameter_order"] = "layer-major, weight then bias, row-major float64 little-endian";
    header["tensors"] = shape_list(ckpt.tensors);
    header["epoch"] = ckpt.epoch;
    std::string payload;
    for (const auto& t : ckpt.tensors) {
        append_matrix(payload, t);
    }
    if (ckpt.optimizer) {
        const AdamState& a = *ckpt.optimizer;
        header["optimizer"] = {{"name", "adam"},
                               {"step", a.step},
                               {"beta1", a.beta1},
                               {"beta2", a.beta2},
                               {"eps", a.eps},
                               {"moments", shape_list(a.m)}};
        for (const auto& m : a.m) append_matrix(payload, m);
        for (const auto& v : a.v) append_matrix(payload, v);
    }
    std::string header_text = header.dump();
    std::string hash = sha256_hex(header_text + payload);

    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) {
            fail(ErrorCode::IoError, "cannot write " + path.string());
        }
        out << kMagic << '\n' << header_text << '\n' << "sha256 " << hash << '\n' << "---\n";
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        if (!out) {
            fail(ErrorCode::IoError, "write failed for " + path.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::IoError, "cannot open " + path.string());
    }
    std::string magic, header_text, hash_line, sep;
    if (!std::getline(in, magic) || magic != kMagic || !std::getline(in, header_text) ||
        !std::getline(in, hash_line) || !std::getline(in, sep) || sep != "---" ||
        hash_line.rfind("sha256 ", 0) != 0) {
        fail(ErrorCode::CorruptCheckpoint, "bad checkpoint header in " + path.string());
    }
    std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (sha256_hex(header_text + payload) != hash_line.substr(7)) {
        fail(ErrorCode::CorruptCheckpoint, "content hash mismatch in " + path.string());
    }
    Checkpoint ck;
    std::size_t offset = 0;
    auto take = [&](Eigen::Index rows, Eigen::Index cols) {
        std::size_t bytes = static_cast<std::size_t>(rows * cols) * sizeof(double);
        if (offset + bytes > payload.size()) {
            fail(ErrorCode::CorruptCheckpoint, "payload shorter than declared tensors");
        }
        Matrix m(rows, cols);
        std::memcpy(m.data(), payload.data() + offset, bytes);
        offset += bytes;
        return m;
    };
    try {
        auto header = nlohmann::json::parse(header_text);
        ck.kind = header.at("kind").get<std::string>();
        ck.architecture = header.at("architecture").is_null() ? "" : header.at("architecture").dump();
        ck.seed = header.at("seed").get<std::uint64_t>();
        ck.config = header.at("config").is_null() ? "" : header.at("config").dump();
        ck.epoch = header.at("epoch").get<int>();
        for (const auto& s : header.at("tensors")) {
            ck.tensors.push_back(take(s.at(0).get<Eigen::Index>(), s.at(1).get<Eigen::Index>()));
        }
        if (header.contains("optimizer")) {
            const auto& o = header.at("optimizer");
            AdamState a;
            a.step = o.at("step").get<long>();
            a.beta1 = o.at("beta1").get<double>();
            a.beta2 = o.at("beta2").get<double>();
            a.eps = o.at("eps").get<double>();
            for (const auto& s : o.at("moments")) {
                a.m.push_back(take(s.at(0).get<Eigen::Index>(), s.at(1).get<Eigen::Index>()));
            }
            for (const auto& s : o.at("moments")) {
                a.v.push_back(take(s.at(0).get<Eigen::Index>(), s.at(1).get<Eigen::Index>()));
            }
            ck.optimizer = std::move(a);
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::CorruptCheckpoint, std::string("bad checkpoint header: ") + e.what());
    }
    if (offset != payload.size()) {
        fail(ErrorCode::CorruptCheckpoint, "payload longer than declared tensors");
    }
    return ck;
}

void assign_tensors(std::span<Parameter* const> params, const std::vector<Matrix>& tensors,
                    std::size_t offset) {
    if (offset + params.size() > tensors.size()) {
        fail(ErrorCode::ArchitectureMismatch, "checkpoint holds fewer tensors than the model");
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        const Matrix& t = tensors[offset + k];
        Parameter& p = *params[k];
        if (t.rows() != p.value.rows() || t.cols() != p.value.cols()) {
            fail(ErrorCode::ArchitectureMismatch,
                 "tensor " + std::to_string(offset + k) + " has shape " + std::to_string(t.rows()) + "x" +
                     std::to_string(t.cols()) + ", model expects " + std::to_string(p.value.rows()) +
                     "x" + std::to_string(p.value.cols()));
        }
        p.value = t;
        p.zero_grad();
    }
}

std::vector<Matrix> collect_tensors(std::span<const Parameter* const> params) {
    std::vector<Matrix> out;
    for (const Parameter* p : params) {
        out.push_back(p->value);
    }
    return out;
}

} // namespace ntl

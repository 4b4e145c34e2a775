#pragma once

// Configurable decoder-only transformer at desk scale: forward pass,
// bits-per-byte loss, and exact hand-derived gradients, all in 64-bit
// floats.
//
// Parameters live in one flat arena addressed by a deterministic tensor
// layout. Projection matrices are stored [out_dim, in_dim] and applied as
// y = x · Wᵀ, so Muon's √(max(1, rows/cols)) update scaling sees out/in.

#include <cstdint>
#include <string>
#include <vector>

#include "searchlab/config.hpp"
#include "searchlab/data.hpp"
#include "searchlab/util.hpp"

namespace searchlab {

enum class ParamGroup { embedding, unembedding, matrix, scalar };
std::string to_string(ParamGroup g);

struct TensorSpec {
    std::string name;
    int rows = 0;
    int cols = 0;
    ParamGroup group = ParamGroup::matrix;
    std::size_t offset = 0;

    std::size_t size() const { return std::size_t(rows) * std::size_t(cols); }
};

struct ParamLayout {
    std::vector<TensorSpec> tensors;
    std::size_t total_elements = 0;

    static ParamLayout build(const ArchConfig& arch, int vocab_size);
    bool has(const std::string& name) const;
    const TensorSpec& at(const std::string& name) const;
};

struct ModelParams {
    ArchConfig arch;
    int vocab_size = 0;
    ParamLayout layout;
    std::vector<double> data;

    double* tensor(const std::string& name) { return data.data() + layout.at(name).offset; }
    const double* tensor(const std::string& name) const { return data.data() + layout.at(name).offset; }
    std::int64_t param_count() const { return std::int64_t(data.size()); }

    // Seeded Gaussian init scaled 1/√fan_in (fan_in = stored column count)
    // for matrices and embedding tables; gains and residual scales start at
    // 1, value-embedding gates at −2 (σ ≈ 0.12, near-passthrough), and the
    // untied unembedding at zero so an untrained model scores exactly the
    // uniform bound log₂(vocab).
    static ModelParams init(const ArchConfig& arch, int vocab_size, std::uint64_t seed);
};

// Pointwise activations. For the gated MLP kinds (swiglu, geglu) the
// pointwise form is the gate nonlinearity (silu resp. gelu); the value‖gate
// product is composed inside the MLP.
double apply_activation(Activation kind, double x);
double activation_grad(Activation kind, double x);
Activation gate_activation(Activation kind);

void rmsnorm(const double* x, const double* gain, int n, double eps, double* out);
// In-place adjacent-pair rotation, angle position · base^(−2i/head_dim).
void rope_rotate(double* vec, int head_dim, int position, double base);

constexpr double kRmsEps = 1e-5;
constexpr double kRopeBase = 10000.0;

// Visible-key count for a layer (seq_len means full causal visibility).
int layer_window(const ArchConfig& arch, int layer, int seq_len);
bool layer_has_value_embedding(const ArchConfig& arch, int layer);
int ffn_hidden_dim(const ArchConfig& arch);

struct ForwardResult {
    double ce_nats_sum = 0.0;  // summed over scored targets
    int scored_targets = 0;
    double bytes = 0.0;  // predicted-span bytes in the batch

    double mean_ce_nats() const { return scored_targets ? ce_nats_sum / scored_targets : 0.0; }
    double bpb() const;
};

// Logits for every position, rows indexed b·T + t.
Matrix forward_logits(const ModelParams& p, const Batch& batch);

// Masked next-token cross-entropy (nats) summed over scored targets.
double ce_nats_sum(const Matrix& logits, const Batch& batch);
// ce_nats_sum / (ln 2 · predicted-span bytes).
double loss_bpb(const Matrix& logits, const Batch& batch);

ForwardResult forward_loss(const ModelParams& p, const Batch& batch);

// Exact gradient of the mean cross-entropy (nats per scored target) with
// respect to every parameter; grads is resized to the layout and
// overwritten.
ForwardResult forward_backward(const ModelParams& p, const Batch& batch, std::vector<double>& grads);

}  // namespace searchlab

#pragma once

// MuonAdamW: Newton–Schulz orthogonalized momentum for the 2-D transformer
// block matrices, bias-corrected AdamW with decoupled weight decay for
// everything else (embeddings, unembedding, gains, residual scales,
// value-embedding gates). Linear-warmdown learning rate and linearly decayed
// weight decay schedules.

#include <cstdint>
#include <vector>

#include "searchlab/checkpoint.hpp"
#include "searchlab/config.hpp"
#include "searchlab/model.hpp"

namespace searchlab {

constexpr double kNewtonSchulzA = 3.4445;
constexpr double kNewtonSchulzB = -4.7750;
constexpr double kNewtonSchulzC = 2.0315;
constexpr int kNewtonSchulzIters = 5;
constexpr double kMuonMomentum = 0.95;
constexpr double kAdamEps = 1e-8;

// base_lr until (1 − warmdown_ratio)·total_steps, then linear descent to 0.
double lr_at(std::int64_t step, std::int64_t total_steps, double base_lr, double warmdown_ratio);
// base_wd · (1 − step/total_steps).
double wd_at(std::int64_t step, std::int64_t total_steps, double base_wd);

// In place on a row-major [rows, cols] matrix: Frobenius pre-normalization
// (+1e-7), then `iters` rounds of X ← aX + (bA + cA²)X with A = XXᵀ, run on
// the transpose when rows > cols (mathematically identical, smaller A).
// Zero input stays zero.
void newton_schulz_orthogonalize(double* m, int rows, int cols, int iters);

class MuonAdamW {
  public:
    MuonAdamW(const ParamLayout& layout, const HPConfig& hp);

    // schedule_frac = completed-step fraction in [0, 1].
    void step(ModelParams& params, const std::vector<double>& grads, double schedule_frac);

    // Tensors named here are skipped entirely by step(): no state update, no
    // weight decay, no parameter change. Unknown names are an error.
    void set_frozen(const std::vector<std::string>& tensor_names);

    std::int64_t steps_taken() const { return step_; }
    double base_lr_for(const TensorSpec& t) const;
    bool is_muon(const TensorSpec& t) const { return t.group == ParamGroup::matrix; }

    // Checkpoint embedding: buffers under optim.* names.
    std::vector<NamedTensor> state_tensors() const;
    void load_state(const CheckpointContents& contents);

  private:
    ParamLayout layout_;
    HPConfig hp_;
    std::int64_t step_ = 0;
    std::vector<double> momentum_;    // Muon group
    std::vector<double> exp_avg_;     // AdamW group
    std::vector<double> exp_avg_sq_;  // AdamW group
    std::vector<bool> frozen_;        // aligned with layout_.tensors; empty = none
};

}  // namespace searchlab

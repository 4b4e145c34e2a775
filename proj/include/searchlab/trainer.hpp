#pragma once

// One budgeted train-and-evaluate experiment. Everything that can go wrong
// inside an experiment (invalid config at runtime, divergence to non-finite
// loss, numerical blowups) is contained and reported as a crashed record;
// nothing escapes to the surrounding search loop.

#include <cstdint>
#include <optional>
#include <string>

#include "searchlab/config.hpp"
#include "searchlab/data.hpp"
#include "searchlab/model.hpp"

namespace searchlab {

struct Budget {
    std::int64_t steps = 200;
    double seconds = 0.0;  // > 0 switches to wall-clock mode (not covered by
                           // reproducibility guarantees)

    bool wall_clock() const { return seconds > 0.0; }
};

struct ExperimentRecord {
    int index = 0;
    ConfigMutation mutation;
    ArchConfig arch_after;
    HPConfig hp_after;
    std::optional<double> val_bpb;  // absent when crashed
    bool crashed = false;
    bool kept = false;
    std::uint64_t seed = 0;
    std::int64_t steps_run = 0;
    double wall_seconds = 0.0;
    std::int64_t param_count = 0;
};

struct TrainOutcome {
    std::optional<double> val_bpb;
    bool crashed = false;
    std::string crash_reason;
    std::int64_t steps_run = 0;
    double wall_seconds = 0.0;
    std::int64_t param_count = 0;
    double train_bpb = 0.0;  // post-training train-split eval; 0 when crashed
};

// Evaluation batches always use this many sequences so the protocol does not
// drift when experiments change device_batch_seqs.
constexpr int kEvalBatchSeqs = 8;

// Arithmetic mean of per-batch bits-per-byte over the first eval_batches of
// a seeded epoch of the split (all of them if the split is smaller). Pure:
// params are untouched.
double evaluate_split_bpb(const ModelParams& params, const Corpus& corpus, Split split,
                          int eval_batches, std::uint64_t seed);
double evaluate_val_bpb(const ModelParams& params, const Corpus& corpus, int eval_batches,
                        std::uint64_t seed);

// Optional knobs used by the transfer/freezing studies; plain search
// experiments leave them at the defaults.
struct TrainControls {
    const ModelParams* warm_start = nullptr;  // start from these weights instead of fresh init
    std::vector<std::string> frozen_tensors;  // excluded from every optimizer update
};

// Seeded init + MuonAdamW training under the budget, then val eval. With a
// step budget the outcome is bitwise deterministic in (configs, corpus,
// seed). `trained` receives the final parameters when non-null and training
// did not crash.
TrainOutcome run_training(const ArchConfig& arch, const HPConfig& hp, const Corpus& corpus,
                          const Budget& budget, std::uint64_t seed, int eval_batches = 5,
                          ModelParams* trained = nullptr, const TrainControls& controls = {});

ExperimentRecord run_experiment(int index, const ConfigMutation& mutation, const ArchConfig& arch,
                                const HPConfig& hp, const Corpus& corpus, const TrackConfig& track,
                                const Budget& budget, std::uint64_t seed, int eval_batches = 5);

}  // namespace searchlab

#include "searchlab/trainer.hpp"

#include <chrono>
#include <cmath>
#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "searchlab/kernels.hpp"
#include "searchlab/optim.hpp"

namespace searchlab {

namespace {

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

TrackConfig track_for_validation(const Corpus& corpus) {
    TrackConfig t;
    t.name = TrackName::custom;
    t.vocab_size = corpus.tokenizer.vocab_size();
    t.seq_len = corpus.seq_len;
    return t;
}

}  // namespace

double evaluate_split_bpb(const ModelParams& params, const Corpus& corpus, Split split,
                          int eval_batches, std::uint64_t seed) {
    if (eval_batches < 1) throw config_error("eval_batches must be >= 1");
    std::vector<Batch> batches = epoch_batches(corpus, split, kEvalBatchSeqs, seed);
    std::size_t use = std::min(batches.size(), std::size_t(eval_batches));
    double sum = 0.0;
    for (std::size_t i = 0; i < use; ++i) sum += forward_loss(params, batches[i]).bpb();
    return sum / double(use);
}

double evaluate_val_bpb(const ModelParams& params, const Corpus& corpus, int eval_batches,
                        std::uint64_t seed) {
    return evaluate_split_bpb(params, corpus, Split::val, eval_batches, seed);
}

TrainOutcome run_training(const ArchConfig& arch, const HPConfig& hp, const Corpus& corpus,
                          const Budget& budget, std::uint64_t seed, int eval_batches,
                          ModelParams* trained, const TrainControls& controls) {
#if defined(__GLIBC__)
    // Activation buffers are re-allocated every step; without this, glibc
    // serves them with mmap/munmap and page-fault costs dominate sys time.
    static const bool malloc_tuned = [] {
        mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
        mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);
        return true;
    }();
    (void)malloc_tuned;
#endif
    TrainOutcome out;
    auto start = std::chrono::steady_clock::now();
    try {
        auto violations = validate_config(arch, hp, track_for_validation(corpus));
        if (!violations.empty())
            throw config_error("invalid config: " + violations.front().field_path + ": " +
                               violations.front().message);

        ModelParams params = ModelParams::init(arch, corpus.tokenizer.vocab_size(),
                                               derive_seed(seed, 1));
        if (controls.warm_start) {
            if (controls.warm_start->data.size() != params.data.size())
                throw config_error("warm start parameters do not match the model layout");
            params.data = controls.warm_start->data;
        }
        out.param_count = params.param_count();
        MuonAdamW optim(params.layout, hp);
        if (!controls.frozen_tensors.empty()) optim.set_frozen(controls.frozen_tensors);
        BatchStream stream(corpus, Split::train, hp.device_batch_seqs, derive_seed(seed, 2));

        std::vector<double> grads, accum(params.data.size(), 0.0);
        const double inv_accum = 1.0 / hp.grad_accum_steps;
        bool diverged = false;
        while (true) {
            if (budget.wall_clock()) {
                if (elapsed_seconds(start) >= budget.seconds) break;
            } else {
                if (out.steps_run >= budget.steps) break;
            }
            std::fill(accum.begin(), accum.end(), 0.0);
            for (int micro = 0; micro < hp.grad_accum_steps; ++micro) {
                Batch batch = stream.next();
                ForwardResult res = forward_backward(params, batch, grads);
                if (!std::isfinite(res.ce_nats_sum)) {
                    out.crashed = true;
                    out.crash_reason = "non-finite training loss";
                    diverged = true;
                    break;
                }
                kernels::axpy(inv_accum, grads.data(), accum.data(), accum.size());
            }
            if (diverged) break;
            if (!std::isfinite(kernels::sum_sq(accum.data(), accum.size()))) {
                out.crashed = true;
                out.crash_reason = "non-finite gradients";
                break;
            }
            double frac = budget.wall_clock()
                              ? std::min(1.0, elapsed_seconds(start) / budget.seconds)
                              : double(out.steps_run) / double(budget.steps);
            optim.step(params, accum, frac);
            ++out.steps_run;
        }

        if (!out.crashed) {
            double val = evaluate_val_bpb(params, corpus, eval_batches, derive_seed(seed, 3));
            if (!std::isfinite(val)) {
                out.crashed = true;
                out.crash_reason = "non-finite validation loss";
            } else {
                out.val_bpb = val;
                out.train_bpb =
                    evaluate_split_bpb(params, corpus, Split::train, eval_batches, derive_seed(seed, 4));
                if (trained) *trained = std::move(params);
            }
        }
    } catch (const std::exception& e) {
        out.crashed = true;
        out.crash_reason = e.what();
        out.val_bpb.reset();
    }
    out.wall_seconds = elapsed_seconds(start);
    return out;
}

ExperimentRecord run_experiment(int index, const ConfigMutation& mutation, const ArchConfig& arch,
                                const HPConfig& hp, const Corpus& corpus, const TrackConfig& track,
                                const Budget& budget, std::uint64_t seed, int eval_batches) {
    ExperimentRecord rec;
    rec.index = index;
    rec.mutation = mutation;
    rec.arch_after = arch;
    rec.hp_after = hp;
    rec.seed = seed;

    auto violations = validate_config(arch, hp, track);
    if (!violations.empty()) {
        rec.crashed = true;
        return rec;
    }
    TrainOutcome out = run_training(arch, hp, corpus, budget, seed, eval_batches);
    rec.val_bpb = out.val_bpb;
    rec.crashed = out.crashed;
    rec.steps_run = out.steps_run;
    rec.wall_seconds = out.wall_seconds;
    rec.param_count = out.param_count;
    return rec;
}

}  // namespace searchlab

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "searchlab/config.hpp"
#include "searchlab/data.hpp"
#include "searchlab/metrics.hpp"
#include "searchlab/model.hpp"
#include "searchlab/search.hpp"
#include "searchlab/stats.hpp"
#include "searchlab/trainer.hpp"

namespace searchlab {

// ---------------------------------------------------------------------------
// Config replay and feature extraction
// ---------------------------------------------------------------------------

// The configuration a run ended on: the state after its last kept experiment
// (keeps are strictly improving, so the last one is the best), or the starting
// configuration if nothing was kept. Requires at least one completed
// experiment to reconstruct the start from.
ConfigPair final_config(const RunLog& log);

// Fixed feature schema shared by every vector this function produces:
//   numeric: depth, width, heads, kv_heads, ffn_mult,
//            lr_embedding, lr_unembedding, lr_matrix, lr_scalar
//   categorical: activation, attention_pattern, value_embeddings, weight_tying
// The label is the run's track.
FeatureVector extract_features(const RunLog& log);
std::vector<std::string> feature_schema_numeric();
std::vector<std::string> feature_schema_categorical();

// ---------------------------------------------------------------------------
// Transfer matrix
// ---------------------------------------------------------------------------

struct TransferCell {
    std::string source_track;
    std::string target_track;
    double native_bpb = 0.0;
    double transfer_bpb = 0.0;
    double rel_change_pct = 0.0;  // (transfer - native) / native * 100; negative = better
    bool crashed = false;
    std::string crash_reason;
};

struct TransferTrackInput {
    std::string name;
    TrackConfig track;
    ArchConfig arch;  // this track's best (native) architecture
    HPConfig hp;      // this track's default hyperparameters
    const Corpus* corpus = nullptr;
};

// Trains every architecture on every other track's data under one shared
// budget. Cell (s, t) uses the target track's hyperparameters so the
// comparison isolates the architecture. Diagonal cells are 0 by definition.
std::vector<TransferCell> transfer_matrix(const std::vector<TransferTrackInput>& tracks,
                                          const Budget& budget, std::uint64_t seed,
                                          int eval_batches = 5, int parallel = 1);

std::string transfer_csv(const std::vector<TransferCell>& cells);

// ---------------------------------------------------------------------------
// Layer freezing
// ---------------------------------------------------------------------------

struct FreezeLevel {
    int frozen_blocks = 0;
    double val_bpb = 0.0;
    double degradation_pct = 0.0;  // vs. the fully fine-tuned (level 0) run
    bool crashed = false;
    std::string crash_reason;
};

// For k = 0..depth: copy the trained source model, freeze its k deepest
// transformer blocks, fine-tune everything else on the target corpus, and
// report degradation relative to k = 0. Embedding-side tensors are always
// re-initialized for the target vocabulary and always trainable. Every level
// shares the same data/init seed so freezing depth is the only difference.
std::vector<FreezeLevel> layer_freeze_curve(const ModelParams& source, const TrackConfig& target,
                                            const Corpus& target_corpus, const HPConfig& hp,
                                            const Budget& budget, std::uint64_t seed,
                                            int eval_batches = 5, int parallel = 1);

std::string freeze_csv(const std::vector<FreezeLevel>& levels);

// ---------------------------------------------------------------------------
// Length matching
// ---------------------------------------------------------------------------

struct LengthMatchResult {
    int truncated_len = 0;
    double full_bpb = 0.0;       // trained/evaluated at the target's native length
    double truncated_bpb = 0.0;  // trained/evaluated with sequences cut to truncated_len
    double rel_change_pct = 0.0;
    bool crashed = false;
    std::string crash_reason;
};

LengthMatchResult length_match_eval(const ArchConfig& source_arch, const HPConfig& hp,
                                    const TrackConfig& target, const Corpus& target_corpus,
                                    int truncated_len, const Budget& budget, std::uint64_t seed,
                                    int eval_batches = 5);

std::string length_match_csv(const std::vector<LengthMatchResult>& results);

// ---------------------------------------------------------------------------
// Innovation classification
// ---------------------------------------------------------------------------

struct KeptMutation {
    ConfigMutation mutation;
    std::string origin_run_id;
    std::string origin_track;
};

std::vector<KeptMutation> collect_kept_mutations(const std::vector<RunLog>& logs);

struct InnovationOutcome {
    std::string track;
    double baseline_bpb = 0.0;
    double modified_bpb = 0.0;
    double degradation_pct = 0.0;  // (modified - baseline) / baseline * 100
    bool crashed = false;
};

struct Innovation {
    KeptMutation source;
    bool applicable = true;  // force-applies cleanly and validates on every track's baseline
    std::vector<InnovationOutcome> outcomes;
    bool universal = false;  // applicable and every degradation strictly < 1%
};

struct InnovationTrackInput {
    std::string name;
    TrackConfig track;
    ArchConfig baseline_arch;
    HPConfig hp;
    const Corpus* corpus = nullptr;
};

struct InnovationSummary {
    std::vector<Innovation> innovations;
    int classified = 0;  // applicable innovations
    int universal = 0;
    StatReport binomial;  // upper tail of universal count against p0 = 0.35
};

// Applies each kept mutation to every track's baseline (force-setting the new
// values; old_value fields are ignored because they refer to the origin run's
// mid-search config), trains under the budget, and classifies by the strict
// <1% degradation rule. Inapplicable mutations (invalid on some baseline) are
// flagged and excluded from the binomial summary.
InnovationSummary classify_innovations(const std::vector<KeptMutation>& kept,
                                       const std::vector<InnovationTrackInput>& tracks,
                                       const Budget& budget, std::uint64_t seed,
                                       int eval_batches = 5, int parallel = 1,
                                       double universal_p0 = 0.35);

std::string innovations_csv(const InnovationSummary& summary);

// ---------------------------------------------------------------------------
// Technique classification
// ---------------------------------------------------------------------------

struct TechniqueRule {
    std::string name;
    // Receives every kept mutation of one run.
    std::function<bool(const std::vector<ConfigMutation>&)> matches;
};

// The five stock rules: windowed/local attention adoption, embedding width
// reduction, positional encoding change, depth/width rebalancing, and
// regularization increase.
const std::vector<TechniqueRule>& default_technique_rules();

std::vector<std::pair<std::string, bool>> classify_techniques(
    const RunLog& log, const std::vector<TechniqueRule>& rules = default_technique_rules());

// ---------------------------------------------------------------------------
// Report bundle
// ---------------------------------------------------------------------------

struct ReportInputs {
    std::vector<RunLog> logs;
    std::vector<TransferCell> transfer;    // optional; emitted when non-empty
    std::vector<StatReport> extra_stats;   // appended to the stats table
    json families;                         // family id -> array of test ids; may be null
    int bootstrap_resamples = 2000;
    int n_perm = 2000;
    std::uint64_t seed = 0;
};

struct ReportBundle {
    std::vector<DecompositionResult> decomposition;
    std::vector<StatReport> stats;
    std::vector<std::string> warnings;
};

// Writes tables/*.csv, figures/*.svg and report.md under out_dir. Outputs are
// deterministic: identical inputs give byte-identical bundles.
ReportBundle generate_report(const ReportInputs& inputs, const std::string& out_dir);

// Minimal standalone SVG line chart; series are drawn in order with a small
// built-in palette and a legend.
std::string svg_line_chart(const std::string& title, const std::vector<std::string>& names,
                           const std::vector<std::vector<double>>& series, int width = 720,
                           int height = 420);

// Shared helper: runs fn(0..n-1) on `parallel` threads (serial when <= 1).
// Exceptions inside jobs are collected and the first one is rethrown.
void parallel_for(std::size_t n, int parallel, const std::function<void(std::size_t)>& fn);

}  // namespace searchlab

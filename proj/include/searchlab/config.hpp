#pragma once

// Architecture / hyperparameter / track configuration space, mutations over
// it, and per-condition constraint checking.
//
// Mutations are typed field edits addressed by field path (e.g. "depth",
// "lr_matrix"). Field values travel as JSON values so that proposals, run
// logs, and diffs share one exact representation.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace searchlab {

using json = nlohmann::json;

enum class Activation { relu, gelu, silu, relu_squared, swiglu, geglu };
enum class AttentionPattern { full, windowed };
enum class WindowTag { short_window, long_window };
enum class Positional { rope, none };
enum class Norm { rmsnorm };
enum class ValueEmbeddings { off, alternating, every_layer };
enum class ResidualScaling { fixed, learned_per_layer };

bool activation_is_gated(Activation a);

std::string to_string(Activation a);
std::string to_string(AttentionPattern p);
std::string to_string(WindowTag t);
std::string to_string(Positional p);
std::string to_string(Norm n);
std::string to_string(ValueEmbeddings v);
std::string to_string(ResidualScaling r);

struct ArchConfig {
    int depth = 6;
    int width = 320;
    int heads = 5;
    int kv_heads = 5;
    double ffn_mult = 5.0;
    Activation activation = Activation::relu_squared;
    AttentionPattern attention_pattern = AttentionPattern::windowed;
    std::vector<WindowTag> window_cycle = {WindowTag::short_window, WindowTag::short_window,
                                           WindowTag::short_window, WindowTag::long_window};
    int window_size = 64;
    Positional positional = Positional::rope;
    Norm norm = Norm::rmsnorm;
    ValueEmbeddings value_embeddings = ValueEmbeddings::alternating;
    ResidualScaling residual_scaling = ResidualScaling::fixed;
    bool weight_tying = false;

    int head_dim() const { return width / heads; }

    // The shared reference architecture (depth 6, width 320, heads 5, SSSL
    // windows at a quarter of the sequence length).
    static ArchConfig baseline(int seq_len);
    // Smaller default sized for CPU-budget experiments.
    static ArchConfig desk_default(int seq_len);

    bool operator==(const ArchConfig&) const = default;
};

struct HPConfig {
    double lr_embedding = 0.6;
    double lr_unembedding = 0.004;
    double lr_matrix = 0.04;
    double lr_scalar = 0.5;
    double weight_decay = 0.2;
    double adam_beta1 = 0.8;
    double adam_beta2 = 0.95;
    double warmdown_ratio = 0.5;
    std::int64_t total_batch_tokens = 0;
    int device_batch_seqs = 8;
    int grad_accum_steps = 1;

    // Defaults with the batch identity device_batch_seqs * seq_len *
    // grad_accum_steps == total_batch_tokens satisfied for the given track.
    static HPConfig defaults_for(int seq_len, int device_batch_seqs = 8, int grad_accum_steps = 1);

    bool operator==(const HPConfig&) const = default;
};

enum class TrackName { smiles_like, protein_like, nlp_like, custom };
enum class TokenizerKind { chr, bpe };

std::string to_string(TrackName n);
std::string to_string(TokenizerKind k);

struct TrackConfig {
    TrackName name = TrackName::custom;
    int vocab_size = 37;
    int seq_len = 64;
    TokenizerKind tokenizer = TokenizerKind::chr;
    std::string corpus_path;
    double split_fraction = 0.9;

    static TrackConfig preset(TrackName name);
};

/// One proposed change: a set of field edits plus the proposer's rationale.
struct FieldEdit {
    std::string field_path;
    json old_value;
    json new_value;
};

struct ConfigMutation {
    std::vector<FieldEdit> edits;
    std::string rationale;

    bool empty() const { return edits.empty(); }
};

enum class Condition { agent, random_nas, hp_only, fixed_default };

std::string to_string(Condition c);
Condition condition_from_string(const std::string& s);

struct SearchConstraint {
    Condition condition;
    std::set<std::string> mutable_fields;

    static SearchConstraint for_condition(Condition c);
    bool allows(const std::string& field_path) const { return mutable_fields.count(field_path) > 0; }
};

// Field path registries.
const std::vector<std::string>& arch_field_names();
const std::vector<std::string>& hp_field_names();
bool is_arch_field(const std::string& path);
bool is_hp_field(const std::string& path);

// Flat JSON views of a config pair, keyed by field path.
json arch_to_json(const ArchConfig& a);
json hp_to_json(const HPConfig& h);
ArchConfig arch_from_json(const json& j);
HPConfig hp_from_json(const json& j);

struct ConfigPair {
    ArchConfig arch;
    HPConfig hp;

    bool operator==(const ConfigPair&) const = default;
};

json pair_to_json(const ConfigPair& p);
ConfigPair pair_from_json(const json& j);

struct Violation {
    std::string field_path;
    std::string message;
};

// Returns every violated invariant; empty result means the configuration is
// valid for the track.
std::vector<Violation> validate_config(const ArchConfig& arch, const HPConfig& hp, const TrackConfig& track);

enum class RejectionKind { constraint_violation, stale_old_value, invalid_value };

struct Rejection {
    RejectionKind kind;
    std::string field_path;
    std::string message;
};

std::string to_string(RejectionKind k);

using ApplyResult = std::variant<ConfigPair, Rejection>;

// Applies a mutation under a constraint. Inputs are never modified; on
// rejection the offending field path is named.
ApplyResult apply_mutation(const ConfigPair& current, const ConfigMutation& m, const SearchConstraint& c);

// Uniform sample from the random-NAS space: depth 3..8, width 128..512 step
// 32, heads 2..8 resampled until divisibility, activation in {relu, gelu,
// silu, relu_squared}, attention in {full, windowed}; kv_heads = heads;
// everything else at baseline defaults.
ArchConfig sample_random_nas(std::uint64_t seed, int seq_len);

// Minimal field-level diff with apply_mutation(a, diff) == b.
ConfigMutation diff_configs(const ConfigPair& a, const ConfigPair& b);

// JSON (de)serialization of mutations, schema {"edits":[{"field_path":...,
// "old_value":..., "new_value":...}], "rationale":"..."}.
json mutation_to_json(const ConfigMutation& m);
ConfigMutation mutation_from_json(const json& j);

// Flat key-value config file ("key = value" per line, '#' comments). Keys are
// the field paths of ArchConfig, HPConfig and TrackConfig; unknown keys are
// errors. Missing keys keep their defaults: the track presets, then the
// desk-scale baseline architecture for the track's sequence length.
struct LoadedConfig {
    TrackConfig track;
    ArchConfig arch;
    HPConfig hp;
};

LoadedConfig load_config_file(const std::string& path);
LoadedConfig parse_config_text(const std::string& text, const std::string& origin = "<string>");

// Serializes one config back to the key-value format (used by sample-nas).
std::string arch_to_kv(const ArchConfig& a);

}  // namespace searchlab

#pragma once

// The four-condition search loop: proposer-driven sequential search with
// strict-improvement keep/revert (agent), random NAS sampling, HP-only
// search, and the fixed default. Runs persist as JSON Lines, one
// ExperimentRecord per line after a single header line.

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "searchlab/config.hpp"
#include "searchlab/data.hpp"
#include "searchlab/trainer.hpp"

namespace searchlab {

struct RunLog {
    Condition condition = Condition::agent;
    std::string track;
    std::string run_id;
    std::uint64_t seed = 0;
    int n_experiments = 0;
    double baseline_val_bpb = 0.0;
    std::string proposer;
    std::vector<ExperimentRecord> records;
};

class Proposer {
  public:
    virtual ~Proposer() = default;
    // Must reference the current config's values as old_values.
    virtual ConfigMutation propose(const RunLog& history, const ConfigPair& current,
                                   const SearchConstraint& constraint) = 0;
    virtual std::string descriptor() const = 0;
};

// Replays a fixed list of mutations; when exhausted, proposes no-ops.
class ScriptedProposer : public Proposer {
  public:
    explicit ScriptedProposer(std::vector<ConfigMutation> script) : script_(std::move(script)) {}
    ConfigMutation propose(const RunLog&, const ConfigPair&, const SearchConstraint&) override;
    std::string descriptor() const override { return "scripted"; }

  private:
    std::vector<ConfigMutation> script_;
    std::size_t pos_ = 0;
};

// Uniform architecture sampling (sample_random_nas); each proposal rewrites
// exactly the random-NAS-mutable fields of the current config, leaving
// hyperparameters at their run defaults. History is ignored.
class RandomNasProposer : public Proposer {
  public:
    RandomNasProposer(std::uint64_t seed, int seq_len) : seed_(seed), seq_len_(seq_len) {}
    ConfigMutation propose(const RunLog&, const ConfigPair& current,
                           const SearchConstraint& constraint) override;
    std::string descriptor() const override { return "random_nas"; }

  private:
    std::uint64_t seed_;
    int seq_len_;
    std::uint64_t count_ = 0;
};

struct network_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct auth_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// First balanced top-level JSON object embedded in free text, if any.
std::optional<json> extract_first_json_object(const std::string& text);

// Chat-completions client against an OpenAI-compatible endpoint. Renders
// history + current config + the condition's constraint into the prompt and
// expects one JSON object of field edits plus rationale back. Transient
// failures and malformed replies are retried up to 3 times; persistent
// malformed output degrades to a no-op proposal whose rationale starts with
// "malformed_after_retries". Credential problems raise auth_error, a dead
// endpoint raises network_error.
class LLMProposer : public Proposer {
  public:
    LLMProposer(std::string endpoint, std::string model, std::string api_key);
    ConfigMutation propose(const RunLog& history, const ConfigPair& current,
                           const SearchConstraint& constraint) override;
    std::string descriptor() const override { return "llm:" + model_; }

    // Prompt templates, exposed for inspection/tests.
    static std::string system_prompt(Condition condition);
    static std::string user_prompt(const RunLog& history, const ConfigPair& current,
                                   const SearchConstraint& constraint);

  private:
    std::string endpoint_, model_, api_key_;
};

// Builds an LLMProposer from SEARCHLAB_LLM_ENDPOINT / SEARCHLAB_LLM_KEY
// (and SEARCHLAB_LLM_MODEL unless `model` is non-empty).
std::unique_ptr<Proposer> make_llm_proposer_from_env(const std::string& model = "");

struct SearchParams {
    Condition condition = Condition::agent;
    TrackConfig track;
    ConfigPair start;
    int n_experiments = 100;
    Budget budget;
    std::uint64_t seed = 0;
    std::string run_id;
    int eval_batches = 5;
    std::string log_path;  // when non-empty, the log is appended line by line
};

// Evaluates the unmodified start config first (stored as the baseline, seed
// stream 0), then runs n_experiments proposals (seed stream i for experiment
// i). Constraint violations and invalid configs consume a slot as
// crashed-equivalent rejected records. Keeps require strictly smaller
// val_bpb; ties revert. fixed_default ignores the proposer and emits a
// header-only log.
RunLog run_search(const SearchParams& params, const Corpus& corpus, Proposer* proposer);

json runlog_header_json(const RunLog& log);
json record_to_json(const ExperimentRecord& rec);
ExperimentRecord record_from_json(const json& j);
std::string runlog_to_jsonl(const RunLog& log);
RunLog runlog_from_jsonl(const std::string& text);
void save_runlog(const std::string& path, const RunLog& log);
RunLog load_runlog(const std::string& path);

}  // namespace searchlab

#include "searchlab/search.hpp"

#include <fstream>
#include <sstream>

#include <httplib.h>

#include "searchlab/util.hpp"

namespace searchlab {

ConfigMutation ScriptedProposer::propose(const RunLog&, const ConfigPair&,
                                         const SearchConstraint&) {
    if (pos_ >= script_.size()) {
        ConfigMutation noop;
        noop.rationale = "no-op: script exhausted";
        return noop;
    }
    return script_[pos_++];
}

ConfigMutation RandomNasProposer::propose(const RunLog&, const ConfigPair& current,
                                          const SearchConstraint& constraint) {
    ArchConfig sampled = sample_random_nas(derive_seed(seed_, count_++), seq_len_);
    // Candidate = current config with exactly the sampler-owned fields
    // replaced, so old_values are fresh and nothing outside the constraint
    // is touched.
    ConfigPair target = current;
    target.arch.depth = sampled.depth;
    target.arch.width = sampled.width;
    target.arch.heads = sampled.heads;
    target.arch.kv_heads = sampled.kv_heads;
    target.arch.activation = sampled.activation;
    target.arch.attention_pattern = sampled.attention_pattern;
    target.arch.window_cycle = sampled.window_cycle;
    target.arch.window_size = sampled.window_size;
    ConfigMutation m = diff_configs(current, target);
    for (const FieldEdit& e : m.edits)
        if (!constraint.allows(e.field_path))
            throw config_error("random NAS produced an out-of-constraint edit: " + e.field_path);
    m.rationale = "uniform random architecture sample";
    return m;
}

std::optional<json> extract_first_json_object(const std::string& text) {
    for (std::size_t start = 0; start < text.size(); ++start) {
        if (text[start] != '{') continue;
        int depth = 0;
        bool in_string = false, escaped = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (escaped)
                    escaped = false;
                else if (c == '\\')
                    escaped = true;
                else if (c == '"')
                    in_string = false;
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                --depth;
                if (depth == 0) {
                    json j = json::parse(text.substr(start, i - start + 1), nullptr, false);
                    if (!j.is_discarded() && j.is_object()) return j;
                    break;  // balanced but unparsable; try the next '{'
                }
            }
        }
    }
    return std::nullopt;
}

namespace {

constexpr const char* kHpOnlySentence =
    "Do NOT change model architecture: no new layers, no attention pattern changes, no "
    "activation function changes, no model structure changes.";

std::string short_edits(const ConfigMutation& m) {
    if (m.edits.empty()) return "(none)";
    std::string out;
    for (std::size_t i = 0; i < m.edits.size(); ++i) {
        if (i) out += ", ";
        out += m.edits[i].field_path + ": " + m.edits[i].old_value.dump() + " -> " +
               m.edits[i].new_value.dump();
    }
    return out;
}

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_endpoint(const std::string& endpoint) {
    SplitUrl out;
    std::size_t scheme = endpoint.find("://");
    if (scheme == std::string::npos)
        throw config_error("LLM endpoint must include a scheme: " + endpoint);
    std::size_t slash = endpoint.find('/', scheme + 3);
    if (slash == std::string::npos) {
        out.base = endpoint;
        out.path = "/v1/chat/completions";
    } else {
        out.base = endpoint.substr(0, slash);
        out.path = endpoint.substr(slash);
    }
    return out;
}

}  // namespace

LLMProposer::LLMProposer(std::string endpoint, std::string model, std::string api_key)
    : endpoint_(std::move(endpoint)), model_(std::move(model)), api_key_(std::move(api_key)) {
    split_endpoint(endpoint_);  // validate early
}

std::string LLMProposer::system_prompt(Condition condition) {
    std::string p =
        "You are a search agent improving a small autoregressive transformer language model.\n"
        "Loop contract: you see the current configuration and the history of prior experiments.\n"
        "You respond with exactly ONE coherent modification. It is trained under a fixed budget\n"
        "and evaluated as val_bpb (bits per byte on held-out data; lower is better). The change\n"
        "is kept only if val_bpb strictly improves on the best so far, otherwise it is reverted.\n";
    if (condition == Condition::hp_only) {
        p += std::string(kHpOnlySentence) +
             "\nYou may only modify hyperparameters: learning rates, batch size and gradient\n"
             "accumulation, weight decay, and optimizer schedule parameters.\n";
    } else {
        p += "Explore the architecture: depth/width balance, attention patterns, head structure,\n"
             "activation functions, residual pathways, and embedding structure. Hyperparameter\n"
             "changes are also permitted.\n";
    }
    p += "Respond with exactly one JSON object and no other text:\n"
         "{\"edits\": [{\"field_path\": \"...\", \"old_value\": ..., \"new_value\": ...}],"
         " \"rationale\": \"...\"}\n"
         "Every old_value must equal the field's current value.";
    return p;
}

std::string LLMProposer::user_prompt(const RunLog& history, const ConfigPair& current,
                                     const SearchConstraint& constraint) {
    std::ostringstream out;
    out << "track: " << history.track << "\n";
    out << "mutable fields:";
    for (const auto& f : constraint.mutable_fields) out << " " << f;
    out << "\n";
    out << "current config: " << pair_to_json(current).dump() << "\n";
    out << "baseline val_bpb: " << format_double(history.baseline_val_bpb) << "\n";
    double best = history.baseline_val_bpb;
    for (const auto& r : history.records)
        if (!r.crashed && r.val_bpb && *r.val_bpb < best) best = *r.val_bpb;
    out << "best val_bpb so far: " << format_double(best) << "\n";
    out << "history (most recent last):\n";
    std::size_t from = history.records.size() > 30 ? history.records.size() - 30 : 0;
    for (std::size_t i = from; i < history.records.size(); ++i) {
        const auto& r = history.records[i];
        out << "#" << r.index << " crashed=" << (r.crashed ? 1 : 0) << " kept=" << (r.kept ? 1 : 0);
        if (r.val_bpb) out << " val_bpb=" << format_double(*r.val_bpb);
        out << " edits=" << short_edits(r.mutation) << "\n";
    }
    out << "Propose the next single modification as one JSON object.";
    return out.str();
}

ConfigMutation LLMProposer::propose(const RunLog& history, const ConfigPair& current,
                                    const SearchConstraint& constraint) {
    SplitUrl url = split_endpoint(endpoint_);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (url.base.rfind("https://", 0) == 0)
        throw network_error("https endpoint requires an OpenSSL-enabled build: " + url.base);
#endif
    json body{
        {"model", model_},
        {"messages",
         json::array({json{{"role", "system"}, {"content", system_prompt(constraint.condition)}},
                      json{{"role", "user"}, {"content", user_prompt(history, current, constraint)}}})},
    };
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    bool got_response = false;
    std::string last_problem = "no attempt made";
    const int max_attempts = 4;  // initial try + up to 3 retries
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        httplib::Client cli(url.base);
        cli.set_connection_timeout(10, 0);
        cli.set_read_timeout(300, 0);
        auto res = cli.Post(url.path, headers, body.dump(), "application/json");
        if (!res) {
            last_problem = "connection failed: " + httplib::to_string(res.error());
            continue;
        }
        got_response = true;
        if (res->status == 401 || res->status == 403)
            throw auth_error("LLM endpoint rejected credentials (HTTP " +
                             std::to_string(res->status) + ")");
        if (res->status != 200) {
            last_problem = "HTTP " + std::to_string(res->status);
            continue;
        }
        json reply = json::parse(res->body, nullptr, false);
        if (reply.is_discarded()) {
            last_problem = "response body is not JSON";
            continue;
        }
        std::string content;
        try {
            content = reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const std::exception&) {
            last_problem = "response lacks choices[0].message.content";
            continue;
        }
        auto obj = extract_first_json_object(content);
        if (!obj) {
            last_problem = "no JSON object in model reply";
            continue;
        }
        try {
            return mutation_from_json(*obj);
        } catch (const config_error& e) {
            last_problem = std::string("bad mutation shape: ") + e.what();
            continue;
        }
    }
    if (!got_response) throw network_error("LLM endpoint unreachable: " + last_problem);
    ConfigMutation noop;
    noop.rationale = "malformed_after_retries: " + last_problem;
    return noop;
}

std::unique_ptr<Proposer> make_llm_proposer_from_env(const std::string& model) {
    const char* endpoint = std::getenv("SEARCHLAB_LLM_ENDPOINT");
    if (!endpoint || !*endpoint)
        throw config_error("SEARCHLAB_LLM_ENDPOINT is not set (required for the llm proposer)");
    const char* key = std::getenv("SEARCHLAB_LLM_KEY");
    std::string m = model;
    if (m.empty()) {
        const char* env_model = std::getenv("SEARCHLAB_LLM_MODEL");
        m = env_model && *env_model ? env_model : "gpt-4o-mini";
    }
    return std::make_unique<LLMProposer>(endpoint, m, key ? key : "");
}

json runlog_header_json(const RunLog& log) {
    return json{
        {"condition", to_string(log.condition)}, {"track", log.track},
        {"run_id", log.run_id},                  {"seed", log.seed},
        {"n_experiments", log.n_experiments},    {"baseline_val_bpb", log.baseline_val_bpb},
        {"proposer", log.proposer},
    };
}

json record_to_json(const ExperimentRecord& rec) {
    json j{
        {"index", rec.index},
        {"mutation", mutation_to_json(rec.mutation)},
        {"arch_after", arch_to_json(rec.arch_after)},
        {"hp_after", hp_to_json(rec.hp_after)},
        {"crashed", rec.crashed},
        {"kept", rec.kept},
        {"seed", rec.seed},
        {"steps_run", rec.steps_run},
        {"wall_seconds", rec.wall_seconds},
        {"param_count", rec.param_count},
    };
    if (rec.val_bpb) j["val_bpb"] = *rec.val_bpb;
    return j;
}

ExperimentRecord record_from_json(const json& j) {
    ExperimentRecord rec;
    rec.index = j.at("index").get<int>();
    rec.mutation = mutation_from_json(j.at("mutation"));
    rec.arch_after = arch_from_json(j.at("arch_after"));
    rec.hp_after = hp_from_json(j.at("hp_after"));
    if (j.contains("val_bpb")) rec.val_bpb = j.at("val_bpb").get<double>();
    rec.crashed = j.at("crashed").get<bool>();
    rec.kept = j.at("kept").get<bool>();
    rec.seed = j.at("seed").get<std::uint64_t>();
    rec.steps_run = j.at("steps_run").get<std::int64_t>();
    rec.wall_seconds = j.at("wall_seconds").get<double>();
    rec.param_count = j.at("param_count").get<std::int64_t>();
    return rec;
}

std::string runlog_to_jsonl(const RunLog& log) {
    std::string out = runlog_header_json(log).dump() + "\n";
    for (const auto& rec : log.records) out += record_to_json(rec).dump() + "\n";
    return out;
}

RunLog runlog_from_jsonl(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    RunLog log;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        if (!have_header) {
            log.condition = condition_from_string(j.at("condition").get<std::string>());
            log.track = j.at("track").get<std::string>();
            log.run_id = j.at("run_id").get<std::string>();
            log.seed = j.at("seed").get<std::uint64_t>();
            log.n_experiments = j.at("n_experiments").get<int>();
            log.baseline_val_bpb = j.at("baseline_val_bpb").get<double>();
            log.proposer = j.at("proposer").get<std::string>();
            have_header = true;
        } else {
            log.records.push_back(record_from_json(j));
        }
    }
    if (!have_header) throw io_error("run log has no header line");
    for (std::size_t i = 0; i < log.records.size(); ++i)
        if (log.records[i].index != int(i) + 1)
            throw io_error("run log records are not contiguously indexed from 1");
    return log;
}

void save_runlog(const std::string& path, const RunLog& log) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw io_error("cannot open run log for writing: " + path);
    f << runlog_to_jsonl(log);
    if (!f) throw io_error("failed writing run log: " + path);
}

RunLog load_runlog(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open run log: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return runlog_from_jsonl(ss.str());
}

RunLog run_search(const SearchParams& params, const Corpus& corpus, Proposer* proposer) {
    if (params.condition != Condition::fixed_default && !proposer)
        throw config_error("this condition requires a proposer");

    RunLog log;
    log.condition = params.condition;
    log.track = to_string(params.track.name);
    log.run_id = params.run_id;
    log.seed = params.seed;
    log.n_experiments = params.n_experiments;
    log.proposer = proposer ? proposer->descriptor() : "none";

    TrainOutcome baseline = run_training(params.start.arch, params.start.hp, corpus, params.budget,
                                         derive_seed(params.seed, 0), params.eval_batches);
    if (baseline.crashed || !baseline.val_bpb)
        throw config_error("baseline configuration crashed: " + baseline.crash_reason);
    log.baseline_val_bpb = *baseline.val_bpb;

    std::ofstream out;
    if (!params.log_path.empty()) {
        out.open(params.log_path, std::ios::trunc);
        if (!out) throw io_error("cannot open run log for writing: " + params.log_path);
        out << runlog_header_json(log).dump() << "\n";
        out.flush();
        if (!out) throw io_error("failed writing run log: " + params.log_path);
    }

    if (params.condition == Condition::fixed_default) return log;

    SearchConstraint constraint = SearchConstraint::for_condition(params.condition);
    ConfigPair current = params.start;
    double best = log.baseline_val_bpb;

    for (int i = 1; i <= params.n_experiments; ++i) {
        std::uint64_t seed_i = derive_seed(params.seed, std::uint64_t(i));
        ConfigMutation mutation = proposer->propose(log, current, constraint);

        ExperimentRecord rec;
        bool have_candidate = false;
        ConfigPair candidate;
        ApplyResult applied = apply_mutation(current, mutation, constraint);
        if (std::holds_alternative<Rejection>(applied)) {
            rec.index = i;
            rec.mutation = mutation;
            rec.arch_after = current.arch;
            rec.hp_after = current.hp;
            rec.crashed = true;
            rec.seed = seed_i;
        } else {
            candidate = std::get<ConfigPair>(applied);
            auto violations = validate_config(candidate.arch, candidate.hp, params.track);
            if (!violations.empty()) {
                rec.index = i;
                rec.mutation = mutation;
                rec.arch_after = candidate.arch;
                rec.hp_after = candidate.hp;
                rec.crashed = true;
                rec.seed = seed_i;
            } else {
                have_candidate = true;
                rec = run_experiment(i, mutation, candidate.arch, candidate.hp, corpus, params.track,
                                     params.budget, seed_i, params.eval_batches);
            }
        }

        if (have_candidate && !rec.crashed && rec.val_bpb && *rec.val_bpb < best) {
            rec.kept = true;
            best = *rec.val_bpb;
            current = candidate;
        }

        log.records.push_back(rec);
        if (out.is_open()) {
            out << record_to_json(rec).dump() << "\n";
            out.flush();
            if (!out) throw io_error("failed writing run log: " + params.log_path);
        }
    }
    return log;
}

}  // namespace searchlab

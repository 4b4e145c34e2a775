// searchlab: desk-scale architecture-search laboratory.
//
// Subcommands: run, analyze, transfer, freeze, lengthmatch, innovations,
// sample-nas, gen-corpus. Every command that writes outputs also writes a
// manifest of its resolved settings next to them, so any result can be
// reproduced from the manifest plus the seed.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "searchlab/analysis.hpp"
#include "searchlab/config.hpp"
#include "searchlab/data.hpp"
#include "searchlab/kernels.hpp"
#include "searchlab/metrics.hpp"
#include "searchlab/search.hpp"
#include "searchlab/stats.hpp"
#include "searchlab/trainer.hpp"
#include "searchlab/util.hpp"

namespace fs = std::filesystem;
using namespace searchlab;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::trunc | std::ios::binary);
    if (!f) throw io_error("cannot write " + path);
    f << content;
    if (!f) throw io_error("failed writing " + path);
}

void write_manifest(const std::string& path, json settings) {
    write_file(path, settings.dump(2) + "\n");
}

TrackName track_name_from(const std::string& s) {
    if (s == "smiles_like") return TrackName::smiles_like;
    if (s == "protein_like") return TrackName::protein_like;
    if (s == "nlp_like") return TrackName::nlp_like;
    throw config_error("unknown track (expected smiles_like|protein_like|nlp_like): " + s);
}

// Synthetic corpus for a preset track, or a user corpus from --data.
Corpus build_corpus(const TrackConfig& track, const std::string& data_path, int lines,
                    std::uint64_t corpus_seed) {
    std::string text;
    if (!data_path.empty()) {
        text = read_file(data_path);
    } else {
        text = generate_synthetic_corpus(synthetic_kind_for(track.name), lines, corpus_seed);
    }
    return Corpus::build(text, track, corpus_seed);
}

struct CommonTrainFlags {
    std::string track = "smiles_like";
    std::string data_path;
    int corpus_lines = 3000;
    std::uint64_t corpus_seed = 7;
    std::int64_t steps = 200;
    double seconds = 0.0;
    std::uint64_t seed = 1;
    int eval_batches = 5;

    void attach(CLI::App* cmd) {
        cmd->add_option("--track", track, "Track preset (smiles_like|protein_like|nlp_like)");
        cmd->add_option("--data", data_path, "Corpus text file (default: synthetic corpus)");
        cmd->add_option("--corpus-lines", corpus_lines, "Synthetic corpus size in lines");
        cmd->add_option("--corpus-seed", corpus_seed, "Synthetic corpus / split seed");
        cmd->add_option("--steps", steps, "Training steps per experiment");
        cmd->add_option("--seconds", seconds, "Wall-clock budget per experiment (overrides --steps)");
        cmd->add_option("--seed", seed, "Master seed");
        cmd->add_option("--eval-batches", eval_batches, "Evaluation batches per val_bpb estimate");
    }

    Budget budget() const {
        Budget b;
        b.steps = steps;
        b.seconds = seconds;
        return b;
    }

    json manifest() const {
        return json{{"track", track},
                    {"data", data_path},
                    {"corpus_lines", corpus_lines},
                    {"corpus_seed", corpus_seed},
                    {"steps", steps},
                    {"seconds", seconds},
                    {"seed", seed},
                    {"eval_batches", eval_batches}};
    }
};

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

int cmd_run(const std::string& condition_str, const CommonTrainFlags& common,
            const std::string& config_path, const std::string& baseline_kind, int n_experiments,
            const std::string& proposer_spec, const std::string& run_id_flag,
            const std::string& out_path) {
    Condition condition = condition_from_string(condition_str);

    TrackConfig track;
    ArchConfig arch;
    HPConfig hp;
    if (!config_path.empty()) {
        LoadedConfig loaded = load_config_file(config_path);
        track = loaded.track;
        arch = loaded.arch;
        hp = loaded.hp;
    } else {
        track = TrackConfig::preset(track_name_from(common.track));
        arch = baseline_kind == "paper" ? ArchConfig::baseline(track.seq_len)
                                        : ArchConfig::desk_default(track.seq_len);
        hp = HPConfig::defaults_for(track.seq_len);
    }
    auto violations = validate_config(arch, hp, track);
    if (!violations.empty())
        throw config_error("starting config invalid: " + violations.front().field_path + ": " +
                           violations.front().message);

    Corpus corpus = build_corpus(track, common.data_path, common.corpus_lines, common.corpus_seed);

    std::string spec = proposer_spec;
    if (spec.empty()) {
        if (condition == Condition::random_nas)
            spec = "random";
        else if (condition != Condition::fixed_default)
            spec = "llm";
    }
    std::unique_ptr<Proposer> proposer;
    if (condition != Condition::fixed_default) {
        if (spec == "random") {
            proposer = std::make_unique<RandomNasProposer>(derive_seed(common.seed, 9001),
                                                           track.seq_len);
        } else if (spec.rfind("scripted:", 0) == 0) {
            json script = json::parse(read_file(spec.substr(9)));
            if (!script.is_array()) throw config_error("proposer script must be a JSON array");
            std::vector<ConfigMutation> mutations;
            for (const auto& item : script) mutations.push_back(mutation_from_json(item));
            proposer = std::make_unique<ScriptedProposer>(std::move(mutations));
        } else if (spec == "llm" || spec.rfind("llm:", 0) == 0) {
            proposer = make_llm_proposer_from_env(spec == "llm" ? "" : spec.substr(4));
        } else {
            throw config_error("unknown proposer (expected random|scripted:FILE|llm[:model]): " +
                               spec);
        }
    }

    SearchParams params;
    params.condition = condition;
    params.track = track;
    params.start = ConfigPair{arch, hp};
    params.n_experiments = n_experiments;
    params.budget = common.budget();
    params.seed = common.seed;
    params.run_id = run_id_flag.empty() ? condition_str + "-" + common.track + "-s" +
                                              std::to_string(common.seed)
                                        : run_id_flag;
    params.eval_batches = common.eval_batches;
    params.log_path = out_path;

    json manifest = common.manifest();
    manifest["command"] = "run";
    manifest["condition"] = condition_str;
    manifest["config"] = config_path;
    manifest["baseline"] = baseline_kind;
    manifest["n"] = n_experiments;
    manifest["proposer"] = spec;
    manifest["run_id"] = params.run_id;
    manifest["out"] = out_path;
    manifest["arch"] = arch_to_json(arch);
    manifest["hp"] = hp_to_json(hp);
    manifest["kernel_backend"] = kernels::active_name();
    write_manifest(out_path + ".manifest.json", manifest);

    RunLog log = run_search(params, corpus, proposer.get());

    BestSoFarCurve curve = best_so_far(log);
    KeepRate kr = keep_rate(log);
    std::cout << "baseline val_bpb: " << format_double(log.baseline_val_bpb, 6) << "\n";
    std::cout << "final best val_bpb: " << format_double(curve.final_value(), 6) << "\n";
    std::cout << "auc_oc: " << format_double(auc_oc(curve), 6) << "\n";
    std::cout << "keep rate: " << kr.kept << "/" << kr.eligible
              << (kr.degenerate ? " (degenerate)" : "") << "\n";
    std::cout << "log: " << out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

int cmd_analyze(const std::vector<std::string>& log_paths, const std::string& families_path,
                const std::string& out_dir, int bootstrap_resamples, int n_perm,
                std::uint64_t seed) {
    ReportInputs inputs;
    for (const std::string& path : log_paths) inputs.logs.push_back(load_runlog(path));
    if (!families_path.empty()) inputs.families = json::parse(read_file(families_path));
    inputs.bootstrap_resamples = bootstrap_resamples;
    inputs.n_perm = n_perm;
    inputs.seed = seed;

    json manifest{{"command", "analyze"},       {"logs", log_paths},
                  {"families", families_path},  {"out", out_dir},
                  {"bootstrap", bootstrap_resamples}, {"n_perm", n_perm},
                  {"seed", seed}};
    fs::create_directories(out_dir);
    write_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);

    ReportBundle bundle = generate_report(inputs, out_dir);
    for (const std::string& w : bundle.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "report written to " << out_dir << " (" << bundle.stats.size() << " tests, "
              << bundle.decomposition.size() << " decomposition rows, " << bundle.warnings.size()
              << " warnings)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// transfer / freeze / lengthmatch / innovations
// ---------------------------------------------------------------------------

ArchConfig arch_for_track(const TrackConfig& track, const std::string& log_path) {
    if (log_path.empty()) return ArchConfig::desk_default(track.seq_len);
    return final_config(load_runlog(log_path)).arch;
}

int cmd_transfer(const std::vector<std::string>& tracks, const std::vector<std::string>& logs,
                 const CommonTrainFlags& common, int parallel, const std::string& out_dir) {
    if (tracks.size() < 2) throw config_error("transfer needs at least two --tracks");
    if (!logs.empty() && logs.size() != tracks.size())
        throw config_error("--logs must match --tracks one-to-one");

    std::vector<Corpus> corpora;
    std::vector<TransferTrackInput> inputs;
    corpora.reserve(tracks.size());
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        TransferTrackInput in;
        in.name = tracks[i];
        in.track = TrackConfig::preset(track_name_from(tracks[i]));
        in.arch = arch_for_track(in.track, logs.empty() ? "" : logs[i]);
        in.hp = HPConfig::defaults_for(in.track.seq_len);
        corpora.push_back(build_corpus(in.track, "", common.corpus_lines,
                                       derive_seed(common.corpus_seed, i)));
        inputs.push_back(std::move(in));
    }
    for (std::size_t i = 0; i < inputs.size(); ++i) inputs[i].corpus = &corpora[i];

    json manifest = common.manifest();
    manifest["command"] = "transfer";
    manifest["tracks"] = tracks;
    manifest["logs"] = logs;
    manifest["parallel"] = parallel;
    manifest["out"] = out_dir;
    fs::create_directories(out_dir);
    write_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);

    std::vector<TransferCell> cells =
        transfer_matrix(inputs, common.budget(), common.seed, common.eval_batches, parallel);
    write_file((fs::path(out_dir) / "transfer.csv").string(), transfer_csv(cells));
    for (const TransferCell& c : cells) {
        std::cout << c.source_track << " -> " << c.target_track << ": ";
        if (c.crashed)
            std::cout << "crashed (" << c.crash_reason << ")\n";
        else
            std::cout << format_double(c.rel_change_pct, 4) << "%\n";
    }
    std::cout << "matrix written to " << (fs::path(out_dir) / "transfer.csv").string() << "\n";
    return 0;
}

int cmd_freeze(const std::string& source_track, const std::string& target_track,
               const std::string& source_log, const CommonTrainFlags& common, int parallel,
               const std::string& out_dir) {
    TrackConfig src = TrackConfig::preset(track_name_from(source_track));
    TrackConfig tgt = TrackConfig::preset(track_name_from(target_track));
    ArchConfig arch = arch_for_track(src, source_log);
    HPConfig src_hp = HPConfig::defaults_for(src.seq_len);
    HPConfig tgt_hp = HPConfig::defaults_for(tgt.seq_len);

    Corpus src_corpus = build_corpus(src, "", common.corpus_lines, derive_seed(common.corpus_seed, 0));
    Corpus tgt_corpus = build_corpus(tgt, "", common.corpus_lines, derive_seed(common.corpus_seed, 1));

    json manifest = common.manifest();
    manifest["command"] = "freeze";
    manifest["source_track"] = source_track;
    manifest["target_track"] = target_track;
    manifest["source_log"] = source_log;
    manifest["parallel"] = parallel;
    manifest["out"] = out_dir;
    fs::create_directories(out_dir);
    write_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);

    ModelParams source_params;
    TrainOutcome src_out = run_training(arch, src_hp, src_corpus, common.budget(),
                                        derive_seed(common.seed, 1), common.eval_batches,
                                        &source_params);
    if (src_out.crashed)
        throw config_error("source training crashed: " + src_out.crash_reason);
    std::cout << "source model trained on " << source_track
              << ", val_bpb = " << format_double(*src_out.val_bpb, 6) << "\n";

    std::vector<FreezeLevel> levels =
        layer_freeze_curve(source_params, tgt, tgt_corpus, tgt_hp, common.budget(),
                           derive_seed(common.seed, 2), common.eval_batches, parallel);
    write_file((fs::path(out_dir) / "freeze.csv").string(), freeze_csv(levels));
    for (const FreezeLevel& l : levels) {
        std::cout << "frozen " << l.frozen_blocks << ": ";
        if (l.crashed)
            std::cout << "crashed (" << l.crash_reason << ")\n";
        else
            std::cout << format_double(l.val_bpb, 6) << " bpb ("
                      << format_double(l.degradation_pct, 4) << "%)\n";
    }
    std::cout << "curve written to " << (fs::path(out_dir) / "freeze.csv").string() << "\n";
    return 0;
}

int cmd_lengthmatch(const std::string& track_str, const std::string& arch_log,
                    std::vector<int> lens, const CommonTrainFlags& common,
                    const std::string& out_dir) {
    TrackConfig track = TrackConfig::preset(track_name_from(track_str));
    ArchConfig arch = arch_for_track(track, arch_log);
    HPConfig hp = HPConfig::defaults_for(track.seq_len);
    Corpus corpus = build_corpus(track, common.data_path, common.corpus_lines, common.corpus_seed);
    if (lens.empty())
        lens = {std::max(2, track.seq_len / 4), std::max(2, track.seq_len / 2), track.seq_len};

    json manifest = common.manifest();
    manifest["command"] = "lengthmatch";
    manifest["arch_log"] = arch_log;
    manifest["lens"] = lens;
    manifest["out"] = out_dir;
    fs::create_directories(out_dir);
    write_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);

    std::vector<LengthMatchResult> results;
    for (int len : lens)
        results.push_back(length_match_eval(arch, hp, track, corpus, len, common.budget(),
                                            common.seed, common.eval_batches));
    write_file((fs::path(out_dir) / "lengthmatch.csv").string(), length_match_csv(results));
    for (const LengthMatchResult& r : results) {
        std::cout << "len " << r.truncated_len << ": ";
        if (r.crashed)
            std::cout << "crashed (" << r.crash_reason << ")\n";
        else
            std::cout << format_double(r.truncated_bpb, 6) << " bpb ("
                      << format_double(r.rel_change_pct, 4) << "% vs full)\n";
    }
    std::cout << "sweep written to " << (fs::path(out_dir) / "lengthmatch.csv").string() << "\n";
    return 0;
}

int cmd_innovations(const std::vector<std::string>& log_paths,
                    const std::vector<std::string>& tracks, const CommonTrainFlags& common,
                    int parallel, double p0, const std::string& out_dir) {
    if (log_paths.empty()) throw config_error("innovations needs at least one --logs run log");
    if (tracks.empty()) throw config_error("innovations needs at least one --tracks entry");

    std::vector<RunLog> logs;
    for (const std::string& path : log_paths) logs.push_back(load_runlog(path));
    std::vector<KeptMutation> kept = collect_kept_mutations(logs);

    std::vector<Corpus> corpora;
    std::vector<InnovationTrackInput> inputs;
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        InnovationTrackInput in;
        in.name = tracks[i];
        in.track = TrackConfig::preset(track_name_from(tracks[i]));
        in.baseline_arch = ArchConfig::desk_default(in.track.seq_len);
        in.hp = HPConfig::defaults_for(in.track.seq_len);
        corpora.push_back(build_corpus(in.track, "", common.corpus_lines,
                                       derive_seed(common.corpus_seed, i)));
        inputs.push_back(std::move(in));
    }
    for (std::size_t i = 0; i < inputs.size(); ++i) inputs[i].corpus = &corpora[i];

    json manifest = common.manifest();
    manifest["command"] = "innovations";
    manifest["logs"] = log_paths;
    manifest["tracks"] = tracks;
    manifest["parallel"] = parallel;
    manifest["p0"] = p0;
    manifest["out"] = out_dir;
    fs::create_directories(out_dir);
    write_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);

    InnovationSummary summary = classify_innovations(kept, inputs, common.budget(), common.seed,
                                                     common.eval_batches, parallel, p0);
    write_file((fs::path(out_dir) / "innovations.csv").string(), innovations_csv(summary));
    std::cout << "kept mutations: " << kept.size() << ", classified: " << summary.classified
              << ", universal: " << summary.universal << "\n";
    std::cout << "binomial upper-tail p (p0 = " << format_double(p0, 4)
              << "): " << format_double(summary.binomial.raw_p, 6) << "\n";
    std::cout << "table written to " << (fs::path(out_dir) / "innovations.csv").string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// sample-nas / gen-corpus
// ---------------------------------------------------------------------------

int cmd_sample_nas(int count, std::uint64_t seed, int seq_len, bool as_json) {
    for (int i = 0; i < count; ++i) {
        ArchConfig arch = sample_random_nas(derive_seed(seed, std::uint64_t(i)), seq_len);
        if (as_json)
            std::cout << arch_to_json(arch).dump() << "\n";
        else
            std::cout << arch_to_kv(arch) << "\n";
    }
    return 0;
}

int cmd_gen_corpus(const std::string& track_str, int lines, std::uint64_t seed,
                   const std::string& out_path) {
    TrackConfig track = TrackConfig::preset(track_name_from(track_str));
    std::string text = generate_synthetic_corpus(synthetic_kind_for(track.name), lines, seed);
    write_file(out_path, text);
    write_manifest(out_path + ".manifest.json",
                   json{{"command", "gen-corpus"},
                        {"track", track_str},
                        {"lines", lines},
                        {"seed", seed},
                        {"out", out_path},
                        {"bytes", text.size()}});
    std::cout << "wrote " << lines << " lines (" << text.size() << " bytes) to " << out_path
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale architecture-search laboratory"};
    app.require_subcommand(1);

    // --- run ---
    auto* run = app.add_subcommand("run", "Execute one search run under a condition");
    std::string run_condition;
    run->add_option("condition", run_condition,
                    "agent | random_nas | hp_only | fixed_default")
        ->required();
    CommonTrainFlags run_common;
    run_common.attach(run);
    std::string run_config, run_baseline = "desk", run_proposer, run_id, run_out = "run.jsonl";
    int run_n = 100;
    run->add_option("--config", run_config, "Key-value config file (track/arch/hp overrides)");
    run->add_option("--baseline", run_baseline, "Starting architecture scale: desk | paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    run->add_option("--n", run_n, "Number of experiments");
    run->add_option("--proposer", run_proposer, "random | scripted:FILE | llm[:model]");
    run->add_option("--run-id", run_id, "Run identifier (default derived from settings)");
    run->add_option("--out", run_out, "Run log path (JSONL)");

    // --- analyze ---
    auto* analyze = app.add_subcommand("analyze", "Build the full report bundle from run logs");
    std::vector<std::string> analyze_logs;
    std::string analyze_families, analyze_out = "report";
    int analyze_bootstrap = 2000, analyze_nperm = 2000;
    std::uint64_t analyze_seed = 1;
    analyze->add_option("logs", analyze_logs, "Run log files (JSONL)")->required()->expected(-1);
    analyze->add_option("--families", analyze_families,
                        "JSON file mapping family id -> list of test ids for Holm adjustment");
    analyze->add_option("--out", analyze_out, "Report directory");
    analyze->add_option("--bootstrap", analyze_bootstrap, "Bootstrap resamples");
    analyze->add_option("--n-perm", analyze_nperm, "Clustering permutations");
    analyze->add_option("--seed", analyze_seed, "Seed for bootstrap/permutation");

    // --- transfer ---
    auto* transfer = app.add_subcommand("transfer", "Cross-track architecture transfer matrix");
    std::vector<std::string> transfer_tracks, transfer_logs;
    CommonTrainFlags transfer_common;
    transfer_common.attach(transfer);
    int transfer_parallel = 1;
    std::string transfer_out = "transfer_out";
    transfer->add_option("--tracks", transfer_tracks, "Track presets")
        ->required()
        ->delimiter(',');
    transfer->add_option("--logs", transfer_logs,
                         "Per-track run logs providing each track's best architecture")
        ->delimiter(',');
    transfer->add_option("--parallel", transfer_parallel, "Concurrent training jobs");
    transfer->add_option("--out", transfer_out, "Output directory");

    // --- freeze ---
    auto* freeze = app.add_subcommand("freeze", "Layer-freezing transfer study");
    std::string freeze_source, freeze_target, freeze_log, freeze_out = "freeze_out";
    CommonTrainFlags freeze_common;
    freeze_common.attach(freeze);
    int freeze_parallel = 1;
    freeze->add_option("--source-track", freeze_source, "Track the source model trains on")
        ->required();
    freeze->add_option("--target-track", freeze_target, "Track to fine-tune on")->required();
    freeze->add_option("--source-log", freeze_log, "Run log providing the source architecture");
    freeze->add_option("--parallel", freeze_parallel, "Concurrent freeze levels");
    freeze->add_option("--out", freeze_out, "Output directory");

    // --- lengthmatch ---
    auto* lengthmatch =
        app.add_subcommand("lengthmatch", "Sequence-length truncation sensitivity sweep");
    std::string lm_log, lm_out = "lengthmatch_out";
    std::vector<int> lm_lens;
    CommonTrainFlags lm_common;
    lm_common.attach(lengthmatch);
    lengthmatch->add_option("--arch-log", lm_log, "Run log providing the architecture");
    lengthmatch->add_option("--lens", lm_lens, "Truncation lengths (default 1/4, 1/2, full)")
        ->delimiter(',');
    lengthmatch->add_option("--out", lm_out, "Output directory");

    // --- innovations ---
    auto* innovations =
        app.add_subcommand("innovations", "Classify kept mutations as universal or specific");
    std::vector<std::string> innov_logs, innov_tracks;
    CommonTrainFlags innov_common;
    innov_common.attach(innovations);
    int innov_parallel = 1;
    double innov_p0 = 0.35;
    std::string innov_out = "innovations_out";
    innovations->add_option("--logs", innov_logs, "Run logs to harvest kept mutations from")
        ->required()
        ->delimiter(',');
    innovations->add_option("--tracks", innov_tracks, "Tracks to test each mutation on")
        ->required()
        ->delimiter(',');
    innovations->add_option("--parallel", innov_parallel, "Concurrent training jobs");
    innovations->add_option("--p0", innov_p0, "Null universal rate for the binomial tail");
    innovations->add_option("--out", innov_out, "Output directory");

    // --- sample-nas ---
    auto* sample = app.add_subcommand("sample-nas", "Print random architecture samples");
    int sample_count = 5, sample_seq_len = 64;
    std::uint64_t sample_seed = 1;
    bool sample_json = false;
    sample->add_option("--count", sample_count, "Number of samples");
    sample->add_option("--seed", sample_seed, "Seed");
    sample->add_option("--seq-len", sample_seq_len, "Sequence length the samples target");
    sample->add_flag("--json", sample_json, "Emit JSON lines instead of key-value blocks");

    // --- gen-corpus ---
    auto* gen = app.add_subcommand("gen-corpus", "Write a synthetic corpus file");
    std::string gen_track = "smiles_like", gen_out = "corpus.txt";
    int gen_lines = 3000;
    std::uint64_t gen_seed = 7;
    gen->add_option("--track", gen_track, "Track preset");
    gen->add_option("--lines", gen_lines, "Number of corpus lines");
    gen->add_option("--seed", gen_seed, "Generator seed");
    gen->add_option("--out", gen_out, "Output text file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(run))
            return cmd_run(run_condition, run_common, run_config, run_baseline, run_n,
                           run_proposer, run_id, run_out);
        if (app.got_subcommand(analyze))
            return cmd_analyze(analyze_logs, analyze_families, analyze_out, analyze_bootstrap,
                               analyze_nperm, analyze_seed);
        if (app.got_subcommand(transfer))
            return cmd_transfer(transfer_tracks, transfer_logs, transfer_common, transfer_parallel,
                                transfer_out);
        if (app.got_subcommand(freeze))
            return cmd_freeze(freeze_source, freeze_target, freeze_log, freeze_common,
                              freeze_parallel, freeze_out);
        if (app.got_subcommand(lengthmatch))
            return cmd_lengthmatch(lm_common.track, lm_log, lm_lens, lm_common, lm_out);
        if (app.got_subcommand(innovations))
            return cmd_innovations(innov_logs, innov_tracks, innov_common, innov_parallel,
                                   innov_p0, innov_out);
        if (app.got_subcommand(sample))
            return cmd_sample_nas(sample_count, sample_seed, sample_seq_len, sample_json);
        if (app.got_subcommand(gen))
            return cmd_gen_corpus(gen_track, gen_lines, gen_seed, gen_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#include "searchlab/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "searchlab/util.hpp"

namespace searchlab {

namespace fs = std::filesystem;

void parallel_for(std::size_t n, int parallel, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    int k = std::max(1, parallel);
    k = int(std::min<std::size_t>(std::size_t(k), n));
    if (k == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto worker = [&]() {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) break;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(std::size_t(k));
    for (int t = 0; t < k; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Config replay and feature extraction
// ---------------------------------------------------------------------------

namespace {

// Applies raw field values onto a config pair, without constraint or
// old_value checks. Returns nothing if a field is unknown, un-parseable or
// the result fails validation against the track.
std::optional<ConfigPair> force_apply(const ConfigPair& base,
                                      const std::vector<FieldEdit>& edits,
                                      const TrackConfig& track) {
    json j = pair_to_json(base);
    for (const FieldEdit& e : edits) {
        if (is_arch_field(e.field_path) || is_hp_field(e.field_path))
            j[e.field_path] = e.new_value;
        else
            return std::nullopt;
    }
    ConfigPair out;
    try {
        out = pair_from_json(j);
    } catch (const std::exception&) {
        return std::nullopt;
    }
    if (!validate_config(out.arch, out.hp, track).empty()) return std::nullopt;
    return out;
}

}  // namespace

ConfigPair final_config(const RunLog& log) {
    for (auto it = log.records.rbegin(); it != log.records.rend(); ++it)
        if (it->kept) return ConfigPair{it->arch_after, it->hp_after};

    // Nothing kept: the run stayed on its starting config. Recover it by
    // rewinding any completed experiment's edits through their old_values.
    for (const ExperimentRecord& rec : log.records) {
        if (rec.crashed) continue;
        json j = pair_to_json(ConfigPair{rec.arch_after, rec.hp_after});
        for (const FieldEdit& e : rec.mutation.edits) {
            if (is_arch_field(e.field_path) || is_hp_field(e.field_path))
                j[e.field_path] = e.old_value;
            else
                throw config_error("run log edit touches unknown field: " + e.field_path);
        }
        return pair_from_json(j);
    }
    throw config_error("run log has no successful experiments: " + log.run_id);
}

std::vector<std::string> feature_schema_numeric() {
    return {"depth",        "width",          "heads",     "kv_heads", "ffn_mult",
            "lr_embedding", "lr_unembedding", "lr_matrix", "lr_scalar"};
}

std::vector<std::string> feature_schema_categorical() {
    return {"activation", "attention_pattern", "value_embeddings", "weight_tying"};
}

FeatureVector extract_features(const RunLog& log) {
    ConfigPair best = final_config(log);
    FeatureVector v;
    v.numeric = {double(best.arch.depth),  double(best.arch.width), double(best.arch.heads),
                 double(best.arch.kv_heads), best.arch.ffn_mult,    best.hp.lr_embedding,
                 best.hp.lr_unembedding,   best.hp.lr_matrix,       best.hp.lr_scalar};
    v.categorical = {to_string(best.arch.activation), to_string(best.arch.attention_pattern),
                     to_string(best.arch.value_embeddings),
                     best.arch.weight_tying ? "tied" : "untied"};
    v.label = log.track;
    return v;
}

// ---------------------------------------------------------------------------
// Transfer matrix
// ---------------------------------------------------------------------------

std::vector<TransferCell> transfer_matrix(const std::vector<TransferTrackInput>& tracks,
                                          const Budget& budget, std::uint64_t seed,
                                          int eval_batches, int parallel) {
    if (tracks.size() < 2) throw config_error("transfer_matrix requires at least two tracks");
    const std::size_t n = tracks.size();
    for (const auto& t : tracks)
        if (!t.corpus) throw config_error("transfer_matrix: track without corpus: " + t.name);

    // All n*n cells are independent training jobs; job (s, t) trains source
    // s's architecture on target t's data with target t's hyperparameters.
    std::vector<TrainOutcome> outcomes(n * n);
    parallel_for(n * n, parallel, [&](std::size_t job) {
        std::size_t s = job / n, t = job % n;
        outcomes[job] = run_training(tracks[s].arch, tracks[t].hp, *tracks[t].corpus, budget,
                                     derive_seed(seed, job), eval_batches);
    });

    std::vector<TransferCell> cells;
    cells.reserve(n * n);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t t = 0; t < n; ++t) {
            const TrainOutcome& native = outcomes[t * n + t];
            const TrainOutcome& cell_out = outcomes[s * n + t];
            TransferCell cell;
            cell.source_track = tracks[s].name;
            cell.target_track = tracks[t].name;
            if (native.crashed || !native.val_bpb) {
                cell.crashed = true;
                cell.crash_reason = "native run crashed: " + native.crash_reason;
            } else if (cell_out.crashed || !cell_out.val_bpb) {
                cell.crashed = true;
                cell.crash_reason = cell_out.crash_reason;
                cell.native_bpb = *native.val_bpb;
            } else {
                cell.native_bpb = *native.val_bpb;
                cell.transfer_bpb = *cell_out.val_bpb;
                cell.rel_change_pct = s == t ? 0.0
                                             : (cell.transfer_bpb - cell.native_bpb) /
                                                   cell.native_bpb * 100.0;
            }
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

std::string transfer_csv(const std::vector<TransferCell>& cells) {
    std::ostringstream out;
    out << "source_track,target_track,native_bpb,transfer_bpb,rel_change_pct,crashed\n";
    for (const TransferCell& c : cells) {
        out << c.source_track << "," << c.target_track << "," << format_double(c.native_bpb)
            << "," << format_double(c.transfer_bpb) << "," << format_double(c.rel_change_pct)
            << "," << (c.crashed ? 1 : 0) << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Layer freezing
// ---------------------------------------------------------------------------

std::vector<FreezeLevel> layer_freeze_curve(const ModelParams& source, const TrackConfig& target,
                                            const Corpus& target_corpus, const HPConfig& hp,
                                            const Budget& budget, std::uint64_t seed,
                                            int eval_batches, int parallel) {
    const ArchConfig& arch = source.arch;
    const int depth = arch.depth;
    const int target_vocab = target_corpus.tokenizer.vocab_size();
    if (target.vocab_size != target_vocab)
        throw config_error("target track vocab does not match the target corpus");

    // Warm start: fresh embeddings sized for the target vocabulary, all
    // transformer-block tensors and the final gain copied from the source.
    ModelParams warm = ModelParams::init(arch, target_vocab, derive_seed(seed, 11));
    for (const TensorSpec& spec : warm.layout.tensors) {
        bool copy = spec.name.rfind("layers.", 0) == 0 || spec.name == "final_gain";
        if (!copy) continue;
        if (!source.layout.has(spec.name))
            throw config_error("source model lacks tensor " + spec.name);
        const TensorSpec& src_spec = source.layout.at(spec.name);
        if (src_spec.rows != spec.rows || src_spec.cols != spec.cols)
            throw config_error("source/target shape mismatch for " + spec.name);
        std::copy(source.data.begin() + long(src_spec.offset),
                  source.data.begin() + long(src_spec.offset + src_spec.size()),
                  warm.data.begin() + long(spec.offset));
    }

    std::vector<FreezeLevel> levels(std::size_t(depth) + 1);
    parallel_for(levels.size(), parallel, [&](std::size_t k) {
        // Freeze the k deepest blocks: layers depth-k .. depth-1.
        TrainControls controls;
        controls.warm_start = &warm;
        for (const TensorSpec& spec : warm.layout.tensors) {
            if (spec.name.rfind("layers.", 0) != 0) continue;
            int layer = std::stoi(spec.name.substr(7));
            if (layer >= depth - int(k)) controls.frozen_tensors.push_back(spec.name);
        }
        TrainOutcome out = run_training(arch, hp, target_corpus, budget, derive_seed(seed, 7),
                                        eval_batches, nullptr, controls);
        FreezeLevel& level = levels[k];
        level.frozen_blocks = int(k);
        level.crashed = out.crashed || !out.val_bpb;
        level.crash_reason = out.crash_reason;
        if (out.val_bpb) level.val_bpb = *out.val_bpb;
    });

    if (!levels[0].crashed && levels[0].val_bpb != 0.0) {
        for (FreezeLevel& level : levels)
            if (!level.crashed)
                level.degradation_pct = (level.val_bpb - levels[0].val_bpb) / levels[0].val_bpb * 100.0;
    }
    return levels;
}

std::string freeze_csv(const std::vector<FreezeLevel>& levels) {
    std::ostringstream out;
    out << "frozen_blocks,val_bpb,degradation_pct,crashed\n";
    for (const FreezeLevel& l : levels)
        out << l.frozen_blocks << "," << format_double(l.val_bpb) << ","
            << format_double(l.degradation_pct) << "," << (l.crashed ? 1 : 0) << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Length matching
// ---------------------------------------------------------------------------

LengthMatchResult length_match_eval(const ArchConfig& source_arch, const HPConfig& hp,
                                    const TrackConfig& target, const Corpus& target_corpus,
                                    int truncated_len, const Budget& budget, std::uint64_t seed,
                                    int eval_batches) {
    if (truncated_len < 2) throw config_error("truncated_len must be >= 2");
    if (truncated_len > target.seq_len)
        throw config_error("truncated_len exceeds the target sequence length");

    auto run_at = [&](const Corpus& corpus) {
        HPConfig h = hp;
        h.total_batch_tokens =
            std::int64_t(h.device_batch_seqs) * corpus.seq_len * h.grad_accum_steps;
        return run_training(source_arch, h, corpus, budget, derive_seed(seed, 21), eval_batches);
    };

    TrainOutcome full = run_at(target_corpus);
    Corpus truncated = target_corpus;
    truncated.seq_len = truncated_len;
    TrainOutcome trunc = run_at(truncated);

    LengthMatchResult res;
    res.truncated_len = truncated_len;
    if (full.crashed || !full.val_bpb || trunc.crashed || !trunc.val_bpb) {
        res.crashed = true;
        res.crash_reason = full.crashed ? full.crash_reason : trunc.crash_reason;
        return res;
    }
    res.full_bpb = *full.val_bpb;
    res.truncated_bpb = *trunc.val_bpb;
    res.rel_change_pct = (res.truncated_bpb - res.full_bpb) / res.full_bpb * 100.0;
    return res;
}

std::string length_match_csv(const std::vector<LengthMatchResult>& results) {
    std::ostringstream out;
    out << "truncated_len,full_bpb,truncated_bpb,rel_change_pct,crashed\n";
    for (const LengthMatchResult& r : results)
        out << r.truncated_len << "," << format_double(r.full_bpb) << ","
            << format_double(r.truncated_bpb) << "," << format_double(r.rel_change_pct) << ","
            << (r.crashed ? 1 : 0) << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Innovation classification
// ---------------------------------------------------------------------------

std::vector<KeptMutation> collect_kept_mutations(const std::vector<RunLog>& logs) {
    std::vector<KeptMutation> out;
    for (const RunLog& log : logs)
        for (const ExperimentRecord& rec : log.records)
            if (rec.kept) out.push_back(KeptMutation{rec.mutation, log.run_id, log.track});
    return out;
}

InnovationSummary classify_innovations(const std::vector<KeptMutation>& kept,
                                       const std::vector<InnovationTrackInput>& tracks,
                                       const Budget& budget, std::uint64_t seed, int eval_batches,
                                       int parallel, double universal_p0) {
    if (tracks.empty()) throw config_error("classify_innovations requires at least one track");
    for (const auto& t : tracks)
        if (!t.corpus) throw config_error("classify_innovations: track without corpus: " + t.name);

    const std::size_t n_tracks = tracks.size();
    InnovationSummary summary;
    summary.innovations.reserve(kept.size());

    // Resolve every (innovation, track) candidate config up front.
    std::vector<std::vector<std::optional<ConfigPair>>> candidates(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
        Innovation innov;
        innov.source = kept[i];
        candidates[i].resize(n_tracks);
        for (std::size_t t = 0; t < n_tracks; ++t) {
            ConfigPair base{tracks[t].baseline_arch, tracks[t].hp};
            candidates[i][t] = force_apply(base, kept[i].mutation.edits, tracks[t].track);
            if (!candidates[i][t]) innov.applicable = false;
        }
        summary.innovations.push_back(std::move(innov));
    }

    // Training jobs: one baseline per track, then one cell per applicable
    // innovation per track. Cells share the baseline's seed so a no-op
    // mutation reproduces the baseline exactly.
    struct Job {
        std::size_t innovation;  // SIZE_MAX for a baseline job
        std::size_t track;
    };
    std::vector<Job> jobs;
    for (std::size_t t = 0; t < n_tracks; ++t) jobs.push_back({SIZE_MAX, t});
    for (std::size_t i = 0; i < kept.size(); ++i)
        if (summary.innovations[i].applicable)
            for (std::size_t t = 0; t < n_tracks; ++t) jobs.push_back({i, t});

    std::vector<TrainOutcome> results(jobs.size());
    parallel_for(jobs.size(), parallel, [&](std::size_t j) {
        const Job& job = jobs[j];
        std::uint64_t job_seed = derive_seed(seed, job.track);
        if (job.innovation == SIZE_MAX) {
            results[j] = run_training(tracks[job.track].baseline_arch, tracks[job.track].hp,
                                      *tracks[job.track].corpus, budget, job_seed, eval_batches);
        } else {
            const ConfigPair& cfg = *candidates[job.innovation][job.track];
            results[j] = run_training(cfg.arch, cfg.hp, *tracks[job.track].corpus, budget,
                                      job_seed, eval_batches);
        }
    });

    std::vector<const TrainOutcome*> baseline(n_tracks, nullptr);
    for (std::size_t j = 0; j < jobs.size(); ++j)
        if (jobs[j].innovation == SIZE_MAX) baseline[jobs[j].track] = &results[j];

    for (std::size_t j = 0; j < jobs.size(); ++j) {
        const Job& job = jobs[j];
        if (job.innovation == SIZE_MAX) continue;
        Innovation& innov = summary.innovations[job.innovation];
        InnovationOutcome outcome;
        outcome.track = tracks[job.track].name;
        const TrainOutcome& base = *baseline[job.track];
        const TrainOutcome& cell = results[j];
        if (base.crashed || !base.val_bpb || cell.crashed || !cell.val_bpb) {
            outcome.crashed = true;
            outcome.degradation_pct = std::numeric_limits<double>::infinity();
        } else {
            outcome.baseline_bpb = *base.val_bpb;
            outcome.modified_bpb = *cell.val_bpb;
            outcome.degradation_pct =
                (outcome.modified_bpb - outcome.baseline_bpb) / outcome.baseline_bpb * 100.0;
        }
        innov.outcomes.push_back(std::move(outcome));
    }

    for (Innovation& innov : summary.innovations) {
        if (!innov.applicable) continue;
        ++summary.classified;
        bool universal = true;
        for (const InnovationOutcome& o : innov.outcomes)
            if (o.crashed || !(o.degradation_pct < 1.0)) universal = false;
        innov.universal = universal;
        if (universal) ++summary.universal;
    }

    summary.binomial.test = "binomial_universality";
    summary.binomial.statistic = double(summary.universal);
    summary.binomial.n_a = summary.universal;
    summary.binomial.n_b = summary.classified;
    summary.binomial.raw_p =
        summary.classified > 0
            ? binomial_tail(summary.universal, summary.classified, universal_p0)
            : 1.0;
    return summary;
}

std::string innovations_csv(const InnovationSummary& summary) {
    std::ostringstream out;
    out << "origin_run,origin_track,edits,applicable,universal,track,degradation_pct,crashed\n";
    for (const Innovation& innov : summary.innovations) {
        std::string edits;
        for (std::size_t i = 0; i < innov.source.mutation.edits.size(); ++i) {
            const FieldEdit& e = innov.source.mutation.edits[i];
            if (i) edits += ";";
            edits += e.field_path + ":" + e.old_value.dump() + ">" + e.new_value.dump();
        }
        if (innov.outcomes.empty()) {
            out << innov.source.origin_run_id << "," << innov.source.origin_track << "," << edits
                << "," << (innov.applicable ? 1 : 0) << "," << (innov.universal ? 1 : 0)
                << ",,,\n";
            continue;
        }
        for (const InnovationOutcome& o : innov.outcomes) {
            out << innov.source.origin_run_id << "," << innov.source.origin_track << "," << edits
                << "," << (innov.applicable ? 1 : 0) << "," << (innov.universal ? 1 : 0) << ","
                << o.track << "," << format_double(o.degradation_pct) << ","
                << (o.crashed ? 1 : 0) << "\n";
        }
    }
    out << "# universal " << summary.universal << " of " << summary.classified
        << " classified; binomial upper-tail p vs 0.35 = " << format_double(summary.binomial.raw_p)
        << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Technique classification
// ---------------------------------------------------------------------------

namespace {

double num(const json& v) {
    if (v.is_number()) return v.get<double>();
    return std::numeric_limits<double>::quiet_NaN();
}

bool any_edit(const std::vector<ConfigMutation>& kept,
              const std::function<bool(const FieldEdit&)>& pred) {
    for (const ConfigMutation& m : kept)
        for (const FieldEdit& e : m.edits)
            if (pred(e)) return true;
    return false;
}

}  // namespace

const std::vector<TechniqueRule>& default_technique_rules() {
    static const std::vector<TechniqueRule> rules = {
        {"local_attention",
         [](const std::vector<ConfigMutation>& kept) {
             return any_edit(kept,
                             [](const FieldEdit& e) {
                                 return e.field_path == "attention_pattern" &&
                                        e.new_value == json("windowed") &&
                                        e.old_value != json("windowed");
                             }) ||
                    any_edit(kept, [](const FieldEdit& e) {
                        return e.field_path == "window_size" && num(e.new_value) < num(e.old_value);
                    });
         }},
        {"width_reduction",
         [](const std::vector<ConfigMutation>& kept) {
             return any_edit(kept, [](const FieldEdit& e) {
                 return e.field_path == "width" && num(e.new_value) < num(e.old_value);
             });
         }},
        {"positional_change",
         [](const std::vector<ConfigMutation>& kept) {
             return any_edit(kept, [](const FieldEdit& e) {
                 return e.field_path == "positional" && e.new_value != e.old_value;
             });
         }},
        {"depth_width_rebalance",
         [](const std::vector<ConfigMutation>& kept) {
             bool depth_up = false, depth_down = false, width_up = false, width_down = false;
             for (const ConfigMutation& m : kept) {
                 for (const FieldEdit& e : m.edits) {
                     if (e.field_path == "depth") {
                         if (num(e.new_value) > num(e.old_value)) depth_up = true;
                         if (num(e.new_value) < num(e.old_value)) depth_down = true;
                     } else if (e.field_path == "width") {
                         if (num(e.new_value) > num(e.old_value)) width_up = true;
                         if (num(e.new_value) < num(e.old_value)) width_down = true;
                     }
                 }
             }
             return (depth_up && width_down) || (depth_down && width_up);
         }},
        {"regularization_increase",
         [](const std::vector<ConfigMutation>& kept) {
             return any_edit(kept, [](const FieldEdit& e) {
                 return e.field_path == "weight_decay" && num(e.new_value) > num(e.old_value);
             });
         }},
    };
    return rules;
}

std::vector<std::pair<std::string, bool>> classify_techniques(
    const RunLog& log, const std::vector<TechniqueRule>& rules) {
    std::vector<ConfigMutation> kept;
    for (const ExperimentRecord& rec : log.records)
        if (rec.kept) kept.push_back(rec.mutation);
    std::vector<std::pair<std::string, bool>> out;
    out.reserve(rules.size());
    for (const TechniqueRule& rule : rules) out.emplace_back(rule.name, rule.matches(kept));
    return out;
}

// ---------------------------------------------------------------------------
// Report bundle
// ---------------------------------------------------------------------------

namespace {

struct RunMetrics {
    const RunLog* log;
    BestSoFarCurve curve;
    double auc = 0.0;
    KeepRate keep;
    int crashed_count = 0;
};

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::trunc | std::ios::binary);
    if (!f) throw io_error("cannot write " + path.string());
    f << content;
    if (!f) throw io_error("failed writing " + path.string());
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        out += c;
    }
    out += "\"";
    return out;
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::vector<std::string>& names,
                           const std::vector<std::vector<double>>& series, int width, int height) {
    static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                     "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    const int margin_left = 64, margin_right = 16, margin_top = 36, margin_bottom = 32;
    const double plot_w = width - margin_left - margin_right;
    const double plot_h = height - margin_top - margin_bottom;

    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::size_t max_len = 0;
    for (const auto& s : series) {
        max_len = std::max(max_len, s.size());
        for (double v : s) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!std::isfinite(lo)) {
        lo = 0.0;
        hi = 1.0;
    }
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
    double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    auto sx = [&](std::size_t i) {
        double frac = max_len > 1 ? double(i) / double(max_len - 1) : 0.5;
        return margin_left + frac * plot_w;
    };
    auto sy = [&](double v) { return margin_top + (hi - v) / (hi - lo) * plot_h; };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << width << " " << height
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << margin_left << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n";
    out << "<line x1=\"" << margin_left << "\" y1=\"" << margin_top << "\" x2=\"" << margin_left
        << "\" y2=\"" << (margin_top + int(plot_h)) << "\" stroke=\"#333\"/>\n";
    out << "<line x1=\"" << margin_left << "\" y1=\"" << (margin_top + int(plot_h)) << "\" x2=\""
        << (margin_left + int(plot_w)) << "\" y2=\"" << (margin_top + int(plot_h))
        << "\" stroke=\"#333\"/>\n";
    out << "<text x=\"4\" y=\"" << (margin_top + 4) << "\">" << format_double(hi, 6)
        << "</text>\n";
    out << "<text x=\"4\" y=\"" << (margin_top + int(plot_h)) << "\">" << format_double(lo, 6)
        << "</text>\n";
    out << "<text x=\"" << (margin_left + int(plot_w) - 8) << "\" y=\""
        << (margin_top + int(plot_h) + 14) << "\">" << max_len << "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        if (series[s].empty()) continue;
        const char* color = kPalette[s % 8];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < series[s].size(); ++i) {
            if (i) out << " ";
            out << format_double(sx(i), 8) << "," << format_double(sy(series[s][i]), 8);
        }
        out << "\"/>\n";
        if (s < names.size())
            out << "<text x=\"" << (margin_left + 8) << "\" y=\""
                << (margin_top + 14 + 13 * int(s)) << "\" fill=\"" << color << "\">" << names[s]
                << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

ReportBundle generate_report(const ReportInputs& inputs, const std::string& out_dir) {
    ReportBundle bundle;
    fs::create_directories(fs::path(out_dir) / "tables");
    fs::create_directories(fs::path(out_dir) / "figures");

    // Per-run metrics, grouped by track then condition.
    std::map<std::string, std::map<Condition, std::vector<RunMetrics>>> by_track;
    for (const RunLog& log : inputs.logs) {
        RunMetrics m;
        m.log = &log;
        m.curve = best_so_far(log);
        m.auc = auc_oc(m.curve);
        m.keep = keep_rate(log);
        for (const ExperimentRecord& rec : log.records)
            if (rec.crashed) ++m.crashed_count;
        by_track[log.track][log.condition].push_back(std::move(m));
    }

    // tables/per_run.csv
    {
        std::ostringstream csv;
        csv << "track,condition,run_id,seed,n_experiments,baseline_val_bpb,best_val_bpb,auc_oc,"
               "kept,eligible,keep_rate,crashed\n";
        for (const auto& [track, conds] : by_track) {
            for (const auto& [cond, runs] : conds) {
                for (const RunMetrics& m : runs) {
                    csv << track << "," << to_string(cond) << "," << csv_escape(m.log->run_id)
                        << "," << m.log->seed << "," << m.log->n_experiments << ","
                        << format_double(m.log->baseline_val_bpb) << ","
                        << format_double(m.curve.final_value()) << "," << format_double(m.auc)
                        << "," << m.keep.kept << "," << m.keep.eligible << ","
                        << format_double(m.keep.rate) << "," << m.crashed_count << "\n";
                }
            }
        }
        write_file(fs::path(out_dir) / "tables" / "per_run.csv", csv.str());
    }

    // tables/decomposition.csv
    for (const auto& [track, conds] : by_track) {
        bool have_all = conds.count(Condition::fixed_default) && conds.count(Condition::hp_only) &&
                        conds.count(Condition::agent);
        if (!have_all) {
            bundle.warnings.push_back("decomposition skipped for " + track +
                                      ": needs fixed_default, hp_only and agent runs");
            continue;
        }
        double fixed_sum = 0.0;
        for (const RunMetrics& m : conds.at(Condition::fixed_default))
            fixed_sum += m.curve.final_value();
        double fixed = fixed_sum / double(conds.at(Condition::fixed_default).size());
        std::vector<double> hp_runs, agent_runs;
        for (const RunMetrics& m : conds.at(Condition::hp_only))
            hp_runs.push_back(m.curve.final_value());
        for (const RunMetrics& m : conds.at(Condition::agent))
            agent_runs.push_back(m.curve.final_value());
        bundle.decomposition.push_back(decompose(track, fixed, hp_runs, agent_runs));
    }
    write_file(fs::path(out_dir) / "tables" / "decomposition.csv",
               decomposition_csv(bundle.decomposition));

    // tables/auc_comparison.csv
    {
        std::ostringstream csv;
        csv << "track,condition,n_runs,mean_auc,sd_auc,mean_best_bpb\n";
        for (const auto& [track, conds] : by_track) {
            for (const auto& [cond, runs] : conds) {
                double sum = 0.0, sum_bpb = 0.0;
                for (const RunMetrics& m : runs) {
                    sum += m.auc;
                    sum_bpb += m.curve.final_value();
                }
                double mean = sum / double(runs.size());
                double sq = 0.0;
                for (const RunMetrics& m : runs) sq += (m.auc - mean) * (m.auc - mean);
                double sd = runs.size() > 1 ? std::sqrt(sq / double(runs.size() - 1)) : 0.0;
                csv << track << "," << to_string(cond) << "," << runs.size() << ","
                    << format_double(mean) << "," << format_double(sd) << ","
                    << format_double(sum_bpb / double(runs.size())) << "\n";
            }
        }
        write_file(fs::path(out_dir) / "tables" / "auc_comparison.csv", csv.str());
    }

    // Pairwise AUC statistics: agent vs every other condition, per track.
    std::vector<StatReport> stats;
    for (const auto& [track, conds] : by_track) {
        if (!conds.count(Condition::agent)) {
            bundle.warnings.push_back("no agent runs for " + track + "; comparisons skipped");
            continue;
        }
        std::vector<double> agent_auc;
        int agent_kept = 0, agent_eligible = 0;
        for (const RunMetrics& m : conds.at(Condition::agent)) {
            agent_auc.push_back(m.auc);
            agent_kept += m.keep.kept;
            agent_eligible += m.keep.eligible;
        }
        for (const auto& [cond, runs] : conds) {
            if (cond == Condition::agent) continue;
            std::vector<double> other_auc;
            int other_kept = 0, other_eligible = 0;
            for (const RunMetrics& m : runs) {
                other_auc.push_back(m.auc);
                other_kept += m.keep.kept;
                other_eligible += m.keep.eligible;
            }
            std::string suffix = ".auc." + track + ".agent_vs_" + to_string(cond);
            if (agent_auc.size() < 2 || other_auc.size() < 2) {
                bundle.warnings.push_back("insufficient-n for " + track + " agent vs " +
                                          to_string(cond) + " (needs >= 2 runs per group)");
            } else {
                StatReport w = welch_t(agent_auc, other_auc);
                w.test = "welch_t" + suffix;
                try {
                    w.effect_size = cohens_d(agent_auc, other_auc);
                } catch (const config_error&) {
                }
                stats.push_back(w);
                StatReport u = mann_whitney_u(agent_auc, other_auc);
                u.test = "mann_whitney_u" + suffix;
                stats.push_back(u);
                StatReport b = bootstrap_ci(agent_auc, other_auc, inputs.bootstrap_resamples,
                                            derive_seed(inputs.seed, 31));
                b.test = "bootstrap" + suffix;
                stats.push_back(b);
            }
            if (agent_eligible > 0 && other_eligible > 0 && cond != Condition::fixed_default) {
                StatReport f = fisher_exact(agent_kept, agent_eligible - agent_kept, other_kept,
                                            other_eligible - other_kept);
                f.test = "fisher_exact.keep." + track + ".agent_vs_" + to_string(cond);
                stats.push_back(f);
            }
        }
    }

    // Clustering permutation test over agent-run features.
    {
        std::vector<FeatureVector> features;
        std::vector<std::string> ids;
        for (const auto& [track, conds] : by_track) {
            if (!conds.count(Condition::agent)) continue;
            for (const RunMetrics& m : conds.at(Condition::agent)) {
                try {
                    features.push_back(extract_features(*m.log));
                    ids.push_back(m.log->run_id);
                } catch (const config_error& e) {
                    bundle.warnings.push_back(std::string("feature extraction skipped: ") +
                                              e.what());
                }
            }
        }
        std::map<std::string, int> label_counts;
        for (const FeatureVector& f : features) ++label_counts[f.label];
        bool enough = label_counts.size() >= 2;
        for (const auto& [label, count] : label_counts)
            if (count < 2) enough = false;
        if (enough) {
            try {
                Matrix d = gower_matrix(features);
                std::vector<std::string> labels;
                for (const FeatureVector& f : features) labels.push_back(f.label);
                StatReport c = permutation_cluster_test(d, labels, inputs.n_perm,
                                                        derive_seed(inputs.seed, 77));
                c.test = "permutation_cluster.features";
                stats.push_back(c);
                std::ostringstream csv;
                csv << "run_id";
                for (const std::string& id : ids) csv << "," << csv_escape(id);
                csv << "\n";
                for (std::size_t i = 0; i < ids.size(); ++i) {
                    csv << csv_escape(ids[i]);
                    for (std::size_t j = 0; j < ids.size(); ++j)
                        csv << "," << format_double(d(i, j));
                    csv << "\n";
                }
                write_file(fs::path(out_dir) / "tables" / "feature_distances.csv", csv.str());
            } catch (const config_error& e) {
                bundle.warnings.push_back(std::string("clustering test skipped: ") + e.what());
            }
        } else {
            bundle.warnings.push_back(
                "clustering test skipped: needs >= 2 agent runs on each of >= 2 tracks");
        }
    }

    for (const StatReport& s : inputs.extra_stats) stats.push_back(s);

    // Holm adjustment within user-supplied families.
    if (inputs.families.is_object()) {
        for (const auto& [family, members] : inputs.families.items()) {
            if (!members.is_array()) throw config_error("family must map to an array of test ids");
            std::vector<std::size_t> idx;
            for (const auto& member : members) {
                const std::string id = member.get<std::string>();
                bool found = false;
                for (std::size_t i = 0; i < stats.size(); ++i) {
                    if (stats[i].test == id) {
                        idx.push_back(i);
                        found = true;
                        break;
                    }
                }
                if (!found)
                    bundle.warnings.push_back("family " + family + ": no test named " + id);
            }
            if (idx.empty()) continue;
            std::vector<double> raw;
            for (std::size_t i : idx) raw.push_back(stats[i].raw_p);
            std::vector<double> adj = holm_bonferroni(raw);
            for (std::size_t k = 0; k < idx.size(); ++k) {
                stats[idx[k]].adjusted_p = adj[k];
                stats[idx[k]].family = family;
            }
        }
    }

    write_file(fs::path(out_dir) / "tables" / "stats.csv", stat_report_csv(stats));
    bundle.stats = stats;

    if (!inputs.transfer.empty())
        write_file(fs::path(out_dir) / "tables" / "transfer.csv", transfer_csv(inputs.transfer));

    // figures/best_so_far_<track>.svg
    for (const auto& [track, conds] : by_track) {
        std::vector<std::string> names;
        std::vector<std::vector<double>> series;
        for (const auto& [cond, runs] : conds) {
            for (const RunMetrics& m : runs) {
                names.push_back(to_string(cond) + ":" + m.log->run_id);
                series.push_back(m.curve.values);
            }
        }
        write_file(fs::path(out_dir) / "figures" / ("best_so_far_" + track + ".svg"),
                   svg_line_chart("best-so-far val_bpb: " + track, names, series));
    }

    // report.md
    {
        std::ostringstream md;
        md << "# Search run report\n\n";
        if (inputs.logs.empty()) {
            md << "No run logs were supplied; this bundle is an empty skeleton.\n";
        } else {
            md << "Runs analyzed: " << inputs.logs.size() << " across " << by_track.size()
               << " track(s).\n\n";
            md << "## Decomposition\n\n";
            if (bundle.decomposition.empty()) {
                md << "(not computable; see warnings)\n\n";
            } else {
                md << "| track | total improvement (bpb) | HP share | arch share |\n";
                md << "|---|---|---|---|\n";
                for (const DecompositionResult& d : bundle.decomposition) {
                    md << "| " << d.track << " | " << format_double(d.total_improvement, 4)
                       << " | " << format_double(std::round(d.hp_pct), 3) << "% | "
                       << format_double(std::round(d.arch_pct), 3) << "% |\n";
                }
                md << "\n";
            }
            md << "## Tables\n\n"
               << "- tables/per_run.csv\n"
               << "- tables/auc_comparison.csv\n"
               << "- tables/decomposition.csv\n"
               << "- tables/stats.csv\n";
            if (!inputs.transfer.empty()) md << "- tables/transfer.csv\n";
            md << "\n## Figures\n\n";
            for (const auto& [track, conds] : by_track)
                md << "- figures/best_so_far_" << track << ".svg\n";
        }
        if (!bundle.warnings.empty()) {
            md << "\n## Warnings\n\n";
            for (const std::string& w : bundle.warnings) md << "- " << w << "\n";
        }
        write_file(fs::path(out_dir) / "report.md", md.str());
    }

    return bundle;
}

}  // namespace searchlab

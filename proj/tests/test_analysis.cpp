#include <doctest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "searchlab/analysis.hpp"
#include "searchlab/util.hpp"

using namespace searchlab;
namespace fsys = std::filesystem;

namespace {

ConfigPair small_pair(int seq_len, int depth = 2, int width = 16) {
    ConfigPair p;
    p.arch = ArchConfig::desk_default(seq_len);
    p.arch.depth = depth;
    p.arch.width = width;
    p.arch.heads = 2;
    p.arch.kv_heads = 2;
    p.hp = HPConfig::defaults_for(seq_len, 4);
    return p;
}

ConfigMutation edit1(const std::string& path, json oldv, json newv) {
    ConfigMutation m;
    m.edits.push_back({path, std::move(oldv), std::move(newv)});
    m.rationale = path;
    return m;
}

struct TwoTracks {
    TrackConfig smiles, protein;
    Corpus smiles_corpus, protein_corpus;
    Budget budget;

    TwoTracks() {
        smiles = TrackConfig::preset(TrackName::smiles_like);
        smiles.seq_len = 32;
        protein = TrackConfig::preset(TrackName::protein_like);
        protein.seq_len = 32;
        smiles_corpus =
            Corpus::build(generate_synthetic_corpus(SyntheticKind::smiles_like, 50, 5), smiles, 5);
        protein_corpus = Corpus::build(
            generate_synthetic_corpus(SyntheticKind::protein_like, 50, 6), protein, 6);
        budget.steps = 2;
    }
};

std::string slurp(const fsys::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// A plausible hand-built run log (no training involved).
RunLog synth_log(const std::string& track, Condition cond, const std::string& run_id,
                 double baseline, std::vector<double> vals, int kept_depth) {
    RunLog log;
    log.condition = cond;
    log.track = track;
    log.run_id = run_id;
    log.seed = 1;
    log.n_experiments = int(vals.size());
    log.baseline_val_bpb = baseline;
    log.proposer = "scripted";
    ConfigPair cfg = small_pair(64, 4, 64);
    double best = baseline;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        ExperimentRecord r;
        r.index = int(i) + 1;
        r.mutation = edit1("depth", json(cfg.arch.depth), json(kept_depth));
        r.val_bpb = vals[i];
        if (vals[i] < best) {
            r.kept = true;
            best = vals[i];
            cfg.arch.depth = kept_depth;
        }
        r.arch_after = cfg.arch;
        r.hp_after = cfg.hp;
        r.seed = 10 + i;
        log.records.push_back(r);
    }
    return log;
}

}  // namespace

TEST_CASE("final_config returns the last kept state or rewinds to the start") {
    ConfigPair start = small_pair(64, 4, 64);

    RunLog log;
    log.run_id = "fc";
    ExperimentRecord r1;
    r1.index = 1;
    r1.mutation = edit1("depth", json(4), json(5));
    r1.arch_after = start.arch;
    r1.arch_after.depth = 5;
    r1.hp_after = start.hp;
    r1.val_bpb = 1.0;
    r1.kept = true;
    ExperimentRecord r2 = r1;
    r2.index = 2;
    r2.mutation = edit1("lr_matrix", json(start.hp.lr_matrix), json(0.5));
    r2.hp_after.lr_matrix = 0.5;
    r2.val_bpb = 0.9;
    log.records = {r1, r2};

    ConfigPair fin = final_config(log);
    CHECK(fin.arch.depth == 5);
    CHECK(fin.hp.lr_matrix == 0.5);

    // nothing kept: rewind the first completed record through its old_values
    RunLog none;
    none.run_id = "fc2";
    ExperimentRecord crash;
    crash.index = 1;
    crash.crashed = true;
    crash.mutation = edit1("depth", json(4), json(50));
    ExperimentRecord tried;
    tried.index = 2;
    tried.mutation = edit1("depth", json(4), json(5));
    tried.arch_after = start.arch;
    tried.arch_after.depth = 5;
    tried.hp_after = start.hp;
    tried.val_bpb = 2.0;
    tried.kept = false;
    none.records = {crash, tried};
    ConfigPair rewound = final_config(none);
    CHECK(rewound.arch.depth == 4);
    CHECK(rewound == start);

    RunLog empty;
    empty.run_id = "fc3";
    empty.records = {crash};
    CHECK_THROWS_AS((void)final_config(empty), config_error);
}

TEST_CASE("feature extraction follows the fixed schema") {
    CHECK(feature_schema_numeric().size() == 9);
    CHECK(feature_schema_categorical().size() == 4);

    RunLog log = synth_log("alpha", Condition::agent, "a1", 2.0, {1.9, 1.8}, 6);
    FeatureVector v = extract_features(log);
    CHECK(v.numeric.size() == 9);
    CHECK(v.categorical.size() == 4);
    CHECK(v.label == "alpha");
    CHECK(v.numeric[0] == 6.0);   // depth after the kept edits
    CHECK(v.numeric[1] == 64.0);  // width
    CHECK(v.categorical[3] == "untied");
}

TEST_CASE("transfer matrix isolates architecture and poisons crashed columns") {
    TwoTracks fx;
    ConfigPair a = small_pair(32, 2, 16), b = small_pair(32, 3, 16);

    std::vector<TransferTrackInput> tracks(2);
    tracks[0] = {"alpha", fx.smiles, a.arch, a.hp, &fx.smiles_corpus};
    tracks[1] = {"beta", fx.protein, b.arch, b.hp, &fx.protein_corpus};

    std::vector<TransferCell> cells = transfer_matrix(tracks, fx.budget, 31, 2);
    REQUIRE(cells.size() == 4);
    auto cell = [&](const std::string& s, const std::string& t) -> const TransferCell& {
        for (const TransferCell& c : cells)
            if (c.source_track == s && c.target_track == t) return c;
        REQUIRE(false);
        return cells[0];
    };
    CHECK(cell("alpha", "alpha").rel_change_pct == 0.0);
    CHECK(cell("beta", "beta").rel_change_pct == 0.0);
    CHECK(cell("alpha", "alpha").native_bpb == cell("alpha", "alpha").transfer_bpb);
    // same-column cells share the native reference
    CHECK(cell("beta", "alpha").native_bpb == cell("alpha", "alpha").native_bpb);
    const TransferCell& off = cell("beta", "alpha");
    CHECK(!off.crashed);
    CHECK(off.rel_change_pct ==
          doctest::Approx((off.transfer_bpb - off.native_bpb) / off.native_bpb * 100.0));

    // parallel execution changes nothing
    std::vector<TransferCell> par = transfer_matrix(tracks, fx.budget, 31, 2, 2);
    REQUIRE(par.size() == cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        CHECK(par[i].native_bpb == cells[i].native_bpb);
        CHECK(par[i].transfer_bpb == cells[i].transfer_bpb);
    }

    // a diverging native run poisons its whole target column
    // (huge decoupled weight decay overflows the AdamW groups within a few steps)
    std::vector<TransferTrackInput> poisoned = tracks;
    HPConfig hot = b.hp;
    hot.weight_decay = 1e200;
    poisoned[1].hp = hot;
    std::vector<TransferCell> pc = transfer_matrix(poisoned, fx.budget, 31, 2);
    for (const TransferCell& c : pc) {
        if (c.target_track == "beta") {
            CHECK(c.crashed);
            CHECK(c.crash_reason.rfind("native run crashed:", 0) == 0);
        } else {
            CHECK(!c.crashed);
        }
    }

    std::string csv = transfer_csv(cells);
    CHECK(csv.rfind("source_track,target_track,native_bpb,transfer_bpb,rel_change_pct,crashed\n",
                    0) == 0);

    CHECK_THROWS_AS((void)transfer_matrix({tracks[0]}, fx.budget, 31, 2), config_error);
}

TEST_CASE("layer freeze curve") {
    TwoTracks fx;
    ConfigPair src = small_pair(32, 2, 16);
    ModelParams trained;
    Budget pre;
    pre.steps = 3;
    TrainOutcome out =
        run_training(src.arch, src.hp, fx.smiles_corpus, pre, 77, 2, &trained);
    REQUIRE(!out.crashed);

    std::vector<FreezeLevel> levels = layer_freeze_curve(trained, fx.protein, fx.protein_corpus,
                                                         src.hp, fx.budget, 13, 2);
    REQUIRE(levels.size() == std::size_t(src.arch.depth) + 1);
    for (std::size_t k = 0; k < levels.size(); ++k) {
        CHECK(levels[k].frozen_blocks == int(k));
        CHECK(!levels[k].crashed);
        CHECK(levels[k].val_bpb > 0.0);
        CHECK(levels[k].degradation_pct ==
              doctest::Approx((levels[k].val_bpb - levels[0].val_bpb) / levels[0].val_bpb *
                              100.0));
    }
    CHECK(levels[0].degradation_pct == 0.0);

    // same seeds -> bitwise repeatable
    std::vector<FreezeLevel> again = layer_freeze_curve(trained, fx.protein, fx.protein_corpus,
                                                        src.hp, fx.budget, 13, 2);
    for (std::size_t k = 0; k < levels.size(); ++k)
        CHECK(again[k].val_bpb == levels[k].val_bpb);

    // vocab mismatch between track and corpus is rejected
    TrackConfig wrong = fx.protein;
    wrong.vocab_size += 1;
    CHECK_THROWS_AS(
        (void)layer_freeze_curve(trained, wrong, fx.protein_corpus, src.hp, fx.budget, 13, 2),
        config_error);

    std::string csv = freeze_csv(levels);
    CHECK(csv.rfind("frozen_blocks,val_bpb,degradation_pct,crashed\n", 0) == 0);
}

TEST_CASE("length matching") {
    TwoTracks fx;
    ConfigPair cfg = small_pair(32, 2, 16);

    // matching the native length is a controlled no-op
    LengthMatchResult same =
        length_match_eval(cfg.arch, cfg.hp, fx.smiles, fx.smiles_corpus, 32, fx.budget, 21, 2);
    CHECK(!same.crashed);
    CHECK(same.full_bpb == same.truncated_bpb);
    CHECK(same.rel_change_pct == 0.0);

    LengthMatchResult cut =
        length_match_eval(cfg.arch, cfg.hp, fx.smiles, fx.smiles_corpus, 16, fx.budget, 21, 2);
    CHECK(!cut.crashed);
    CHECK(cut.truncated_len == 16);
    CHECK(cut.full_bpb == same.full_bpb);  // shared seed stream
    CHECK(cut.rel_change_pct ==
          doctest::Approx((cut.truncated_bpb - cut.full_bpb) / cut.full_bpb * 100.0));

    CHECK_THROWS_AS((void)length_match_eval(cfg.arch, cfg.hp, fx.smiles, fx.smiles_corpus, 1,
                                            fx.budget, 21, 2),
                    config_error);
    CHECK_THROWS_AS((void)length_match_eval(cfg.arch, cfg.hp, fx.smiles, fx.smiles_corpus, 33,
                                            fx.budget, 21, 2),
                    config_error);

    std::string csv = length_match_csv({same, cut});
    CHECK(csv.rfind("truncated_len,full_bpb,truncated_bpb,rel_change_pct,crashed\n", 0) == 0);
}

TEST_CASE("kept mutations are collected with their origin") {
    RunLog a = synth_log("alpha", Condition::agent, "a1", 2.0, {1.9, 2.5, 1.8}, 6);
    RunLog b = synth_log("beta", Condition::agent, "b1", 2.0, {2.5}, 6);
    std::vector<KeptMutation> kept = collect_kept_mutations({a, b});
    REQUIRE(kept.size() == 2);  // two keeps in a, none in b
    CHECK(kept[0].origin_run_id == "a1");
    CHECK(kept[0].origin_track == "alpha");
    CHECK(!kept[0].mutation.edits.empty());
}

TEST_CASE("innovation classification: no-op, divergent, inapplicable") {
    TwoTracks fx;
    ConfigPair a = small_pair(32, 2, 16), b = small_pair(32, 3, 16);
    std::vector<InnovationTrackInput> tracks(2);
    tracks[0] = {"alpha", fx.smiles, a.arch, a.hp, &fx.smiles_corpus};
    tracks[1] = {"beta", fx.protein, b.arch, b.hp, &fx.protein_corpus};

    KeptMutation noop;  // force-applies to the baseline itself
    noop.origin_run_id = "r0";
    noop.origin_track = "alpha";
    KeptMutation divergent;  // huge decoupled weight decay overflows within two steps
    divergent.mutation = edit1("weight_decay", json(0.2), json(1e200));
    divergent.origin_run_id = "r1";
    divergent.origin_track = "alpha";
    KeptMutation invalid;  // 16 % 5 != 0 on every baseline
    invalid.mutation = edit1("heads", json(2), json(5));
    invalid.origin_run_id = "r2";
    invalid.origin_track = "beta";

    InnovationSummary s =
        classify_innovations({noop, divergent, invalid}, tracks, fx.budget, 97, 2);
    REQUIRE(s.innovations.size() == 3);

    const Innovation& i0 = s.innovations[0];
    CHECK(i0.applicable);
    CHECK(i0.universal);
    REQUIRE(i0.outcomes.size() == 2);
    for (const InnovationOutcome& o : i0.outcomes) {
        CHECK(!o.crashed);
        // cells share the track baseline's seed, so a no-op reproduces it exactly
        CHECK(o.degradation_pct == 0.0);
        CHECK(o.modified_bpb == o.baseline_bpb);
    }

    const Innovation& i1 = s.innovations[1];
    CHECK(i1.applicable);  // the config is valid; it only fails at training time
    CHECK(!i1.universal);
    REQUIRE(i1.outcomes.size() == 2);
    for (const InnovationOutcome& o : i1.outcomes) {
        CHECK(o.crashed);
        CHECK(std::isinf(o.degradation_pct));
    }

    const Innovation& i2 = s.innovations[2];
    CHECK(!i2.applicable);
    CHECK(!i2.universal);
    CHECK(i2.outcomes.empty());  // excluded from training entirely

    CHECK(s.classified == 2);
    CHECK(s.universal == 1);
    CHECK(s.binomial.raw_p == doctest::Approx(binomial_tail(1, 2, 0.35)).epsilon(1e-12));

    std::string csv = innovations_csv(s);
    CHECK(csv.rfind("origin_run,origin_track,edits,applicable,universal,track,degradation_pct,"
                    "crashed\n",
                    0) == 0);
    CHECK(csv.find("# universal 1 of 2") != std::string::npos);
}

TEST_CASE("technique rules trigger on kept mutations only") {
    const std::vector<TechniqueRule>& rules = default_technique_rules();
    REQUIRE(rules.size() == 5);
    std::set<std::string> names;
    for (const TechniqueRule& r : rules) names.insert(r.name);
    CHECK(names == std::set<std::string>{"local_attention", "width_reduction",
                                         "positional_change", "depth_width_rebalance",
                                         "regularization_increase"});

    auto log_with = [](std::vector<ConfigMutation> kept_muts,
                       std::vector<ConfigMutation> rejected) {
        RunLog log;
        int idx = 1;
        for (ConfigMutation& m : kept_muts) {
            ExperimentRecord r;
            r.index = idx++;
            r.mutation = std::move(m);
            r.kept = true;
            r.val_bpb = 1.0;
            log.records.push_back(r);
        }
        for (ConfigMutation& m : rejected) {
            ExperimentRecord r;
            r.index = idx++;
            r.mutation = std::move(m);
            r.kept = false;
            r.val_bpb = 2.0;
            log.records.push_back(r);
        }
        return log;
    };
    auto matched = [&](const RunLog& log, const std::string& name) {
        for (const auto& [n, hit] : classify_techniques(log)) {
            if (n == name) return hit;
        }
        REQUIRE(false);
        return false;
    };

    RunLog windowed = log_with({edit1("attention_pattern", json("full"), json("windowed"))}, {});
    CHECK(matched(windowed, "local_attention"));
    RunLog shrunk_window = log_with({edit1("window_size", json(64), json(16))}, {});
    CHECK(matched(shrunk_window, "local_attention"));

    RunLog narrower = log_with({edit1("width", json(256), json(128))}, {});
    CHECK(matched(narrower, "width_reduction"));
    CHECK(!matched(narrower, "depth_width_rebalance"));

    RunLog pos = log_with({edit1("positional", json("rope"), json("none"))}, {});
    CHECK(matched(pos, "positional_change"));

    // depth up + width down across separate kept steps
    RunLog rebalance = log_with({edit1("depth", json(4), json(6)), edit1("width", json(256), json(192))}, {});
    CHECK(matched(rebalance, "depth_width_rebalance"));
    CHECK(matched(rebalance, "width_reduction"));

    RunLog reg = log_with({edit1("weight_decay", json(0.0), json(0.1))}, {});
    CHECK(matched(reg, "regularization_increase"));

    // the same edits, but never kept: nothing triggers
    RunLog ignored = log_with({}, {edit1("attention_pattern", json("full"), json("windowed")),
                                   edit1("weight_decay", json(0.0), json(0.1))});
    for (const auto& [n, hit] : classify_techniques(ignored)) CHECK(!hit);
}

TEST_CASE("report bundle is deterministic and complete") {
    std::vector<RunLog> logs;
    for (const char* track : {"alpha", "beta"}) {
        double base = track[0] == 'a' ? 2.0 : 3.0;
        logs.push_back(synth_log(track, Condition::agent, std::string(track) + "_ag1", base,
                                 {base - 0.1, base - 0.15}, 5));
        logs.push_back(synth_log(track, Condition::agent, std::string(track) + "_ag2", base,
                                 {base + 0.1, base - 0.12}, 6));
        logs.push_back(synth_log(track, Condition::hp_only, std::string(track) + "_hp1", base,
                                 {base - 0.02, base - 0.05}, 4));
        logs.push_back(synth_log(track, Condition::hp_only, std::string(track) + "_hp2", base,
                                 {base - 0.04, base + 0.2}, 4));
        logs.push_back(
            synth_log(track, Condition::fixed_default, std::string(track) + "_fx", base, {}, 4));
    }

    ReportInputs inputs;
    inputs.logs = logs;
    inputs.bootstrap_resamples = 50;
    inputs.n_perm = 50;
    inputs.seed = 3;
    inputs.families = json{{"primary", json::array({"welch_t.auc.alpha.agent_vs_hp_only",
                                                    "mann_whitney_u.auc.alpha.agent_vs_hp_only"})},
                           {"ghost", json::array({"no_such_test"})}};

    fsys::path dir1 = "/tmp/searchlab_report_a", dir2 = "/tmp/searchlab_report_b";
    fsys::remove_all(dir1);
    fsys::remove_all(dir2);
    ReportBundle b1 = generate_report(inputs, dir1.string());
    ReportBundle b2 = generate_report(inputs, dir2.string());

    // every artifact exists and reruns byte-identically
    std::vector<std::string> files = {"tables/per_run.csv",       "tables/auc_comparison.csv",
                                      "tables/decomposition.csv", "tables/stats.csv",
                                      "tables/feature_distances.csv",
                                      "figures/best_so_far_alpha.svg",
                                      "figures/best_so_far_beta.svg", "report.md"};
    for (const std::string& f : files) {
        CAPTURE(f);
        REQUIRE(fsys::exists(dir1 / f));
        CHECK(slurp(dir1 / f) == slurp(dir2 / f));
    }

    // decomposition for both tracks; stats carry the Holm family annotations
    CHECK(b1.decomposition.size() == 2);
    bool saw_family = false, saw_cluster = false;
    for (const StatReport& s : b1.stats) {
        if (s.family == "primary") {
            saw_family = true;
            CHECK(s.adjusted_p.has_value());
            CHECK(*s.adjusted_p >= s.raw_p);
        }
        if (s.test == "permutation_cluster.features") saw_cluster = true;
    }
    CHECK(saw_family);
    CHECK(saw_cluster);

    // fixed_default has a single run per track: comparisons degrade to a warning
    bool warned_n = false, warned_ghost = false;
    for (const std::string& w : b1.warnings) {
        if (w.find("insufficient-n") != std::string::npos) warned_n = true;
        if (w.find("no test named no_such_test") != std::string::npos) warned_ghost = true;
    }
    CHECK(warned_n);
    CHECK(warned_ghost);

    std::string report = slurp(dir1 / "report.md");
    CHECK(report.find("# Search run report") != std::string::npos);
    CHECK(report.find("## Decomposition") != std::string::npos);

    // agent-only input: decomposition degrades to warnings, never throws
    ReportInputs partial;
    partial.logs = {logs[0], logs[1]};
    partial.bootstrap_resamples = 50;
    partial.n_perm = 50;
    fsys::path dir3 = "/tmp/searchlab_report_c";
    fsys::remove_all(dir3);
    ReportBundle b3 = generate_report(partial, dir3.string());
    CHECK(b3.decomposition.empty());
    bool warned_missing = false;
    for (const std::string& w : b3.warnings)
        if (w.find("decomposition skipped") != std::string::npos) warned_missing = true;
    CHECK(warned_missing);

    fsys::remove_all(dir1);
    fsys::remove_all(dir2);
    fsys::remove_all(dir3);
}

TEST_CASE("svg line chart") {
    std::string svg = svg_line_chart("title", {"s1", "s2"}, {{1.0, 2.0, 3.0}, {3.0, 2.0, 1.0}});
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("polyline") != std::string::npos);
    CHECK(svg.find(">s1<") != std::string::npos);
    CHECK(svg.find(">s2<") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);

    // degenerate inputs still render
    CHECK(svg_line_chart("empty", {}, {}).rfind("<svg", 0) == 0);
    CHECK(svg_line_chart("flat", {"c"}, {{2.0, 2.0}}).find("polyline") != std::string::npos);
}

TEST_CASE("parallel_for runs every job and propagates exceptions") {
    std::vector<std::atomic<int>> hits(17);
    parallel_for(17, 3, [&](std::size_t i) { hits[i].fetch_add(1); });
    for (const auto& h : hits) CHECK(h.load() == 1);

    std::vector<std::atomic<int>> serial_hits(5);
    parallel_for(5, 1, [&](std::size_t i) { serial_hits[i].fetch_add(1); });
    for (const auto& h : serial_hits) CHECK(h.load() == 1);

    CHECK_THROWS_AS(parallel_for(8, 4,
                                 [](std::size_t i) {
                                     if (i == 5) throw config_error("boom");
                                 }),
                    config_error);
}

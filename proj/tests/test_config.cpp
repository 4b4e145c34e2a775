#include <doctest.h>

#include <set>

#include "searchlab/config.hpp"
#include "searchlab/util.hpp"

using namespace searchlab;

TEST_CASE("reference and desk architectures carry the documented defaults") {
    ArchConfig ref = ArchConfig::baseline(256);
    CHECK(ref.depth == 6);
    CHECK(ref.width == 320);
    CHECK(ref.heads == 5);
    CHECK(ref.kv_heads == 5);
    CHECK(ref.ffn_mult == 5.0);
    CHECK(ref.activation == Activation::relu_squared);
    CHECK(ref.attention_pattern == AttentionPattern::windowed);
    CHECK(ref.window_cycle == std::vector<WindowTag>{WindowTag::short_window,
                                                     WindowTag::short_window,
                                                     WindowTag::short_window,
                                                     WindowTag::long_window});
    CHECK(ref.window_size == 64);  // quarter of the sequence length
    CHECK(ref.value_embeddings == ValueEmbeddings::alternating);
    CHECK(!ref.weight_tying);

    ArchConfig desk = ArchConfig::desk_default(64);
    CHECK(desk.depth == 4);
    CHECK(desk.width == 64);
    CHECK(desk.heads == 4);
    CHECK(desk.window_size == 16);

    HPConfig hp = HPConfig::defaults_for(64);
    CHECK(hp.lr_embedding == 0.6);
    CHECK(hp.lr_unembedding == 0.004);
    CHECK(hp.lr_matrix == 0.04);
    CHECK(hp.lr_scalar == 0.5);
    CHECK(hp.weight_decay == 0.2);
    CHECK(hp.adam_beta1 == 0.8);
    CHECK(hp.adam_beta2 == 0.95);
    CHECK(hp.warmdown_ratio == 0.5);
    CHECK(hp.total_batch_tokens == 8 * 64);
}

TEST_CASE("track presets") {
    TrackConfig s = TrackConfig::preset(TrackName::smiles_like);
    CHECK(s.vocab_size == 37);
    CHECK(s.seq_len == 64);
    CHECK(s.tokenizer == TokenizerKind::chr);

    TrackConfig p = TrackConfig::preset(TrackName::protein_like);
    CHECK(p.vocab_size == 24);
    CHECK(p.seq_len == 64);

    TrackConfig n = TrackConfig::preset(TrackName::nlp_like);
    CHECK(n.vocab_size == 512);
    CHECK(n.seq_len == 128);
    CHECK(n.tokenizer == TokenizerKind::bpe);
    CHECK(n.split_fraction == 0.9);
}

TEST_CASE("json round trips preserve configs and mutations") {
    ArchConfig a = ArchConfig::baseline(64);
    a.activation = Activation::swiglu;
    a.value_embeddings = ValueEmbeddings::every_layer;
    a.weight_tying = true;
    a.window_cycle = {WindowTag::long_window, WindowTag::short_window};
    CHECK(arch_from_json(arch_to_json(a)) == a);

    HPConfig h = HPConfig::defaults_for(64);
    h.lr_matrix = 0.123;
    h.grad_accum_steps = 2;
    h.total_batch_tokens = 2 * 8 * 64;
    CHECK(hp_from_json(hp_to_json(h)) == h);

    ConfigPair pair{a, h};
    CHECK(pair_from_json(pair_to_json(pair)) == pair);

    ConfigMutation m;
    m.edits.push_back({"depth", json(6), json(4)});
    m.edits.push_back({"activation", json("relu_squared"), json("gelu")});
    m.rationale = "try shallower with gelu";
    ConfigMutation back = mutation_from_json(mutation_to_json(m));
    CHECK(back.rationale == m.rationale);
    REQUIRE(back.edits.size() == 2);
    CHECK(back.edits[0].field_path == "depth");
    CHECK(back.edits[1].new_value == json("gelu"));
}

TEST_CASE("validate_config flags each invariant") {
    TrackConfig track = TrackConfig::preset(TrackName::smiles_like);
    ArchConfig a = ArchConfig::desk_default(track.seq_len);
    HPConfig h = HPConfig::defaults_for(track.seq_len);
    CHECK(validate_config(a, h, track).empty());

    auto violates = [&](auto mutate, const std::string& field) {
        ArchConfig am = a;
        HPConfig hm = h;
        mutate(am, hm);
        auto v = validate_config(am, hm, track);
        for (const auto& viol : v)
            if (viol.field_path == field) return true;
        return false;
    };

    CHECK(violates([](ArchConfig& am, HPConfig&) { am.depth = 0; }, "depth"));
    CHECK(violates([](ArchConfig& am, HPConfig&) { am.heads = 3; }, "heads"));  // 64 % 3
    CHECK(violates([](ArchConfig& am, HPConfig&) { am.kv_heads = 3; }, "kv_heads"));
    CHECK(violates([](ArchConfig& am, HPConfig&) { am.window_size = 0; }, "window_size"));
    CHECK(violates([](ArchConfig& am, HPConfig&) { am.window_cycle.clear(); }, "window_cycle"));
    // rope needs an even head_dim: width 32 / heads 32 -> head_dim 1
    CHECK(violates(
        [](ArchConfig& am, HPConfig&) {
            am.width = 32;
            am.heads = 32;
            am.kv_heads = 32;
        },
        "width"));
    CHECK(violates([](ArchConfig& am, HPConfig&) { am.ffn_mult = 0.0; }, "ffn_mult"));
    CHECK(violates([](ArchConfig&, HPConfig& hm) { hm.lr_matrix = 0.0; }, "lr_matrix"));
    CHECK(violates([](ArchConfig&, HPConfig& hm) { hm.weight_decay = -0.1; }, "weight_decay"));
    CHECK(violates([](ArchConfig&, HPConfig& hm) { hm.adam_beta1 = 1.0; }, "adam_beta1"));
    CHECK(violates([](ArchConfig&, HPConfig& hm) { hm.warmdown_ratio = 1.5; }, "warmdown_ratio"));
    CHECK(violates([](ArchConfig&, HPConfig& hm) { hm.total_batch_tokens += 1; },
                   "total_batch_tokens"));
    CHECK(violates([](ArchConfig&, HPConfig& hm) { hm.device_batch_seqs = 0; },
                   "device_batch_seqs"));
}

TEST_CASE("per-condition constraints") {
    SearchConstraint agent = SearchConstraint::for_condition(Condition::agent);
    SearchConstraint nas = SearchConstraint::for_condition(Condition::random_nas);
    SearchConstraint hp = SearchConstraint::for_condition(Condition::hp_only);
    SearchConstraint fixed = SearchConstraint::for_condition(Condition::fixed_default);

    CHECK(agent.allows("depth"));
    CHECK(agent.allows("lr_matrix"));
    CHECK(nas.mutable_fields == std::set<std::string>{"depth", "width", "heads", "kv_heads",
                                                      "activation", "attention_pattern",
                                                      "window_cycle", "window_size"});
    for (const auto& f : arch_field_names()) CHECK(!hp.allows(f));
    for (const auto& f : hp_field_names()) CHECK(hp.allows(f));
    CHECK(fixed.mutable_fields.empty());
}

TEST_CASE("apply_mutation accepts valid edits and names rejections") {
    TrackConfig track = TrackConfig::preset(TrackName::smiles_like);
    ConfigPair cur{ArchConfig::desk_default(track.seq_len), HPConfig::defaults_for(track.seq_len)};
    SearchConstraint agent = SearchConstraint::for_condition(Condition::agent);
    SearchConstraint hp_only = SearchConstraint::for_condition(Condition::hp_only);

    ConfigMutation ok;
    ok.edits.push_back({"depth", json(4), json(3)});
    auto res = apply_mutation(cur, ok, agent);
    REQUIRE(std::holds_alternative<ConfigPair>(res));
    CHECK(std::get<ConfigPair>(res).arch.depth == 3);
    CHECK(cur.arch.depth == 4);  // inputs untouched

    ConfigMutation arch_under_hp;
    arch_under_hp.edits.push_back({"depth", json(4), json(3)});
    auto rej1 = apply_mutation(cur, arch_under_hp, hp_only);
    REQUIRE(std::holds_alternative<Rejection>(rej1));
    CHECK(std::get<Rejection>(rej1).kind == RejectionKind::constraint_violation);
    CHECK(std::get<Rejection>(rej1).field_path == "depth");

    ConfigMutation stale;
    stale.edits.push_back({"depth", json(6), json(3)});
    auto rej2 = apply_mutation(cur, stale, agent);
    REQUIRE(std::holds_alternative<Rejection>(rej2));
    CHECK(std::get<Rejection>(rej2).kind == RejectionKind::stale_old_value);

    ConfigMutation unknown;
    unknown.edits.push_back({"n_layers", json(4), json(3)});
    auto rej3 = apply_mutation(cur, unknown, agent);
    REQUIRE(std::holds_alternative<Rejection>(rej3));

    ConfigMutation dup;
    dup.edits.push_back({"depth", json(4), json(3)});
    dup.edits.push_back({"depth", json(3), json(2)});
    auto rej4 = apply_mutation(cur, dup, agent);
    REQUIRE(std::holds_alternative<Rejection>(rej4));
    CHECK(std::get<Rejection>(rej4).kind == RejectionKind::invalid_value);

    ConfigMutation bad_type;
    bad_type.edits.push_back({"depth", json(4), json("deep")});
    auto rej5 = apply_mutation(cur, bad_type, agent);
    REQUIRE(std::holds_alternative<Rejection>(rej5));
    CHECK(std::get<Rejection>(rej5).kind == RejectionKind::invalid_value);
}

TEST_CASE("diff_configs produces a mutation that replays the change") {
    ConfigPair a{ArchConfig::desk_default(64), HPConfig::defaults_for(64)};
    ConfigPair b = a;
    b.arch.depth = 2;
    b.arch.activation = Activation::silu;
    b.hp.lr_matrix = 0.08;

    ConfigMutation d = diff_configs(a, b);
    CHECK(d.edits.size() == 3);
    auto res = apply_mutation(a, d, SearchConstraint::for_condition(Condition::agent));
    REQUIRE(std::holds_alternative<ConfigPair>(res));
    CHECK(std::get<ConfigPair>(res) == b);
    CHECK(diff_configs(a, a).empty());
}

TEST_CASE("random NAS samples stay inside the documented space and validate") {
    TrackConfig track = TrackConfig::preset(TrackName::smiles_like);
    bool saw_full = false, saw_windowed = false;
    std::set<int> widths, depths;
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        ArchConfig a = sample_random_nas(seed, track.seq_len);
        CHECK(a.depth >= 3);
        CHECK(a.depth <= 8);
        CHECK(a.width >= 128);
        CHECK(a.width <= 512);
        CHECK(a.width % 32 == 0);
        CHECK(a.heads >= 2);
        CHECK(a.heads <= 8);
        CHECK(a.width % a.heads == 0);
        CHECK(a.kv_heads == a.heads);
        CHECK((a.activation == Activation::relu || a.activation == Activation::gelu ||
               a.activation == Activation::silu || a.activation == Activation::relu_squared));
        saw_full = saw_full || a.attention_pattern == AttentionPattern::full;
        saw_windowed = saw_windowed || a.attention_pattern == AttentionPattern::windowed;
        widths.insert(a.width);
        depths.insert(a.depth);
        CHECK(validate_config(a, HPConfig::defaults_for(track.seq_len), track).empty());
        // deterministic in the seed
        CHECK(sample_random_nas(seed, track.seq_len) == a);
    }
    CHECK(saw_full);
    CHECK(saw_windowed);
    CHECK(depths.size() == 6);
    CHECK(widths.size() > 6);
}

TEST_CASE("key-value config files parse, default, and reject unknown keys") {
    const char* text =
        "# comment line\n"
        "name = protein_like\n"
        "depth = 2\n"
        "activation = swiglu\n"
        "lr_matrix = 0.05\n";
    LoadedConfig lc = parse_config_text(text);
    CHECK(lc.track.name == TrackName::protein_like);
    CHECK(lc.track.vocab_size == 24);
    CHECK(lc.arch.depth == 2);
    CHECK(lc.arch.activation == Activation::swiglu);
    // unset fields fall back to the desk default for the track's seq_len
    CHECK(lc.arch.width == ArchConfig::desk_default(lc.track.seq_len).width);
    CHECK(lc.hp.lr_matrix == 0.05);
    CHECK(lc.hp.lr_embedding == 0.6);

    CHECK_THROWS_AS(parse_config_text("no_such_key = 1\n"), config_error);

    // sample-nas round trip: arch_to_kv output parses back to the same arch
    ArchConfig a = sample_random_nas(7, 64);
    LoadedConfig round = parse_config_text(arch_to_kv(a));
    CHECK(round.arch == a);
}

TEST_CASE("enum string round trips") {
    for (Activation a : {Activation::relu, Activation::gelu, Activation::silu,
                         Activation::relu_squared, Activation::swiglu, Activation::geglu}) {
        CHECK(activation_is_gated(a) == (a == Activation::swiglu || a == Activation::geglu));
    }
    CHECK(to_string(Condition::agent) == "agent");
    CHECK(to_string(Condition::random_nas) == "random_nas");
    CHECK(to_string(Condition::hp_only) == "hp_only");
    CHECK(to_string(Condition::fixed_default) == "fixed_default");
    CHECK(condition_from_string("hp_only") == Condition::hp_only);
    CHECK_THROWS_AS(condition_from_string("mystery"), config_error);
}

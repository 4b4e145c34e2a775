#include <doctest.h>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "searchlab/data.hpp"
#include "searchlab/search.hpp"
#include "searchlab/util.hpp"

using namespace searchlab;

namespace {

ConfigMutation edit1(const std::string& path, json oldv, json newv, std::string why = "step") {
    ConfigMutation m;
    m.edits.push_back({path, std::move(oldv), std::move(newv)});
    m.rationale = std::move(why);
    return m;
}

struct SearchFixture {
    TrackConfig track;
    Corpus corpus;
    ConfigPair start;

    SearchFixture() {
        track = TrackConfig::preset(TrackName::smiles_like);
        track.seq_len = 32;
        std::string text = generate_synthetic_corpus(SyntheticKind::smiles_like, 50, 11);
        corpus = Corpus::build(text, track, 11);
        start.arch = ArchConfig::desk_default(track.seq_len);
        start.arch.depth = 2;
        start.arch.width = 32;
        start.arch.heads = 2;
        start.arch.kv_heads = 2;
        start.hp = HPConfig::defaults_for(track.seq_len, 4);
    }
};

}  // namespace

TEST_CASE("scripted proposer replays in order then degrades to no-ops") {
    std::vector<ConfigMutation> script = {edit1("depth", json(2), json(3), "a"),
                                          edit1("lr_matrix", json(0.6), json(0.5), "b")};
    ScriptedProposer prop(script);
    RunLog log;
    ConfigPair cur;
    SearchConstraint c = SearchConstraint::for_condition(Condition::agent);
    CHECK(prop.propose(log, cur, c).rationale == "a");
    CHECK(prop.propose(log, cur, c).rationale == "b");
    ConfigMutation rest = prop.propose(log, cur, c);
    CHECK(rest.empty());
    CHECK(rest.rationale == "no-op: script exhausted");
    CHECK(prop.propose(log, cur, c).rationale == "no-op: script exhausted");
    CHECK(prop.descriptor() == "scripted");
}

TEST_CASE("random NAS proposer touches only the sampler-owned fields") {
    SearchConstraint c = SearchConstraint::for_condition(Condition::random_nas);
    ConfigPair cur;
    cur.arch = ArchConfig::desk_default(64);
    cur.hp = HPConfig::defaults_for(64);
    RunLog log;

    RandomNasProposer prop(900, 64);
    ConfigMutation m = prop.propose(log, cur, c);
    CHECK(!m.edits.empty());
    json flat = pair_to_json(cur);
    for (const FieldEdit& e : m.edits) {
        CHECK(c.allows(e.field_path));
        CHECK(flat.at(e.field_path) == e.old_value);  // old values reference the current config
    }

    // deterministic in (seed, call index); later calls draw new samples
    RandomNasProposer again(900, 64);
    ConfigMutation m2 = again.propose(log, cur, c);
    CHECK(mutation_to_json(m).dump() == mutation_to_json(m2).dump());
    ConfigMutation m3 = again.propose(log, cur, c);
    CHECK(mutation_to_json(m3).dump() != mutation_to_json(m2).dump());
    CHECK(prop.descriptor() == "random_nas");
}

TEST_CASE("first JSON object is extracted from free text") {
    auto got = extract_first_json_object("sure! {\"a\": 1, \"b\": {\"c\": [2]}} done");
    REQUIRE(got.has_value());
    CHECK((*got)["b"]["c"][0] == 2);

    got = extract_first_json_object("{\"s\": \"br{ck}ets \\\" inside\"}");
    REQUIRE(got.has_value());
    CHECK((*got)["s"] == "br{ck}ets \" inside");

    CHECK(!extract_first_json_object("no objects here").has_value());
    CHECK(!extract_first_json_object("{unbalanced").has_value());

    // skips a balanced-but-invalid blob and finds the later valid one
    got = extract_first_json_object("{oops} and then {\"ok\": true}");
    REQUIRE(got.has_value());
    CHECK((*got)["ok"] == true);
}

TEST_CASE("run log JSONL schema and round trip") {
    RunLog log;
    log.condition = Condition::agent;
    log.track = "smiles_like";
    log.run_id = "r1";
    log.seed = 77;
    log.n_experiments = 2;
    log.baseline_val_bpb = 1.25;
    log.proposer = "scripted";

    ExperimentRecord ok;
    ok.index = 1;
    ok.mutation = edit1("depth", json(4), json(5));
    ok.arch_after = ArchConfig::desk_default(64);
    ok.hp_after = HPConfig::defaults_for(64);
    ok.val_bpb = 1.125;
    ok.kept = true;
    ok.seed = 101;
    ok.steps_run = 7;
    ok.wall_seconds = 0.5;
    ok.param_count = 999;
    ExperimentRecord bad = ok;
    bad.index = 2;
    bad.val_bpb.reset();
    bad.crashed = true;
    bad.kept = false;
    log.records = {ok, bad};

    json header = runlog_header_json(log);
    CHECK(header.size() == 7);
    for (const char* key : {"condition", "track", "run_id", "seed", "n_experiments",
                            "baseline_val_bpb", "proposer"})
        CHECK(header.contains(key));

    json jok = record_to_json(ok);
    CHECK(jok.size() == 11);
    CHECK(jok.contains("val_bpb"));
    json jbad = record_to_json(bad);
    CHECK(jbad.size() == 10);
    CHECK(!jbad.contains("val_bpb"));

    RunLog back = runlog_from_jsonl(runlog_to_jsonl(log));
    CHECK(back.condition == log.condition);
    CHECK(back.track == log.track);
    CHECK(back.run_id == log.run_id);
    CHECK(back.seed == log.seed);
    CHECK(back.n_experiments == log.n_experiments);
    CHECK(back.baseline_val_bpb == log.baseline_val_bpb);
    CHECK(back.proposer == log.proposer);
    REQUIRE(back.records.size() == 2);
    CHECK(record_to_json(back.records[0]).dump() == jok.dump());
    CHECK(record_to_json(back.records[1]).dump() == jbad.dump());

    // file round trip
    std::string path = "/tmp/searchlab_test_runlog.jsonl";
    save_runlog(path, log);
    RunLog loaded = load_runlog(path);
    CHECK(runlog_to_jsonl(loaded) == runlog_to_jsonl(log));
    std::remove(path.c_str());

    // malformed logs are rejected
    CHECK_THROWS_AS((void)runlog_from_jsonl(""), io_error);
    std::string gap = runlog_header_json(log).dump() + "\n" + record_to_json(bad).dump() + "\n";
    CHECK_THROWS_AS((void)runlog_from_jsonl(gap), io_error);  // first record has index 2
}

TEST_CASE("run_search enforces keep/revert, seeds, and crash containment") {
    SearchFixture f;
    Budget b;
    b.steps = 3;

    std::vector<ConfigMutation> script = {
        edit1("lr_matrix", json(f.start.hp.lr_matrix), json(0.5), "hp step"),
        edit1("nonexistent_field", json(0), json(1), "bogus"),       // unknown -> rejected
        edit1("depth", json(2), json(3), "grow"),                    // valid arch step
        edit1("heads", json(2), json(3), "invalid: 32 % 3 != 0"),    // fails validation
    };
    ScriptedProposer prop(script);

    SearchParams sp;
    sp.condition = Condition::agent;
    sp.track = f.track;
    sp.start = f.start;
    sp.n_experiments = 5;  // one past the script: exercises the no-op path
    sp.budget = b;
    sp.seed = 4242;
    sp.run_id = "unit";
    sp.eval_batches = 2;
    sp.log_path = "/tmp/searchlab_test_search.jsonl";

    RunLog log = run_search(sp, f.corpus, &prop);
    REQUIRE(log.records.size() == 5);
    CHECK(log.proposer == "scripted");

    // baseline comes from seed stream 0 of the run seed
    TrainOutcome base = run_training(f.start.arch, f.start.hp, f.corpus, b,
                                     derive_seed(sp.seed, 0), sp.eval_batches);
    CHECK(log.baseline_val_bpb == *base.val_bpb);

    // per-record invariants: indices, seeds, keep-iff-strict-improvement
    double best = log.baseline_val_bpb;
    for (std::size_t k = 0; k < log.records.size(); ++k) {
        const ExperimentRecord& r = log.records[k];
        CHECK(r.index == int(k) + 1);
        CHECK(r.seed == derive_seed(sp.seed, r.index));
        bool improves = !r.crashed && r.val_bpb.has_value() && *r.val_bpb < best;
        CHECK(r.kept == improves);
        if (r.kept) best = *r.val_bpb;
        if (r.crashed) CHECK(!r.val_bpb.has_value());
    }

    // the two rejection shapes both consume a slot as a crashed record
    CHECK(log.records[1].crashed);  // unknown field
    CHECK(log.records[1].arch_after.depth == 2);
    CHECK(log.records[3].crashed);  // divisibility violation
    CHECK(log.records[3].steps_run == 0);

    // no-op proposal (exhausted script) re-runs the current config cleanly
    CHECK(log.records[4].mutation.rationale == "no-op: script exhausted");
    CHECK(!log.records[4].crashed);

    // the streamed log file equals the in-memory log
    RunLog streamed = load_runlog(sp.log_path);
    CHECK(runlog_to_jsonl(streamed) == runlog_to_jsonl(log));
    std::remove(sp.log_path.c_str());
}

TEST_CASE("fixed_default emits a header-only log and needs no proposer") {
    SearchFixture f;
    SearchParams sp;
    sp.condition = Condition::fixed_default;
    sp.track = f.track;
    sp.start = f.start;
    sp.n_experiments = 50;
    sp.budget.steps = 3;
    sp.seed = 9;
    sp.run_id = "fixed";
    sp.eval_batches = 2;

    RunLog log = run_search(sp, f.corpus, nullptr);
    CHECK(log.records.empty());
    CHECK(log.n_experiments == 50);
    CHECK(log.proposer == "none");
    CHECK(log.baseline_val_bpb > 0.0);

    SearchParams agent = sp;
    agent.condition = Condition::agent;
    CHECK_THROWS_AS((void)run_search(agent, f.corpus, nullptr), config_error);
}

TEST_CASE("HP-only prompt forbids architecture changes verbatim") {
    std::string hp = LLMProposer::system_prompt(Condition::hp_only);
    CHECK(hp.find("Do NOT change model architecture: no new layers, no attention pattern "
                  "changes, no activation function changes, no model structure changes.") !=
          std::string::npos);
    std::string agent = LLMProposer::system_prompt(Condition::agent);
    CHECK(agent.find("Do NOT change model architecture") == std::string::npos);
    CHECK(agent.find("val_bpb") != std::string::npos);

    RunLog log;
    log.track = "protein_like";
    log.baseline_val_bpb = 4.0;
    ExperimentRecord r;
    r.index = 1;
    r.mutation = edit1("depth", json(4), json(6));
    r.val_bpb = 3.5;
    r.kept = true;
    log.records.push_back(r);
    ConfigPair cur;
    cur.arch = ArchConfig::desk_default(64);
    cur.hp = HPConfig::defaults_for(64);
    std::string user =
        LLMProposer::user_prompt(log, cur, SearchConstraint::for_condition(Condition::agent));
    CHECK(user.find("track: protein_like") != std::string::npos);
    CHECK(user.find("best val_bpb so far: 3.5") != std::string::npos);
    CHECK(user.find("depth") != std::string::npos);
}

TEST_CASE("LLM proposer against a local endpoint") {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::string mode = "ok";
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        ++hits;
        if (mode == "auth") {
            res.status = 401;
            return;
        }
        if (mode == "garbage") {
            res.set_content("{\"choices\":[{\"message\":{\"content\":\"no json here\"}}]}",
                            "application/json");
            return;
        }
        if (mode == "flaky" && hits.load() < 3) {
            res.status = 500;
            return;
        }
        json request = json::parse(req.body);
        REQUIRE(request.at("messages").size() == 2);
        json mutation{{"edits", json::array({json{{"field_path", "depth"},
                                                  {"old_value", 4},
                                                  {"new_value", 3}}})},
                      {"rationale", "shallower"}};
        json reply{{"choices", json::array({json{{"message",
                                                  json{{"content",
                                                        "Here it is: " + mutation.dump()}}}}})}};
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread serve([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    RunLog log;
    ConfigPair cur;
    cur.arch = ArchConfig::desk_default(64);
    cur.hp = HPConfig::defaults_for(64);
    SearchConstraint constraint = SearchConstraint::for_condition(Condition::agent);
    std::string endpoint = "http://127.0.0.1:" + std::to_string(port);

    LLMProposer proposer(endpoint, "test-model", "k");
    CHECK(proposer.descriptor() == "llm:test-model");

    ConfigMutation m = proposer.propose(log, cur, constraint);
    REQUIRE(m.edits.size() == 1);
    CHECK(m.edits[0].field_path == "depth");
    CHECK(m.edits[0].new_value == json(3));
    CHECK(m.rationale == "shallower");

    mode = "flaky";  // two 500s, then success: the retry loop must recover
    hits = 0;
    ConfigMutation after_retry = proposer.propose(log, cur, constraint);
    CHECK(after_retry.edits.size() == 1);
    CHECK(hits.load() == 3);

    mode = "garbage";  // persistent junk degrades to a rationale-tagged no-op
    hits = 0;
    ConfigMutation noop = proposer.propose(log, cur, constraint);
    CHECK(noop.empty());
    CHECK(noop.rationale.rfind("malformed_after_retries", 0) == 0);
    CHECK(hits.load() == 4);  // initial try + 3 retries

    mode = "auth";
    CHECK_THROWS_AS((void)proposer.propose(log, cur, constraint), auth_error);

    server.stop();
    serve.join();

    // nothing listens here any more: every attempt fails to connect
    LLMProposer dead(endpoint, "test-model", "k");
    CHECK_THROWS_AS((void)dead.propose(log, cur, constraint), network_error);
}

TEST_CASE("environment-driven LLM construction") {
    unsetenv("SEARCHLAB_LLM_ENDPOINT");
    CHECK_THROWS_AS((void)make_llm_proposer_from_env(), config_error);

    setenv("SEARCHLAB_LLM_ENDPOINT", "http://127.0.0.1:1/v1/chat/completions", 1);
    setenv("SEARCHLAB_LLM_MODEL", "env-model", 1);
    setenv("SEARCHLAB_LLM_KEY", "key", 1);
    auto p = make_llm_proposer_from_env();
    CHECK(p->descriptor() == "llm:env-model");
    auto named = make_llm_proposer_from_env("explicit");
    CHECK(named->descriptor() == "llm:explicit");
    unsetenv("SEARCHLAB_LLM_ENDPOINT");
    unsetenv("SEARCHLAB_LLM_MODEL");
    unsetenv("SEARCHLAB_LLM_KEY");
}

#include "searchlab/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "searchlab/util.hpp"

namespace searchlab {

namespace {

template <typename T>
struct EnumEntry {
    T value;
    const char* name;
};

const EnumEntry<Activation> kActivations[] = {
    {Activation::relu, "relu"},         {Activation::gelu, "gelu"},
    {Activation::silu, "silu"},         {Activation::relu_squared, "relu_squared"},
    {Activation::swiglu, "swiglu"},     {Activation::geglu, "geglu"},
};
const EnumEntry<AttentionPattern> kPatterns[] = {
    {AttentionPattern::full, "full"},
    {AttentionPattern::windowed, "windowed"},
};
const EnumEntry<WindowTag> kWindowTags[] = {
    {WindowTag::short_window, "short"},
    {WindowTag::long_window, "long"},
};
const EnumEntry<Positional> kPositionals[] = {
    {Positional::rope, "rope"},
    {Positional::none, "none"},
};
const EnumEntry<Norm> kNorms[] = {
    {Norm::rmsnorm, "rmsnorm"},
};
const EnumEntry<ValueEmbeddings> kValueEmbeddings[] = {
    {ValueEmbeddings::off, "off"},
    {ValueEmbeddings::alternating, "alternating"},
    {ValueEmbeddings::every_layer, "every_layer"},
};
const EnumEntry<ResidualScaling> kResidualScalings[] = {
    {ResidualScaling::fixed, "fixed"},
    {ResidualScaling::learned_per_layer, "learned_per_layer"},
};
const EnumEntry<Condition> kConditions[] = {
    {Condition::agent, "agent"},
    {Condition::random_nas, "random_nas"},
    {Condition::hp_only, "hp_only"},
    {Condition::fixed_default, "fixed_default"},
};
const EnumEntry<TrackName> kTrackNames[] = {
    {TrackName::smiles_like, "smiles_like"},
    {TrackName::protein_like, "protein_like"},
    {TrackName::nlp_like, "nlp_like"},
    {TrackName::custom, "custom"},
};
const EnumEntry<TokenizerKind> kTokenizerKinds[] = {
    {TokenizerKind::chr, "char"},
    {TokenizerKind::bpe, "bpe"},
};

template <typename T, std::size_t N>
std::string enum_name(const EnumEntry<T> (&table)[N], T v) {
    for (const auto& e : table)
        if (e.value == v) return e.name;
    throw config_error("unknown enum value");
}

template <typename T, std::size_t N>
T enum_value(const EnumEntry<T> (&table)[N], const std::string& s, const char* what) {
    for (const auto& e : table)
        if (s == e.name) return e.value;
    throw config_error(std::string("invalid ") + what + ": '" + s + "'");
}

int get_int(const json& j, const char* key) {
    const json& v = j.at(key);
    if (!v.is_number()) throw config_error(std::string(key) + " must be a number");
    double d = v.get<double>();
    if (d != std::floor(d)) throw config_error(std::string(key) + " must be an integer");
    return int(d);
}

std::int64_t get_int64(const json& j, const char* key) {
    const json& v = j.at(key);
    if (!v.is_number()) throw config_error(std::string(key) + " must be a number");
    double d = v.get<double>();
    if (d != std::floor(d)) throw config_error(std::string(key) + " must be an integer");
    return std::int64_t(d);
}

double get_double(const json& j, const char* key) {
    const json& v = j.at(key);
    if (!v.is_number()) throw config_error(std::string(key) + " must be a number");
    return v.get<double>();
}

bool get_bool(const json& j, const char* key) {
    const json& v = j.at(key);
    if (!v.is_boolean()) throw config_error(std::string(key) + " must be a boolean");
    return v.get<bool>();
}

std::string get_string(const json& j, const char* key) {
    const json& v = j.at(key);
    if (!v.is_string()) throw config_error(std::string(key) + " must be a string");
    return v.get<std::string>();
}

}  // namespace

bool activation_is_gated(Activation a) {
    return a == Activation::swiglu || a == Activation::geglu;
}

std::string to_string(Activation a) { return enum_name(kActivations, a); }
std::string to_string(AttentionPattern p) { return enum_name(kPatterns, p); }
std::string to_string(WindowTag t) { return enum_name(kWindowTags, t); }
std::string to_string(Positional p) { return enum_name(kPositionals, p); }
std::string to_string(Norm n) { return enum_name(kNorms, n); }
std::string to_string(ValueEmbeddings v) { return enum_name(kValueEmbeddings, v); }
std::string to_string(ResidualScaling r) { return enum_name(kResidualScalings, r); }
std::string to_string(Condition c) { return enum_name(kConditions, c); }
std::string to_string(TrackName n) { return enum_name(kTrackNames, n); }
std::string to_string(TokenizerKind k) { return enum_name(kTokenizerKinds, k); }

Condition condition_from_string(const std::string& s) {
    return enum_value(kConditions, s, "condition");
}

ArchConfig ArchConfig::baseline(int seq_len) {
    ArchConfig a;  // field initializers hold the reference values
    a.window_size = std::max(1, seq_len / 4);
    return a;
}

ArchConfig ArchConfig::desk_default(int seq_len) {
    ArchConfig a;
    a.depth = 4;
    a.width = 64;
    a.heads = 4;
    a.kv_heads = 4;
    a.ffn_mult = 4.0;
    a.window_size = std::max(1, seq_len / 4);
    return a;
}

HPConfig HPConfig::defaults_for(int seq_len, int device_batch_seqs, int grad_accum_steps) {
    HPConfig h;
    h.device_batch_seqs = device_batch_seqs;
    h.grad_accum_steps = grad_accum_steps;
    h.total_batch_tokens = std::int64_t(device_batch_seqs) * seq_len * grad_accum_steps;
    return h;
}

TrackConfig TrackConfig::preset(TrackName name) {
    TrackConfig t;
    t.name = name;
    switch (name) {
        case TrackName::smiles_like:
            t.vocab_size = 37;
            t.seq_len = 64;
            t.tokenizer = TokenizerKind::chr;
            break;
        case TrackName::protein_like:
            t.vocab_size = 24;
            t.seq_len = 64;
            t.tokenizer = TokenizerKind::chr;
            break;
        case TrackName::nlp_like:
            t.vocab_size = 512;
            t.seq_len = 128;
            t.tokenizer = TokenizerKind::bpe;
            break;
        case TrackName::custom:
            break;
    }
    return t;
}

const std::vector<std::string>& arch_field_names() {
    static const std::vector<std::string> names = {
        "depth", "width", "heads", "kv_heads", "ffn_mult", "activation",
        "attention_pattern", "window_cycle", "window_size", "positional",
        "norm", "value_embeddings", "residual_scaling", "weight_tying",
    };
    return names;
}

const std::vector<std::string>& hp_field_names() {
    static const std::vector<std::string> names = {
        "lr_embedding", "lr_unembedding", "lr_matrix", "lr_scalar",
        "weight_decay", "adam_beta1", "adam_beta2", "warmdown_ratio",
        "total_batch_tokens", "device_batch_seqs", "grad_accum_steps",
    };
    return names;
}

bool is_arch_field(const std::string& path) {
    const auto& v = arch_field_names();
    return std::find(v.begin(), v.end(), path) != v.end();
}

bool is_hp_field(const std::string& path) {
    const auto& v = hp_field_names();
    return std::find(v.begin(), v.end(), path) != v.end();
}

SearchConstraint SearchConstraint::for_condition(Condition c) {
    SearchConstraint sc;
    sc.condition = c;
    switch (c) {
        case Condition::agent:
            for (const auto& f : arch_field_names()) sc.mutable_fields.insert(f);
            for (const auto& f : hp_field_names()) sc.mutable_fields.insert(f);
            break;
        case Condition::random_nas:
            sc.mutable_fields = {"depth",     "width",           "heads",        "kv_heads",
                                 "activation", "attention_pattern", "window_cycle", "window_size"};
            break;
        case Condition::hp_only:
            for (const auto& f : hp_field_names()) sc.mutable_fields.insert(f);
            break;
        case Condition::fixed_default:
            break;
    }
    return sc;
}

json arch_to_json(const ArchConfig& a) {
    json cycle = json::array();
    for (WindowTag t : a.window_cycle) cycle.push_back(to_string(t));
    return json{
        {"depth", a.depth},
        {"width", a.width},
        {"heads", a.heads},
        {"kv_heads", a.kv_heads},
        {"ffn_mult", a.ffn_mult},
        {"activation", to_string(a.activation)},
        {"attention_pattern", to_string(a.attention_pattern)},
        {"window_cycle", cycle},
        {"window_size", a.window_size},
        {"positional", to_string(a.positional)},
        {"norm", to_string(a.norm)},
        {"value_embeddings", to_string(a.value_embeddings)},
        {"residual_scaling", to_string(a.residual_scaling)},
        {"weight_tying", a.weight_tying},
    };
}

json hp_to_json(const HPConfig& h) {
    return json{
        {"lr_embedding", h.lr_embedding},
        {"lr_unembedding", h.lr_unembedding},
        {"lr_matrix", h.lr_matrix},
        {"lr_scalar", h.lr_scalar},
        {"weight_decay", h.weight_decay},
        {"adam_beta1", h.adam_beta1},
        {"adam_beta2", h.adam_beta2},
        {"warmdown_ratio", h.warmdown_ratio},
        {"total_batch_tokens", h.total_batch_tokens},
        {"device_batch_seqs", h.device_batch_seqs},
        {"grad_accum_steps", h.grad_accum_steps},
    };
}

ArchConfig arch_from_json(const json& j) {
    ArchConfig a;
    a.depth = get_int(j, "depth");
    a.width = get_int(j, "width");
    a.heads = get_int(j, "heads");
    a.kv_heads = get_int(j, "kv_heads");
    a.ffn_mult = get_double(j, "ffn_mult");
    a.activation = enum_value(kActivations, get_string(j, "activation"), "activation");
    a.attention_pattern = enum_value(kPatterns, get_string(j, "attention_pattern"), "attention_pattern");
    const json& cycle = j.at("window_cycle");
    if (!cycle.is_array()) throw config_error("window_cycle must be an array");
    a.window_cycle.clear();
    for (const auto& t : cycle) {
        if (!t.is_string()) throw config_error("window_cycle entries must be strings");
        a.window_cycle.push_back(enum_value(kWindowTags, t.get<std::string>(), "window tag"));
    }
    a.window_size = get_int(j, "window_size");
    a.positional = enum_value(kPositionals, get_string(j, "positional"), "positional");
    a.norm = enum_value(kNorms, get_string(j, "norm"), "norm");
    a.value_embeddings = enum_value(kValueEmbeddings, get_string(j, "value_embeddings"), "value_embeddings");
    a.residual_scaling = enum_value(kResidualScalings, get_string(j, "residual_scaling"), "residual_scaling");
    a.weight_tying = get_bool(j, "weight_tying");
    return a;
}

HPConfig hp_from_json(const json& j) {
    HPConfig h;
    h.lr_embedding = get_double(j, "lr_embedding");
    h.lr_unembedding = get_double(j, "lr_unembedding");
    h.lr_matrix = get_double(j, "lr_matrix");
    h.lr_scalar = get_double(j, "lr_scalar");
    h.weight_decay = get_double(j, "weight_decay");
    h.adam_beta1 = get_double(j, "adam_beta1");
    h.adam_beta2 = get_double(j, "adam_beta2");
    h.warmdown_ratio = get_double(j, "warmdown_ratio");
    h.total_batch_tokens = get_int64(j, "total_batch_tokens");
    h.device_batch_seqs = get_int(j, "device_batch_seqs");
    h.grad_accum_steps = get_int(j, "grad_accum_steps");
    return h;
}

json pair_to_json(const ConfigPair& p) {
    json j = arch_to_json(p.arch);
    json h = hp_to_json(p.hp);
    j.update(h);
    return j;
}

ConfigPair pair_from_json(const json& j) {
    return ConfigPair{arch_from_json(j), hp_from_json(j)};
}

std::vector<Violation> validate_config(const ArchConfig& arch, const HPConfig& hp, const TrackConfig& track) {
    std::vector<Violation> v;
    auto bad = [&v](const std::string& path, const std::string& msg) { v.push_back({path, msg}); };

    if (arch.depth < 1) bad("depth", "depth must be >= 1");
    if (arch.width < 1) bad("width", "width must be >= 1");
    if (arch.heads < 1) bad("heads", "heads must be >= 1");
    if (arch.kv_heads < 1) bad("kv_heads", "kv_heads must be >= 1");
    if (arch.window_size < 1) bad("window_size", "window_size must be >= 1");
    if (arch.width >= 1 && arch.heads >= 1 && arch.width % arch.heads != 0)
        bad("heads", "width mod heads != 0");
    if (arch.heads >= 1 && arch.kv_heads >= 1 && arch.heads % arch.kv_heads != 0)
        bad("kv_heads", "heads mod kv_heads != 0");
    if (arch.attention_pattern == AttentionPattern::windowed && arch.window_cycle.empty())
        bad("window_cycle", "window_cycle must be non-empty when attention_pattern is windowed");
    if (arch.positional == Positional::rope && arch.heads >= 1 && arch.width % arch.heads == 0 &&
        (arch.width / arch.heads) % 2 != 0)
        bad("width", "rope requires an even head_dim");
    if (!(arch.ffn_mult > 0.0)) bad("ffn_mult", "ffn_mult must be > 0");
    if (arch.ffn_mult > 0.0 && arch.width >= 1 && int(std::lround(arch.ffn_mult * arch.width)) < 1)
        bad("ffn_mult", "ffn hidden dim rounds to zero");

    auto positive = [&bad](const char* path, double x) {
        if (!(x > 0.0)) bad(path, std::string(path) + " must be > 0");
    };
    positive("lr_embedding", hp.lr_embedding);
    positive("lr_unembedding", hp.lr_unembedding);
    positive("lr_matrix", hp.lr_matrix);
    positive("lr_scalar", hp.lr_scalar);
    if (hp.weight_decay < 0.0) bad("weight_decay", "weight_decay must be >= 0");
    if (!(hp.adam_beta1 > 0.0 && hp.adam_beta1 < 1.0)) bad("adam_beta1", "adam_beta1 must be in (0,1)");
    if (!(hp.adam_beta2 > 0.0 && hp.adam_beta2 < 1.0)) bad("adam_beta2", "adam_beta2 must be in (0,1)");
    if (hp.warmdown_ratio < 0.0 || hp.warmdown_ratio > 1.0)
        bad("warmdown_ratio", "warmdown_ratio must be in [0,1]");
    if (hp.device_batch_seqs < 1) bad("device_batch_seqs", "device_batch_seqs must be >= 1");
    if (hp.grad_accum_steps < 1) bad("grad_accum_steps", "grad_accum_steps must be >= 1");
    if (hp.total_batch_tokens < 1) bad("total_batch_tokens", "total_batch_tokens must be >= 1");
    if (hp.device_batch_seqs >= 1 && hp.grad_accum_steps >= 1 &&
        std::int64_t(hp.device_batch_seqs) * track.seq_len * hp.grad_accum_steps != hp.total_batch_tokens)
        bad("total_batch_tokens",
            "device_batch_seqs * seq_len * grad_accum_steps must equal total_batch_tokens");

    if (track.seq_len < 2) bad("seq_len", "seq_len must be >= 2");
    if (track.vocab_size < 2) bad("vocab_size", "vocab_size must be >= 2");
    if (!(track.split_fraction > 0.0 && track.split_fraction < 1.0))
        bad("split_fraction", "split_fraction must be in (0,1)");
    return v;
}

std::string to_string(RejectionKind k) {
    switch (k) {
        case RejectionKind::constraint_violation: return "constraint_violation";
        case RejectionKind::stale_old_value: return "stale_old_value";
        case RejectionKind::invalid_value: return "invalid_value";
    }
    return "?";
}

ApplyResult apply_mutation(const ConfigPair& current, const ConfigMutation& m, const SearchConstraint& c) {
    json flat = pair_to_json(current);
    std::set<std::string> seen;
    for (const FieldEdit& e : m.edits) {
        if (!seen.insert(e.field_path).second)
            return Rejection{RejectionKind::invalid_value, e.field_path, "duplicate field path"};
        if (!c.allows(e.field_path))
            return Rejection{RejectionKind::constraint_violation, e.field_path,
                             "field not mutable under condition " + to_string(c.condition)};
        auto it = flat.find(e.field_path);
        if (it == flat.end())
            return Rejection{RejectionKind::constraint_violation, e.field_path, "unknown field"};
        if (*it != e.old_value)
            return Rejection{RejectionKind::stale_old_value, e.field_path,
                             "old_value does not match current config"};
        *it = e.new_value;
    }
    try {
        return pair_from_json(flat);
    } catch (const config_error& err) {
        return Rejection{RejectionKind::invalid_value, "", err.what()};
    }
}

ArchConfig sample_random_nas(std::uint64_t seed, int seq_len) {
    Rng rng(seed);
    ArchConfig a = ArchConfig::baseline(seq_len);
    a.depth = int(rng.uniform_int(3, 8));
    a.width = 128 + 32 * int(rng.uniform_int(0, 12));
    int heads = int(rng.uniform_int(2, 8));
    while (a.width % heads != 0) heads = int(rng.uniform_int(2, 8));
    a.heads = heads;
    a.kv_heads = heads;
    static const Activation acts[] = {Activation::relu, Activation::gelu, Activation::silu,
                                      Activation::relu_squared};
    a.activation = acts[rng.uniform_int(0, 3)];
    a.attention_pattern =
        rng.uniform_int(0, 1) == 0 ? AttentionPattern::full : AttentionPattern::windowed;
    return a;
}

ConfigMutation diff_configs(const ConfigPair& a, const ConfigPair& b) {
    json fa = pair_to_json(a);
    json fb = pair_to_json(b);
    ConfigMutation m;
    for (const auto& field : arch_field_names())
        if (fa.at(field) != fb.at(field)) m.edits.push_back({field, fa.at(field), fb.at(field)});
    for (const auto& field : hp_field_names())
        if (fa.at(field) != fb.at(field)) m.edits.push_back({field, fa.at(field), fb.at(field)});
    return m;
}

json mutation_to_json(const ConfigMutation& m) {
    json edits = json::array();
    for (const FieldEdit& e : m.edits)
        edits.push_back(json{{"field_path", e.field_path}, {"old_value", e.old_value}, {"new_value", e.new_value}});
    return json{{"edits", edits}, {"rationale", m.rationale}};
}

ConfigMutation mutation_from_json(const json& j) {
    ConfigMutation m;
    if (!j.is_object() || !j.contains("edits") || !j.at("edits").is_array())
        throw config_error("mutation must be an object with an 'edits' array");
    for (const auto& e : j.at("edits")) {
        if (!e.is_object() || !e.contains("field_path") || !e.contains("old_value") ||
            !e.contains("new_value") || !e.at("field_path").is_string())
            throw config_error("mutation edit must carry field_path/old_value/new_value");
        m.edits.push_back({e.at("field_path").get<std::string>(), e.at("old_value"), e.at("new_value")});
    }
    if (j.contains("rationale")) {
        if (!j.at("rationale").is_string()) throw config_error("rationale must be a string");
        m.rationale = j.at("rationale").get<std::string>();
    }
    return m;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// Parses one kv value string into a json value matching the type of the
// field's default.
json parse_kv_value(const std::string& key, const std::string& raw, const json& defaults) {
    const json& d = defaults.at(key);
    if (d.is_boolean()) {
        if (raw == "true") return true;
        if (raw == "false") return false;
        throw config_error("key '" + key + "' expects true/false, got '" + raw + "'");
    }
    if (d.is_number_integer()) {
        std::size_t pos = 0;
        long long v = 0;
        try {
            v = std::stoll(raw, &pos);
        } catch (...) {
            throw config_error("key '" + key + "' expects an integer, got '" + raw + "'");
        }
        if (pos != raw.size()) throw config_error("key '" + key + "' expects an integer, got '" + raw + "'");
        return v;
    }
    if (d.is_number_float()) {
        std::size_t pos = 0;
        double v = 0;
        try {
            v = std::stod(raw, &pos);
        } catch (...) {
            throw config_error("key '" + key + "' expects a number, got '" + raw + "'");
        }
        if (pos != raw.size()) throw config_error("key '" + key + "' expects a number, got '" + raw + "'");
        return v;
    }
    if (d.is_array()) {  // window_cycle: comma-separated tags
        json arr = json::array();
        std::stringstream ss(raw);
        std::string part;
        while (std::getline(ss, part, ',')) {
            part = trim(part);
            if (!part.empty()) arr.push_back(part);
        }
        return arr;
    }
    return raw;  // string-typed fields (enums, paths)
}

json track_to_json(const TrackConfig& t) {
    return json{
        {"name", to_string(t.name)},
        {"vocab_size", t.vocab_size},
        {"seq_len", t.seq_len},
        {"tokenizer", to_string(t.tokenizer)},
        {"corpus_path", t.corpus_path},
        {"split_fraction", t.split_fraction},
    };
}

TrackConfig track_from_json(const json& j) {
    TrackConfig t;
    t.name = enum_value(kTrackNames, get_string(j, "name"), "track name");
    t.vocab_size = get_int(j, "vocab_size");
    t.seq_len = get_int(j, "seq_len");
    t.tokenizer = enum_value(kTokenizerKinds, get_string(j, "tokenizer"), "tokenizer");
    t.corpus_path = get_string(j, "corpus_path");
    t.split_fraction = get_double(j, "split_fraction");
    return t;
}

}  // namespace

LoadedConfig parse_config_text(const std::string& text, const std::string& origin) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw config_error(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (key.empty())
            throw config_error(origin + ":" + std::to_string(lineno) + ": empty key");
        if (kv.count(key))
            throw config_error(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        kv[key] = value;
    }

    // Track keys first: presets and sequence length shape the arch/hp defaults.
    TrackConfig track;
    {
        json tj = track_to_json(track);
        if (kv.count("name")) {
            track.name = enum_value(kTrackNames, kv.at("name"), "track name");
            track = TrackConfig::preset(track.name);
            tj = track_to_json(track);
        }
        for (const char* key : {"vocab_size", "seq_len", "tokenizer", "corpus_path", "split_fraction"})
            if (kv.count(key)) tj[key] = parse_kv_value(key, kv.at(key), tj);
        track = track_from_json(tj);
    }

    json aj = arch_to_json(ArchConfig::desk_default(track.seq_len));
    json hj = hp_to_json(HPConfig::defaults_for(track.seq_len));
    bool batch_field_set = false;
    bool total_set = false;
    for (const auto& [key, value] : kv) {
        if (key == "name" || key == "vocab_size" || key == "seq_len" || key == "tokenizer" ||
            key == "corpus_path" || key == "split_fraction")
            continue;
        if (aj.contains(key)) {
            aj[key] = parse_kv_value(key, value, aj);
        } else if (hj.contains(key)) {
            hj[key] = parse_kv_value(key, value, hj);
            if (key == "device_batch_seqs" || key == "grad_accum_steps") batch_field_set = true;
            if (key == "total_batch_tokens") total_set = true;
        } else {
            throw config_error(origin + ": unknown key '" + key + "'");
        }
    }
    if (batch_field_set && !total_set)
        hj["total_batch_tokens"] = std::int64_t(hj.at("device_batch_seqs").get<int>()) * track.seq_len *
                                   hj.at("grad_accum_steps").get<int>();

    LoadedConfig out;
    out.track = track;
    out.arch = arch_from_json(aj);
    out.hp = hp_from_json(hj);
    return out;
}

LoadedConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str(), path);
}

std::string arch_to_kv(const ArchConfig& a) {
    json j = arch_to_json(a);
    std::string out;
    for (const auto& field : arch_field_names()) {
        const json& v = j.at(field);
        out += field;
        out += " = ";
        if (v.is_string()) {
            out += v.get<std::string>();
        } else if (v.is_boolean()) {
            out += v.get<bool>() ? "true" : "false";
        } else if (v.is_array()) {
            bool first = true;
            for (const auto& t : v) {
                if (!first) out += ",";
                out += t.get<std::string>();
                first = false;
            }
        } else if (v.is_number_integer()) {
            out += std::to_string(v.get<std::int64_t>());
        } else {
            out += format_double(v.get<double>());
        }
        out += "\n";
    }
    return out;
}

}  // namespace searchlab

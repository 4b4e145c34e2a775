#include "searchlab/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>

#include "searchlab/util.hpp"

namespace searchlab {

namespace {

bool is_line_sep(char c) { return c == '\n' || c == '\r'; }

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            if (!cur.empty()) lines.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    return lines;
}

std::string hex_encode(const std::string& s) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(s.size() * 2);
    for (unsigned char c : s) {
        out.push_back(digits[c >> 4]);
        out.push_back(digits[c & 0xF]);
    }
    return out;
}

std::string hex_decode(const std::string& s) {
    if (s.size() % 2 != 0) throw io_error("tokenizer file: odd-length hex token");
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        throw io_error("tokenizer file: bad hex digit");
    };
    std::string out;
    out.reserve(s.size() / 2);
    for (std::size_t i = 0; i < s.size(); i += 2)
        out.push_back(char((nibble(s[i]) << 4) | nibble(s[i + 1])));
    return out;
}

}  // namespace

std::vector<int> Tokenizer::encode(const std::string& text) const {
    std::vector<int> ids;
    if (kind == TokenizerKind::chr) {
        std::array<int, 256> lut;
        lut.fill(-1);
        for (int i = 0; i + 1 < int(vocab.size()); ++i)  // pad excluded
            if (vocab[i].size() == 1) lut[(unsigned char)vocab[i][0]] = i;
        ids.reserve(text.size());
        for (unsigned char c : text) {
            int id = lut[c];
            if (id < 0)
                throw config_error(std::string("character not in tokenizer alphabet: byte ") +
                                   std::to_string(int(c)));
            ids.push_back(id);
        }
        return ids;
    }
    // bpe: start from single bytes, replay merges in training order
    ids.reserve(text.size());
    for (unsigned char c : text) ids.push_back(int(c));
    std::vector<int> next;
    for (std::size_t m = 0; m < merges.size(); ++m) {
        int merged_id = 256 + int(m);
        const auto [a, b] = merges[m];
        next.clear();
        for (std::size_t i = 0; i < ids.size();) {
            if (i + 1 < ids.size() && ids[i] == a && ids[i + 1] == b) {
                next.push_back(merged_id);
                i += 2;
            } else {
                next.push_back(ids[i]);
                i += 1;
            }
        }
        ids.swap(next);
    }
    return ids;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (id < 0 || id >= int(vocab.size())) throw config_error("token id out of range in decode");
        out += vocab[std::size_t(id)];
    }
    return out;
}

Tokenizer Tokenizer::char_tokenizer(const std::string& text) {
    std::array<bool, 256> present{};
    for (char c : text)
        if (!is_line_sep(c)) present[(unsigned char)c] = true;
    Tokenizer t;
    t.kind = TokenizerKind::chr;
    for (int c = 0; c < 256; ++c)
        if (present[std::size_t(c)]) t.vocab.push_back(std::string(1, char(c)));
    t.vocab.push_back("");  // pad
    t.pad_id = int(t.vocab.size()) - 1;
    for (const auto& tok : t.vocab) t.byte_len.push_back(int(tok.size()));
    return t;
}

Tokenizer Tokenizer::train_bpe(const std::string& text, int target_vocab) {
    if (target_vocab < 257) throw config_error("train_bpe: target_vocab must be >= 257");
    Tokenizer t;
    t.kind = TokenizerKind::bpe;
    for (int c = 0; c < 256; ++c) t.vocab.push_back(std::string(1, char(c)));

    std::vector<int> work;
    work.reserve(text.size());
    for (unsigned char c : text) work.push_back(int(c));

    // target includes 256 byte tokens, merges, and the trailing pad token
    while (int(t.vocab.size()) + 1 < target_vocab) {
        std::map<std::pair<int, int>, long long> counts;
        for (std::size_t i = 0; i + 1 < work.size(); ++i)
            ++counts[{work[i], work[i + 1]}];
        std::pair<int, int> best{-1, -1};
        long long best_count = 1;  // requires >= 2 occurrences
        for (const auto& [pair, count] : counts) {
            if (count < best_count) continue;
            if (count > best_count) {
                best_count = count;
                best = pair;
                continue;
            }
            if (best.first < 0) continue;
            auto key = std::make_pair(t.vocab[std::size_t(pair.first)], t.vocab[std::size_t(pair.second)]);
            auto best_key =
                std::make_pair(t.vocab[std::size_t(best.first)], t.vocab[std::size_t(best.second)]);
            if (key < best_key) best = pair;
        }
        if (best.first < 0) {
            t.incomplete = true;
            break;
        }
        int merged_id = int(t.vocab.size());
        t.vocab.push_back(t.vocab[std::size_t(best.first)] + t.vocab[std::size_t(best.second)]);
        t.merges.push_back(best);
        std::vector<int> next;
        next.reserve(work.size());
        for (std::size_t i = 0; i < work.size();) {
            if (i + 1 < work.size() && work[i] == best.first && work[i + 1] == best.second) {
                next.push_back(merged_id);
                i += 2;
            } else {
                next.push_back(work[i]);
                i += 1;
            }
        }
        work.swap(next);
    }

    t.vocab.push_back("");  // pad
    t.pad_id = int(t.vocab.size()) - 1;
    for (const auto& tok : t.vocab) t.byte_len.push_back(int(tok.size()));
    return t;
}

std::string Tokenizer::save_text() const {
    std::ostringstream out;
    out << "tokenizer " << to_string(kind) << "\n";
    out << "incomplete " << (incomplete ? 1 : 0) << "\n";
    out << "vocab " << vocab.size() << "\n";
    for (const auto& tok : vocab) out << (tok.empty() ? std::string("-") : hex_encode(tok)) << "\n";
    out << "merges " << merges.size() << "\n";
    for (const auto& [a, b] : merges) out << a << " " << b << "\n";
    return out.str();
}

Tokenizer Tokenizer::load_text(const std::string& text) {
    std::istringstream in(text);
    std::string word;
    Tokenizer t;
    auto expect = [&in, &word](const char* key) {
        if (!(in >> word) || word != key) throw io_error(std::string("tokenizer file: expected ") + key);
    };
    expect("tokenizer");
    if (!(in >> word)) throw io_error("tokenizer file: missing kind");
    t.kind = word == "bpe" ? TokenizerKind::bpe : TokenizerKind::chr;
    if (word != "bpe" && word != "char") throw io_error("tokenizer file: bad kind '" + word + "'");
    expect("incomplete");
    int flag = 0;
    if (!(in >> flag)) throw io_error("tokenizer file: bad incomplete flag");
    t.incomplete = flag != 0;
    expect("vocab");
    std::size_t n = 0;
    if (!(in >> n)) throw io_error("tokenizer file: bad vocab count");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(in >> word)) throw io_error("tokenizer file: truncated vocab");
        t.vocab.push_back(word == "-" ? std::string() : hex_decode(word));
    }
    expect("merges");
    std::size_t m = 0;
    if (!(in >> m)) throw io_error("tokenizer file: bad merge count");
    for (std::size_t i = 0; i < m; ++i) {
        int a = 0, b = 0;
        if (!(in >> a >> b)) throw io_error("tokenizer file: truncated merges");
        t.merges.push_back({a, b});
    }
    if (t.vocab.empty() || !t.vocab.back().empty()) throw io_error("tokenizer file: missing pad token");
    t.pad_id = int(t.vocab.size()) - 1;
    for (const auto& tok : t.vocab) t.byte_len.push_back(int(tok.size()));
    return t;
}

Corpus Corpus::build(const std::string& text, const TrackConfig& track, std::uint64_t seed) {
    Corpus c;
    c.seq_len = track.seq_len;
    if (track.tokenizer == TokenizerKind::chr)
        c.tokenizer = Tokenizer::char_tokenizer(text);
    else
        c.tokenizer = Tokenizer::train_bpe(text, track.vocab_size);

    for (const auto& line : split_lines(text)) c.sequences.push_back(c.tokenizer.encode(line));
    if (c.sequences.empty()) throw config_error("corpus is empty");

    std::vector<int> order(c.sequences.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);
    Rng rng(derive_seed(seed, 0x5EED5));
    rng.shuffle(order);
    int n = int(order.size());
    int n_train = int(std::llround(track.split_fraction * n));
    if (n >= 2) n_train = std::min(std::max(n_train, 1), n - 1);
    c.train_idx.assign(order.begin(), order.begin() + n_train);
    c.val_idx.assign(order.begin() + n_train, order.end());
    return c;
}

double Batch::total_bytes() const {
    double s = 0.0;
    for (double b : byte_lengths) s += b;
    return s;
}

int Batch::scored_targets() const {
    int s = 0;
    for (std::uint8_t m : target_mask) s += m;
    return s;
}

Batch assemble_batch(const Corpus& corpus, const std::vector<int>& seq_indices) {
    const int T = corpus.seq_len;
    Batch b;
    b.batch_size = int(seq_indices.size());
    b.seq_len = T;
    b.token_ids.assign(std::size_t(b.batch_size) * T, corpus.pad_id());
    b.target_mask.assign(std::size_t(b.batch_size) * T, 0);
    b.byte_lengths.assign(std::size_t(b.batch_size), 0.0);
    for (int r = 0; r < b.batch_size; ++r) {
        const auto& seq = corpus.sequences.at(std::size_t(seq_indices[std::size_t(r)]));
        int m = std::min(int(seq.size()), T);
        double bytes = 0.0;
        for (int t = 0; t < m; ++t) {
            int id = seq[std::size_t(t)];
            b.token_ids[std::size_t(r) * T + t] = id;
            if (t >= 1) {
                b.target_mask[std::size_t(r) * T + (t - 1)] = 1;
                bytes += corpus.tokenizer.byte_len[std::size_t(id)];
            }
        }
        b.byte_lengths[std::size_t(r)] = bytes;
    }
    return b;
}

std::vector<Batch> epoch_batches(const Corpus& corpus, Split split, int device_batch_seqs,
                                 std::uint64_t seed) {
    const std::vector<int>& idx = split == Split::train ? corpus.train_idx : corpus.val_idx;
    if (idx.empty()) throw config_error("empty_split: no sequences in requested split");
    if (device_batch_seqs < 1) throw config_error("device_batch_seqs must be >= 1");
    std::vector<int> order = idx;
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<Batch> out;
    for (std::size_t i = 0; i < order.size(); i += std::size_t(device_batch_seqs)) {
        std::size_t j = std::min(order.size(), i + std::size_t(device_batch_seqs));
        out.push_back(assemble_batch(corpus, std::vector<int>(order.begin() + long(i), order.begin() + long(j))));
    }
    return out;
}

BatchStream::BatchStream(const Corpus& corpus, Split split, int device_batch_seqs, std::uint64_t seed)
    : corpus_(&corpus), split_(split), device_batch_seqs_(device_batch_seqs), seed_(seed) {}

Batch BatchStream::next() {
    if (pos_ >= pending_.size()) {
        pending_ = epoch_batches(*corpus_, split_, device_batch_seqs_, derive_seed(seed_, epoch_));
        pos_ = 0;
        ++epoch_;
    }
    return pending_[pos_++];
}

SyntheticKind synthetic_kind_for(TrackName name) {
    switch (name) {
        case TrackName::smiles_like: return SyntheticKind::smiles_like;
        case TrackName::protein_like: return SyntheticKind::protein_like;
        case TrackName::nlp_like: return SyntheticKind::nlp_like;
        case TrackName::custom: break;
    }
    throw config_error("no synthetic corpus for custom tracks");
}

namespace {

// 36 distinct characters, brackets balanced.
const char* kSmilesCoverage = "[B+](C=N)(F-H)(I#O)(P@S)[c%n](o/s)(p\\b)123456789";

void smiles_fragment(Rng& rng, int depth, std::string& out) {
    static const char atoms[] = {'B', 'C', 'F', 'H', 'I', 'N', 'O', 'P', 'S',
                                 'b', 'c', 'n', 'o', 'p', 's'};
    static const char bonds[] = {'=', '#', '-', '/', '\\'};
    int units = 2 + int(rng.uniform_int(0, 6));
    for (int u = 0; u < units; ++u) {
        double roll = rng.uniform();
        if (roll < 0.12) {
            out.push_back('[');
            out.push_back(atoms[rng.uniform_int(0, 8)]);  // bracket atoms stay uppercase
            double mark = rng.uniform();
            if (mark < 0.3)
                out.push_back('+');
            else if (mark < 0.6)
                out.push_back('-');
            else if (mark < 0.8)
                out.push_back('@');
            else
                out.push_back('%');
            out.push_back(']');
        } else {
            if (roll > 0.75) out.push_back(bonds[rng.uniform_int(0, 4)]);
            out.push_back(atoms[rng.uniform_int(0, int(sizeof(atoms)) - 1)]);
            if (rng.uniform() < 0.2) out.push_back(char('1' + int(rng.uniform_int(0, 8))));
        }
        if (depth < 3 && rng.uniform() < 0.22) {
            out.push_back('(');
            smiles_fragment(rng, depth + 1, out);
            out.push_back(')');
        }
    }
}

std::string smiles_line(Rng& rng) {
    std::string out;
    smiles_fragment(rng, 0, out);
    return out;
}

const char* kProteinAlphabet = "ACDEFGHIKLMNPQRSTVWYBXZ";  // 23 symbols

std::string protein_line(Rng& rng) {
    const int n_sym = 23;
    int len = 30 + int(rng.uniform_int(0, 40));
    std::string out;
    out.reserve(std::size_t(len));
    int cur = int(rng.uniform_int(0, n_sym - 1));
    out.push_back(kProteinAlphabet[cur]);
    for (int i = 1; i < len; ++i) {
        // order-1 chain: mass concentrated near the current symbol's
        // alphabet neighborhood, occasional jumps (B/X/Z stay rare)
        if (rng.uniform() < 0.75) {
            int hop = int(rng.uniform_int(0, 4)) - 2;
            cur = (cur + hop + n_sym) % n_sym;
            if (cur >= 20 && rng.uniform() < 0.8) cur = (cur + 3) % 20;
        } else {
            cur = int(rng.uniform_int(0, 19));
        }
        out.push_back(kProteinAlphabet[cur]);
    }
    return out;
}

std::string nlp_line(Rng& rng) {
    static const char* subjects[] = {"the chemist", "a student",  "the archivist", "an engineer",
                                     "the pilot",   "a gardener", "the analyst",   "a courier"};
    static const char* verbs[] = {"measured", "sorted",   "repaired", "labelled",
                                  "shipped",  "sketched", "indexed",  "tested"};
    static const char* objects[] = {"the samples", "three crates",  "a worn ledger", "the filters",
                                    "two engines", "the seedlings", "a long report", "the cables"};
    static const char* adverbs[] = {"carefully", "twice", "before noon", "without pause",
                                    "in silence", "again", "by hand",     "at dawn"};
    std::string out;
    int sentences = 1 + int(rng.uniform_int(0, 1));
    for (int s = 0; s < sentences; ++s) {
        if (s) out.push_back(' ');
        out += subjects[rng.uniform_int(0, 7)];
        out.push_back(' ');
        out += verbs[rng.uniform_int(0, 7)];
        out.push_back(' ');
        out += objects[rng.uniform_int(0, 7)];
        if (rng.uniform() < 0.6) {
            out.push_back(' ');
            out += adverbs[rng.uniform_int(0, 7)];
        }
        out.push_back('.');
    }
    return out;
}

}  // namespace

std::string generate_synthetic_corpus(SyntheticKind kind, int n, std::uint64_t seed) {
    if (n < 1) throw config_error("generate_synthetic_corpus: n must be >= 1");
    Rng rng(derive_seed(seed, std::uint64_t(kind) + 0x10));
    std::string out;
    for (int i = 0; i < n; ++i) {
        std::string line;
        if (i == 0) {
            switch (kind) {
                case SyntheticKind::smiles_like: line = kSmilesCoverage; break;
                case SyntheticKind::protein_like: line = kProteinAlphabet; break;
                case SyntheticKind::nlp_like: line = nlp_line(rng); break;
            }
        } else {
            switch (kind) {
                case SyntheticKind::smiles_like: line = smiles_line(rng); break;
                case SyntheticKind::protein_like: line = protein_line(rng); break;
                case SyntheticKind::nlp_like: line = nlp_line(rng); break;
            }
        }
        out += line;
        out.push_back('\n');
    }
    return out;
}

}  // namespace searchlab

#pragma once

// Tokenizers (character-level and byte-pair), corpus handling with
// deterministic splits, fixed-shape batch assembly, and the synthetic
// desk-scale corpus generators.
//
// Byte accounting convention: a Batch carries, per sequence, the byte count
// of the *predicted* span (tokens 1..m-1 of the m tokens that fit in the
// window). bits-per-byte then normalizes summed cross-entropy by exactly the
// bytes the model was scored on. Padding uses a dedicated pad token (always
// the last vocab id, zero bytes) excluded from loss and byte counts. Line
// separators are not corpus content: they are excluded from alphabets and
// byte counts.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "searchlab/config.hpp"

namespace searchlab {

struct Tokenizer {
    TokenizerKind kind = TokenizerKind::chr;
    std::vector<std::string> vocab;            // id -> byte string; pad is last and empty
    std::vector<std::pair<int, int>> merges;   // bpe only: (left id, right id) in merge order
    std::vector<int> byte_len;                 // id -> bytes contributed when predicted
    bool incomplete = false;                   // bpe stopped early (corpus too small)
    int pad_id = 0;

    int vocab_size() const { return int(vocab.size()); }

    std::vector<int> encode(const std::string& text) const;
    std::string decode(const std::vector<int>& ids) const;

    // Alphabet = unique bytes of `text` minus line separators; vocab is the
    // sorted alphabet plus the pad token.
    static Tokenizer char_tokenizer(const std::string& text);

    // Greedy pair merging over raw bytes until the vocabulary (256 byte
    // tokens + merges + pad) reaches target_vocab. Ties between equally
    // frequent pairs break on the lexicographically smallest (left, right)
    // byte strings. If no pair occurs at least twice before the target is
    // reached, stops with incomplete = true.
    static Tokenizer train_bpe(const std::string& text, int target_vocab);

    std::string save_text() const;
    static Tokenizer load_text(const std::string& text);
};

struct Corpus {
    Tokenizer tokenizer;
    std::vector<std::vector<int>> sequences;   // one per corpus line, unpadded
    std::vector<int> train_idx;
    std::vector<int> val_idx;
    int seq_len = 64;

    int pad_id() const { return tokenizer.pad_id; }

    // Tokenizes one-sequence-per-line text and builds the seeded train/val
    // split (train size = round(split_fraction * n), both splits non-empty
    // whenever n >= 2).
    static Corpus build(const std::string& text, const TrackConfig& track, std::uint64_t seed);
};

struct Batch {
    int batch_size = 0;
    int seq_len = 0;
    std::vector<int> token_ids;            // batch_size * seq_len, pad-filled
    std::vector<std::uint8_t> target_mask; // position t scored iff it predicts a real token t+1
    std::vector<double> byte_lengths;      // per sequence: bytes of the predicted span

    double total_bytes() const;
    int scored_targets() const;
};

enum class Split { train, val };

// Fixed-shape batch from explicit sequence indices (truncate/pad to seq_len).
Batch assemble_batch(const Corpus& corpus, const std::vector<int>& seq_indices);

// One epoch over a split: seeded shuffle, consecutive chunks of
// device_batch_seqs, short final batch kept. Throws config_error on an
// empty split.
std::vector<Batch> epoch_batches(const Corpus& corpus, Split split, int device_batch_seqs,
                                 std::uint64_t seed);

// Endless batch stream; epoch e reshuffles with derive_seed(seed, e).
class BatchStream {
  public:
    BatchStream(const Corpus& corpus, Split split, int device_batch_seqs, std::uint64_t seed);
    Batch next();

  private:
    const Corpus* corpus_;
    Split split_;
    int device_batch_seqs_;
    std::uint64_t seed_;
    std::uint64_t epoch_ = 0;
    std::vector<Batch> pending_;
    std::size_t pos_ = 0;
};

enum class SyntheticKind { smiles_like, protein_like, nlp_like };

SyntheticKind synthetic_kind_for(TrackName name);

// n newline-terminated sequences, deterministic in seed. The first line
// covers the full alphabet so the character vocabulary is stable:
// smiles_like uses 36 distinct characters (balanced brackets by
// construction), protein_like 23 (order-1 Markov chains), nlp_like emits
// template sentences for byte-pair training.
std::string generate_synthetic_corpus(SyntheticKind kind, int n, std::uint64_t seed);

}  // namespace searchlab

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace reed {

using TokenSeq = std::vector<std::string>;

// One text sample. label 0 = cover, 1 = stego; payload_bits is 0 exactly for
// covers. Tokens are lowercased whitespace words.
struct TextRecord {
    TokenSeq tokens;
    int label = 0;
    std::string domain;
    std::string algorithm = "cover";
    int64_t payload_bits = 0;
};

// Whitespace word tokenizer with lowercasing.
TokenSeq tokenize(std::string_view text);
std::string detokenize(const TokenSeq& tokens);

// Identity used for split disjointness: a hash of the token sequence only.
uint64_t record_identity(const TextRecord& rec);

enum class CorpusFormat { Jsonl, PlainLines };

// Sidecar metadata for plain-lines files (one text per line, no labels inside).
struct PlainMeta {
    int label = 0;
    std::string domain;
    std::string algorithm = "cover";
    int64_t payload_bits = 0;
};

// Jsonl schema per line:
//   {"text": str, "label": 0|1, "domain": str, "algorithm": str, "payload_bits": int}
// algorithm defaults to "cover", payload_bits to 0. Throws ParseError with the
// line number on malformed input and CapacityError("empty corpus") on an empty file.
std::vector<TextRecord> load_corpus(const std::string& path, CorpusFormat format,
                                    const PlainMeta& meta = {});

void save_jsonl(const std::string& path, std::span<const TextRecord> records);

struct SplitSizes {
    int64_t train_per_class = 0;
    int64_t val_per_class = 0;
    int64_t test_per_class = 0;
    int64_t total_per_class() const { return train_per_class + val_per_class + test_per_class; }
};

struct DatasetSplits {
    std::vector<TextRecord> train;
    std::vector<TextRecord> val;
    std::vector<TextRecord> test;
    uint64_t seed = 0;
};

// Deterministic class-balanced splits. Records are deduplicated by identity
// first (within each class, and stego records colliding with a cover text are
// dropped) so no token sequence can appear in two splits. Throws CapacityError
// naming the short class when the unique pool is too small.
DatasetSplits make_splits(std::span<const TextRecord> cover, std::span<const TextRecord> stego,
                          const SplitSizes& sizes, uint64_t seed);

struct TextStats {
    double avg_length = 0.0;  // AL, mean words per text
    double bpw = 0.0;         // bits per word: total payload bits / total words
};

TextStats compute_stats(std::span<const TextRecord> records);

// ---------------------------------------------------------------------------
// Synthetic corpora. Each domain draws its topic words from a private prefix
// so vocabularies are disjoint across domains; a small fixed set of function
// words is shared, which is what carries signal across domains.

struct SyntheticSpec {
    std::string name;          // domain name
    std::string topic_prefix;  // topic words are "<prefix><i>"
    int topic_words = 120;
    int sentences = 1200;
    int min_len = 8;
    int max_len = 22;
    double function_word_prob = 0.35;
    uint64_t seed = 1;
};

std::vector<TextRecord> synthesize_corpus(const SyntheticSpec& spec);

}  // namespace reed

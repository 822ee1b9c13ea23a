#include "reed/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "reed/errors.hpp"
#include "reed/util.hpp"

namespace reed {

using nlohmann::json;

TokenSeq tokenize(std::string_view text) {
    TokenSeq out;
    std::string cur;
    for (char c : text) {
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v') {
            if (!cur.empty()) {
                out.push_back(to_lower(cur));
                cur.clear();
            }
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(to_lower(cur));
    return out;
}

std::string detokenize(const TokenSeq& tokens) {
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

uint64_t record_identity(const TextRecord& rec) {
    uint64_t h = 0x6a09e667f3bcc908ull;
    for (const auto& t : rec.tokens) {
        h = fnv1a64(t, h);
        h = mix64(h ^ t.size());
    }
    return h;
}

namespace {

TextRecord record_from_json(const json& j, long line_no) {
    if (!j.is_object()) throw ParseError("expected a JSON object", line_no);
    if (!j.contains("text") || !j["text"].is_string())
        throw ParseError("missing or non-string 'text'", line_no);
    if (!j.contains("label") || !j["label"].is_number_integer())
        throw ParseError("missing or non-integer 'label'", line_no);

    TextRecord rec;
    rec.tokens = tokenize(j["text"].get<std::string>());
    long long label = j["label"].get<long long>();
    if (label != 0 && label != 1)
        throw ParseError("invalid label " + std::to_string(label), line_no);
    rec.label = static_cast<int>(label);
    if (j.contains("domain")) {
        if (!j["domain"].is_string()) throw ParseError("non-string 'domain'", line_no);
        rec.domain = j["domain"].get<std::string>();
    }
    if (j.contains("algorithm")) {
        if (!j["algorithm"].is_string()) throw ParseError("non-string 'algorithm'", line_no);
        rec.algorithm = j["algorithm"].get<std::string>();
    } else {
        rec.algorithm = rec.label == 0 ? "cover" : "";
    }
    if (j.contains("payload_bits")) {
        if (!j["payload_bits"].is_number_integer())
            throw ParseError("non-integer 'payload_bits'", line_no);
        rec.payload_bits = j["payload_bits"].get<int64_t>();
    }
    if (rec.tokens.empty()) throw ParseError("empty text", line_no);
    if (rec.payload_bits < 0) throw ParseError("negative payload_bits", line_no);
    if ((rec.payload_bits == 0) != (rec.label == 0))
        throw ParseError("payload_bits must be 0 exactly for covers", line_no);
    return rec;
}

}  // namespace

std::vector<TextRecord> load_corpus(const std::string& path, CorpusFormat format,
                                    const PlainMeta& meta) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file: " + path);

    std::vector<TextRecord> records;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (format == CorpusFormat::Jsonl) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded()) throw ParseError("invalid JSON", line_no);
            records.push_back(record_from_json(j, line_no));
        } else {
            TextRecord rec;
            rec.tokens = tokenize(line);
            if (rec.tokens.empty()) continue;  // blank line
            rec.label = meta.label;
            rec.domain = meta.domain;
            rec.algorithm = meta.algorithm;
            rec.payload_bits = meta.payload_bits;
            if ((rec.payload_bits == 0) != (rec.label == 0))
                throw ParseError("sidecar payload_bits inconsistent with label", line_no);
            records.push_back(std::move(rec));
        }
    }
    if (in.bad()) throw IoError("read failure: " + path);
    if (records.empty()) throw CapacityError("empty corpus: " + path);
    return records;
}

void save_jsonl(const std::string& path, std::span<const TextRecord> records) {
    std::ostringstream out;
    for (const auto& rec : records) {
        json j;
        j["text"] = detokenize(rec.tokens);
        j["label"] = rec.label;
        j["domain"] = rec.domain;
        j["algorithm"] = rec.algorithm;
        j["payload_bits"] = rec.payload_bits;
        out << j.dump() << '\n';
    }
    write_file(path, out.str());
}

namespace {

// Keep the first record per identity; optionally exclude identities already taken.
std::vector<TextRecord> dedupe(std::span<const TextRecord> records,
                               std::unordered_set<uint64_t>& seen) {
    std::vector<TextRecord> out;
    out.reserve(records.size());
    for (const auto& rec : records) {
        if (seen.insert(record_identity(rec)).second) out.push_back(rec);
    }
    return out;
}

}  // namespace

DatasetSplits make_splits(std::span<const TextRecord> cover, std::span<const TextRecord> stego,
                          const SplitSizes& sizes, uint64_t seed) {
    if (sizes.train_per_class < 0 || sizes.val_per_class < 0 || sizes.test_per_class < 0)
        throw ParamError("make_splits: negative split size");
    const int64_t need = sizes.total_per_class();

    std::unordered_set<uint64_t> seen;
    std::vector<TextRecord> covers = dedupe(cover, seen);
    std::vector<TextRecord> stegos = dedupe(stego, seen);

    if (static_cast<int64_t>(covers.size()) < need)
        throw CapacityError("make_splits: cover class has " + std::to_string(covers.size()) +
                            " unique records, need " + std::to_string(need));
    if (static_cast<int64_t>(stegos.size()) < need)
        throw CapacityError("make_splits: stego class has " + std::to_string(stegos.size()) +
                            " unique records, need " + std::to_string(need));

    Rng rng(derive_seed(seed, "make_splits"));
    shuffle(covers, rng);
    shuffle(stegos, rng);

    DatasetSplits splits;
    splits.seed = seed;
    auto take = [](std::vector<TextRecord>& pool, int64_t offset, int64_t n,
                   std::vector<TextRecord>& dst) {
        for (int64_t i = 0; i < n; ++i) dst.push_back(pool[static_cast<size_t>(offset + i)]);
    };
    // Covers first, then stegos; per-class counts are exact by construction.
    take(covers, 0, sizes.train_per_class, splits.train);
    take(stegos, 0, sizes.train_per_class, splits.train);
    take(covers, sizes.train_per_class, sizes.val_per_class, splits.val);
    take(stegos, sizes.train_per_class, sizes.val_per_class, splits.val);
    take(covers, sizes.train_per_class + sizes.val_per_class, sizes.test_per_class, splits.test);
    take(stegos, sizes.train_per_class + sizes.val_per_class, sizes.test_per_class, splits.test);
    return splits;
}

TextStats compute_stats(std::span<const TextRecord> records) {
    if (records.empty()) throw ParamError("compute_stats: empty record set");
    int64_t total_tokens = 0;
    int64_t total_bits = 0;
    for (const auto& rec : records) {
        total_tokens += static_cast<int64_t>(rec.tokens.size());
        total_bits += rec.payload_bits;
    }
    TextStats stats;
    stats.avg_length = static_cast<double>(total_tokens) / static_cast<double>(records.size());
    stats.bpw = total_tokens > 0
                    ? static_cast<double>(total_bits) / static_cast<double>(total_tokens)
                    : 0.0;
    return stats;
}

namespace {

const std::vector<std::string>& function_words() {
    static const std::vector<std::string> words = {
        "the", "a",  "of", "and", "to",   "in",  "is",   "on",
        "with", "for", "as", "by",  "that", "it",  "from", "at",
    };
    return words;
}

}  // namespace

std::vector<TextRecord> synthesize_corpus(const SyntheticSpec& spec) {
    if (spec.topic_words < 1) throw ParamError("synthesize_corpus: topic_words must be >= 1");
    if (spec.sentences < 1) throw ParamError("synthesize_corpus: sentences must be >= 1");
    if (spec.min_len < 1 || spec.max_len < spec.min_len)
        throw ParamError("synthesize_corpus: invalid length bounds");
    if (spec.function_word_prob < 0.0 || spec.function_word_prob > 1.0)
        throw ParamError("synthesize_corpus: function_word_prob out of [0,1]");

    // Topic words with a Zipf-like weight profile; skew is what gives the
    // language model informative conditionals.
    std::vector<std::string> topics(static_cast<size_t>(spec.topic_words));
    std::vector<double> topic_cum(topics.size());
    double acc = 0.0;
    for (size_t i = 0; i < topics.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%s%03zu", spec.topic_prefix.c_str(), i);
        topics[i] = buf;
        acc += 1.0 / static_cast<double>(i + 2);
        topic_cum[i] = acc;
    }
    for (double& c : topic_cum) c /= acc;

    const auto& funcs = function_words();
    std::vector<double> func_cum(funcs.size());
    acc = 0.0;
    for (size_t i = 0; i < funcs.size(); ++i) {
        acc += 1.0 / static_cast<double>(i + 1);
        func_cum[i] = acc;
    }
    for (double& c : func_cum) c /= acc;

    auto pick = [](const std::vector<double>& cum, double r) {
        return static_cast<size_t>(std::lower_bound(cum.begin(), cum.end(), r) - cum.begin());
    };

    Rng rng(derive_seed(spec.seed, "synthesize_corpus"));
    std::vector<TextRecord> records;
    records.reserve(static_cast<size_t>(spec.sentences));
    for (int s = 0; s < spec.sentences; ++s) {
        int64_t len = rng.uniform_int(spec.min_len, spec.max_len);
        TextRecord rec;
        rec.domain = spec.name;
        rec.tokens.reserve(static_cast<size_t>(len));
        for (int64_t i = 0; i < len; ++i) {
            if (rng.unit() < spec.function_word_prob) {
                rec.tokens.push_back(funcs[std::min(pick(func_cum, rng.unit()), funcs.size() - 1)]);
            } else {
                rec.tokens.push_back(
                    topics[std::min(pick(topic_cum, rng.unit()), topics.size() - 1)]);
            }
        }
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace reed

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "reed/corpus.hpp"

namespace reed {

// Full next-token distribution in canonical order: probability descending,
// token id ascending on ties. Sums to 1 and every entry is positive.
struct TokenDistribution {
    std::vector<std::pair<int32_t, double>> entries;
};

// Laplace-smoothed n-gram model over its own vocabulary. Ids are local to the
// model: 0=<bos>, 1=<eos>, 2=<unk>, then corpus word types in lexicographic
// order, which makes ids (and therefore canonical ordering) independent of
// corpus record order.
class NGramLM {
public:
    static constexpr int32_t kBos = 0;
    static constexpr int32_t kEos = 1;
    static constexpr int32_t kUnk = 2;
    static constexpr int32_t kReserved = 3;

    static NGramLM train(std::span<const TextRecord> corpus, int order, double delta);

    // Build from explicit counts; contexts/nexts use local ids. Words must not
    // include the reserved strings. Intended for tests and tooling.
    static NGramLM from_counts(std::vector<std::string> words, int order, double delta,
                               std::map<std::vector<int32_t>, std::map<int32_t, int64_t>> counts);

    int order() const { return order_; }
    double delta() const { return delta_; }
    int32_t vocab_size() const { return static_cast<int32_t>(vocab_.size()); }
    // Tokens the model can emit: everything except <bos>.
    int32_t predictive_vocab_size() const { return vocab_size() - 1; }

    const std::string& token(int32_t id) const;
    int32_t id_of(std::string_view token) const;  // kUnk when absent
    std::vector<int32_t> to_ids(const TokenSeq& tokens) const;
    TokenSeq to_tokens(std::span<const int32_t> ids) const;

    // Distribution over all predictive tokens given a context of local ids;
    // shorter contexts are implicitly left-padded with <bos>.
    TokenDistribution next_dist(std::span<const int32_t> context) const;

    // Ancestral sampling until <eos> or max_len tokens. May return an empty
    // token list when <eos> is sampled immediately.
    TextRecord sample_text(int max_len, uint64_t seed, const std::string& domain = "") const;

    nlohmann::json to_json() const;
    static NGramLM from_json(const nlohmann::json& j);

private:
    NGramLM() = default;
    void index_vocab();

    struct Ctx {
        std::map<int32_t, int64_t> next;
        int64_t total = 0;
    };

    int order_ = 3;
    double delta_ = 0.1;
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, int32_t> index_;
    std::map<std::vector<int32_t>, Ctx> counts_;
};

}  // namespace reed

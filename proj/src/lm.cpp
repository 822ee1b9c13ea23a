#include "reed/lm.hpp"

#include <algorithm>
#include <set>

#include "reed/errors.hpp"
#include "reed/util.hpp"

namespace reed {

using nlohmann::json;

namespace {

const char* kReservedNames[] = {"<bos>", "<eos>", "<unk>"};

bool is_reserved_string(std::string_view s) {
    return s == "<bos>" || s == "<eos>" || s == "<unk>";
}

}  // namespace

void NGramLM::index_vocab() {
    index_.clear();
    index_.reserve(vocab_.size());
    for (int32_t i = 0; i < static_cast<int32_t>(vocab_.size()); ++i) index_[vocab_[i]] = i;
}

NGramLM NGramLM::train(std::span<const TextRecord> corpus, int order, double delta) {
    if (corpus.empty()) throw ParamError("train_lm: empty corpus");
    if (order < 1) throw ParamError("train_lm: order must be >= 1");
    if (!(delta > 0.0)) throw ParamError("train_lm: delta must be > 0");

    NGramLM lm;
    lm.order_ = order;
    lm.delta_ = delta;

    std::set<std::string> types;
    for (const auto& rec : corpus) {
        for (const auto& t : rec.tokens) {
            if (!is_reserved_string(t)) types.insert(t);
        }
    }
    lm.vocab_ = {kReservedNames[0], kReservedNames[1], kReservedNames[2]};
    lm.vocab_.insert(lm.vocab_.end(), types.begin(), types.end());
    lm.index_vocab();

    const size_t ctx_len = static_cast<size_t>(order - 1);
    for (const auto& rec : corpus) {
        std::vector<int32_t> seq(ctx_len, kBos);
        for (int32_t id : lm.to_ids(rec.tokens)) seq.push_back(id);
        seq.push_back(kEos);
        for (size_t i = ctx_len; i < seq.size(); ++i) {
            std::vector<int32_t> ctx(seq.begin() + static_cast<ptrdiff_t>(i - ctx_len),
                                     seq.begin() + static_cast<ptrdiff_t>(i));
            Ctx& c = lm.counts_[ctx];
            c.next[seq[i]] += 1;
            c.total += 1;
        }
    }
    return lm;
}

NGramLM NGramLM::from_counts(std::vector<std::string> words, int order, double delta,
                             std::map<std::vector<int32_t>, std::map<int32_t, int64_t>> counts) {
    if (order < 1) throw ParamError("from_counts: order must be >= 1");
    if (!(delta > 0.0)) throw ParamError("from_counts: delta must be > 0");
    NGramLM lm;
    lm.order_ = order;
    lm.delta_ = delta;
    lm.vocab_ = {kReservedNames[0], kReservedNames[1], kReservedNames[2]};
    for (auto& w : words) {
        if (is_reserved_string(w)) throw ParamError("from_counts: reserved token in word list");
        lm.vocab_.push_back(std::move(w));
    }
    lm.index_vocab();
    for (auto& [ctx, next] : counts) {
        if (ctx.size() != static_cast<size_t>(order - 1))
            throw ParamError("from_counts: context length must be order-1");
        Ctx c;
        for (auto [id, n] : next) {
            if (id < 0 || id >= lm.vocab_size() || n < 0)
                throw ParamError("from_counts: invalid count entry");
            c.next[id] = n;
            c.total += n;
        }
        lm.counts_[ctx] = std::move(c);
    }
    return lm;
}

const std::string& NGramLM::token(int32_t id) const {
    if (id < 0 || id >= vocab_size()) throw ParamError("token id out of range");
    return vocab_[static_cast<size_t>(id)];
}

int32_t NGramLM::id_of(std::string_view tok) const {
    auto it = index_.find(std::string(tok));
    return it == index_.end() ? kUnk : it->second;
}

std::vector<int32_t> NGramLM::to_ids(const TokenSeq& tokens) const {
    std::vector<int32_t> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) {
        // Text cannot inject the structural <bos>/<eos> ids.
        int32_t id = id_of(t);
        ids.push_back(id < kUnk ? kUnk : id);
    }
    return ids;
}

TokenSeq NGramLM::to_tokens(std::span<const int32_t> ids) const {
    TokenSeq out;
    out.reserve(ids.size());
    for (int32_t id : ids) out.push_back(token(id));
    return out;
}

TokenDistribution NGramLM::next_dist(std::span<const int32_t> context) const {
    const size_t ctx_len = static_cast<size_t>(order_ - 1);
    std::vector<int32_t> ctx(ctx_len, kBos);
    size_t take = std::min(context.size(), ctx_len);
    for (size_t i = 0; i < take; ++i) {
        int32_t id = context[context.size() - take + i];
        ctx[ctx_len - take + i] = (id >= 0 && id < vocab_size()) ? id : kUnk;
    }

    const Ctx* c = nullptr;
    if (auto it = counts_.find(ctx); it != counts_.end()) c = &it->second;
    const int64_t total = c ? c->total : 0;
    const int32_t vpred = predictive_vocab_size();
    const double denom = static_cast<double>(total) + delta_ * static_cast<double>(vpred);

    // Sort by count instead of probability: same order, integer ties.
    std::vector<std::pair<int64_t, int32_t>> by_count;
    by_count.reserve(static_cast<size_t>(vpred));
    for (int32_t id = kEos; id < vocab_size(); ++id) {
        int64_t n = 0;
        if (c) {
            if (auto it = c->next.find(id); it != c->next.end()) n = it->second;
        }
        by_count.emplace_back(n, id);
    }
    std::sort(by_count.begin(), by_count.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });

    TokenDistribution dist;
    dist.entries.reserve(by_count.size());
    for (auto [n, id] : by_count)
        dist.entries.emplace_back(id, (static_cast<double>(n) + delta_) / denom);
    return dist;
}

TextRecord NGramLM::sample_text(int max_len, uint64_t seed, const std::string& domain) const {
    if (max_len < 1) throw ParamError("sample_text: max_len must be >= 1");
    Rng rng(derive_seed(seed, "sample_text"));
    std::vector<int32_t> ids;
    while (static_cast<int>(ids.size()) < max_len) {
        TokenDistribution dist = next_dist(ids);
        double r = rng.unit();
        double cum = 0.0;
        int32_t picked = dist.entries.back().first;
        for (const auto& [id, p] : dist.entries) {
            cum += p;
            if (r < cum) {
                picked = id;
                break;
            }
        }
        if (picked == kEos) break;
        ids.push_back(picked);
    }
    TextRecord rec;
    rec.tokens = to_tokens(ids);
    rec.label = 0;
    rec.domain = domain;
    rec.algorithm = "cover";
    rec.payload_bits = 0;
    return rec;
}

json NGramLM::to_json() const {
    json j;
    j["version"] = 1;
    j["kind"] = "ngram-lm";
    j["order"] = order_;
    j["delta"] = delta_;
    json words = json::array();
    for (size_t i = kReserved; i < vocab_.size(); ++i) words.push_back(vocab_[i]);
    j["vocab"] = std::move(words);
    json ctxs = json::array();
    for (const auto& [ctx, c] : counts_) {
        json e;
        e["ctx"] = ctx;
        json next = json::array();
        for (auto [id, n] : c.next) next.push_back({id, n});
        e["next"] = std::move(next);
        ctxs.push_back(std::move(e));
    }
    j["contexts"] = std::move(ctxs);
    return j;
}

NGramLM NGramLM::from_json(const json& j) {
    if (!j.is_object() || j.value("kind", "") != "ngram-lm")
        throw IoError("not an ngram-lm file");
    if (j.value("version", 0) != 1) throw IoError("unsupported ngram-lm version");
    NGramLM lm;
    lm.order_ = j.at("order").get<int>();
    lm.delta_ = j.at("delta").get<double>();
    if (lm.order_ < 1 || !(lm.delta_ > 0.0)) throw IoError("ngram-lm: invalid parameters");
    lm.vocab_ = {kReservedNames[0], kReservedNames[1], kReservedNames[2]};
    for (const auto& w : j.at("vocab")) lm.vocab_.push_back(w.get<std::string>());
    lm.index_vocab();
    for (const auto& e : j.at("contexts")) {
        std::vector<int32_t> ctx = e.at("ctx").get<std::vector<int32_t>>();
        if (ctx.size() != static_cast<size_t>(lm.order_ - 1))
            throw IoError("ngram-lm: context length mismatch");
        Ctx c;
        for (const auto& pair : e.at("next")) {
            int32_t id = pair.at(0).get<int32_t>();
            int64_t n = pair.at(1).get<int64_t>();
            if (id < 0 || id >= lm.vocab_size() || n < 0) throw IoError("ngram-lm: bad count");
            c.next[id] = n;
            c.total += n;
        }
        lm.counts_[std::move(ctx)] = std::move(c);
    }
    return lm;
}

}  // namespace reed

#include <doctest.h>

#include <cmath>
#include <map>

#include "reed/errors.hpp"
#include "reed/lm.hpp"
#include "reed/util.hpp"

using namespace reed;

namespace {

TextRecord text(std::vector<std::string> tokens) {
    TextRecord rec;
    rec.tokens = std::move(tokens);
    return rec;
}

double prob_of(const TokenDistribution& dist, int32_t id) {
    for (const auto& [tid, p] : dist.entries)
        if (tid == id) return p;
    FAIL("token id not in distribution");
    return 0.0;
}

}  // namespace

TEST_CASE("bigram counts match a hand count") {
    // Corpus {"a a a"}, order 2. Padded sequence: <bos> a a a <eos>.
    // Bigram events: (<bos>,a) (a,a) (a,a) (a,<eos>).
    // count(a|a)=2, count(context a)=3; predictive vocab {<eos>,<unk>,a} -> V=3.
    const double delta = 0.1;
    NGramLM lm = NGramLM::train(std::vector<TextRecord>{text({"a", "a", "a"})}, 2, delta);
    CHECK(lm.vocab_size() == 4);
    CHECK(lm.predictive_vocab_size() == 3);

    int32_t a = lm.id_of("a");
    REQUIRE(a >= NGramLM::kReserved);
    std::vector<int32_t> ctx{a};
    TokenDistribution dist = lm.next_dist(ctx);
    const double expect_aa = (2.0 + delta) / (3.0 + delta * 3.0);
    const double expect_aeos = (1.0 + delta) / (3.0 + delta * 3.0);
    const double expect_unseen = delta / (3.0 + delta * 3.0);
    CHECK(prob_of(dist, a) == doctest::Approx(expect_aa).epsilon(1e-12));
    CHECK(prob_of(dist, NGramLM::kEos) == doctest::Approx(expect_aeos).epsilon(1e-12));
    CHECK(prob_of(dist, NGramLM::kUnk) == doctest::Approx(expect_unseen).epsilon(1e-12));
}

TEST_CASE("smoothing ranks seen above unseen in a unigram model") {
    NGramLM lm = NGramLM::train(std::vector<TextRecord>{text({"a"})}, 1, 0.1);
    TokenDistribution dist = lm.next_dist({});
    CHECK(prob_of(dist, lm.id_of("a")) > prob_of(dist, NGramLM::kUnk));
}

TEST_CASE("parameter validation") {
    std::vector<TextRecord> corpus{text({"a"})};
    CHECK_THROWS_AS(NGramLM::train(corpus, 2, 0.0), ParamError);
    CHECK_THROWS_AS(NGramLM::train(corpus, 0, 0.1), ParamError);
    CHECK_THROWS_AS(NGramLM::train({}, 2, 0.1), ParamError);
}

TEST_CASE("unseen context gives the uniform Laplace distribution") {
    NGramLM lm = NGramLM::train(std::vector<TextRecord>{text({"a", "b"})}, 3, 0.5);
    std::vector<int32_t> ctx{lm.id_of("b"), lm.id_of("b")};  // never observed
    TokenDistribution dist = lm.next_dist(ctx);
    const double uniform = 1.0 / static_cast<double>(lm.predictive_vocab_size());
    for (const auto& [id, p] : dist.entries) CHECK(p == doctest::Approx(uniform).epsilon(1e-12));
}

TEST_CASE("argmax follows the dominant continuation") {
    std::vector<TextRecord> corpus;
    for (int i = 0; i < 10; ++i) corpus.push_back(text({"a", "b"}));
    NGramLM lm = NGramLM::train(corpus, 2, 0.1);
    std::vector<int32_t> ctx{lm.id_of("a")};
    TokenDistribution dist = lm.next_dist(ctx);
    CHECK(dist.entries.front().first == lm.id_of("b"));
}

TEST_CASE("distributions are normalized, positive, and canonically ordered") {
    SyntheticSpec spec;
    spec.name = "lmtest";
    spec.topic_prefix = "lt";
    spec.sentences = 80;
    spec.seed = 4;
    NGramLM lm = NGramLM::train(synthesize_corpus(spec), 3, 0.1);

    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int32_t> ctx;
        int len = static_cast<int>(rng.below(4));
        for (int i = 0; i < len; ++i)
            ctx.push_back(static_cast<int32_t>(rng.below(static_cast<uint64_t>(lm.vocab_size()))));
        TokenDistribution dist = lm.next_dist(ctx);
        REQUIRE(static_cast<int32_t>(dist.entries.size()) == lm.predictive_vocab_size());
        double sum = 0.0;
        for (size_t i = 0; i < dist.entries.size(); ++i) {
            auto [id, p] = dist.entries[i];
            CHECK(p > 0.0);
            sum += p;
            if (i > 0) {
                auto [pid, pp] = dist.entries[i - 1];
                CHECK((pp > p || (pp == p && pid < id)));
            }
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("sampling is deterministic and bounded") {
    SyntheticSpec spec;
    spec.name = "lmtest";
    spec.topic_prefix = "lt";
    spec.sentences = 60;
    spec.seed = 4;
    NGramLM lm = NGramLM::train(synthesize_corpus(spec), 3, 0.1);
    TextRecord a = lm.sample_text(5, 123, "d");
    TextRecord b = lm.sample_text(5, 123, "d");
    CHECK(a.tokens == b.tokens);
    CHECK(a.tokens.size() <= 5);
    CHECK(a.label == 0);
    CHECK(a.payload_bits == 0);
    TextRecord c = lm.sample_text(5, 124, "d");
    CHECK(a.tokens != c.tokens);  // overwhelmingly likely under a fresh seed
}

TEST_CASE("an absorbing <eos> yields empty or minimal samples") {
    // Hand-built unigram whose mass is almost entirely on <eos>.
    NGramLM lm = NGramLM::from_counts({"w"}, 1, 0.1,
                                      {{{}, {{NGramLM::kEos, 1000000}, {3, 1}}}});
    TextRecord rec = lm.sample_text(10, 5, "d");
    CHECK(rec.tokens.size() <= 1);
}

TEST_CASE("serialization reproduces identical distributions") {
    SyntheticSpec spec;
    spec.name = "lmser";
    spec.topic_prefix = "ls";
    spec.sentences = 40;
    spec.seed = 11;
    NGramLM lm = NGramLM::train(synthesize_corpus(spec), 3, 0.1);
    NGramLM back = NGramLM::from_json(lm.to_json());
    CHECK(back.vocab_size() == lm.vocab_size());
    CHECK(back.order() == lm.order());

    Rng rng(55);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int32_t> ctx;
        for (int i = 0; i < 2; ++i)
            ctx.push_back(static_cast<int32_t>(rng.below(static_cast<uint64_t>(lm.vocab_size()))));
        TokenDistribution d1 = lm.next_dist(ctx);
        TokenDistribution d2 = back.next_dist(ctx);
        REQUIRE(d1.entries.size() == d2.entries.size());
        for (size_t i = 0; i < d1.entries.size(); ++i) {
            CHECK(d1.entries[i].first == d2.entries[i].first);
            CHECK(d1.entries[i].second == d2.entries[i].second);  // bit-exact
        }
    }
    CHECK_THROWS_AS(NGramLM::from_json(nlohmann::json{{"kind", "other"}}), IoError);
}

TEST_CASE("unknown tokens map to <unk> at the model boundary") {
    NGramLM lm = NGramLM::train(std::vector<TextRecord>{text({"a", "b"})}, 2, 0.1);
    CHECK(lm.id_of("zzz") == NGramLM::kUnk);
    auto ids = lm.to_ids({"a", "zzz", "b"});
    CHECK(ids[1] == NGramLM::kUnk);
    // Reserved spellings in input text cannot alias <bos>/<eos>.
    auto guard = lm.to_ids({"<bos>", "<eos>", "<unk>"});
    CHECK(guard == std::vector<int32_t>{NGramLM::kUnk, NGramLM::kUnk, NGramLM::kUnk});
}

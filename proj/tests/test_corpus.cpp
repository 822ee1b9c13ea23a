#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "reed/corpus.hpp"
#include "reed/errors.hpp"
#include "reed/util.hpp"

using namespace reed;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    auto path = std::filesystem::temp_directory_path() / ("reed_corpus_" + name);
    std::ofstream out(path);
    out << content;
    return path.string();
}

TextRecord make_record(std::vector<std::string> tokens, int label = 0, int64_t payload = 0) {
    TextRecord rec;
    rec.tokens = std::move(tokens);
    rec.label = label;
    rec.payload_bits = payload;
    if (label == 1) rec.algorithm = "HC";
    return rec;
}

}  // namespace

TEST_CASE("tokenize lowercases and splits on whitespace") {
    TokenSeq tokens = tokenize("  The quick\tBROWN fox \n");
    CHECK(tokens == TokenSeq{"the", "quick", "brown", "fox"});
    CHECK(tokenize("").empty());
    CHECK(detokenize({"a", "b"}) == "a b");
}

TEST_CASE("load_corpus plain-lines applies sidecar metadata") {
    std::string path = write_temp("plain.txt", "A b c\nd e\nf g h i\n");
    PlainMeta meta;
    meta.label = 1;
    meta.domain = "dom";
    meta.algorithm = "HC";
    meta.payload_bits = 8;
    auto records = load_corpus(path, CorpusFormat::PlainLines, meta);
    REQUIRE(records.size() == 3);
    CHECK(records[0].tokens == TokenSeq{"a", "b", "c"});
    for (const auto& r : records) {
        CHECK(r.label == 1);
        CHECK(r.domain == "dom");
        CHECK(r.payload_bits == 8);
    }
}

TEST_CASE("load_corpus jsonl maps fields") {
    std::string path = write_temp(
        "ok.jsonl",
        R"({"text":"a b","label":1,"domain":"D1","algorithm":"AC","payload_bits":5})"
        "\n"
        R"({"text":"C","label":0,"domain":"D1"})"
        "\n");
    auto records = load_corpus(path, CorpusFormat::Jsonl);
    REQUIRE(records.size() == 2);
    CHECK(records[0].tokens == TokenSeq{"a", "b"});
    CHECK(records[0].label == 1);
    CHECK(records[0].payload_bits == 5);
    CHECK(records[1].tokens == TokenSeq{"c"});
    CHECK(records[1].algorithm == "cover");
}

TEST_CASE("load_corpus rejects invalid labels with the line number") {
    std::string path = write_temp("badlabel.jsonl",
                                  R"({"text":"x","label":0})"
                                  "\n"
                                  R"({"text":"y","label":2})"
                                  "\n");
    try {
        load_corpus(path, CorpusFormat::Jsonl);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK(std::string(e.what()).find("invalid label") != std::string::npos);
    }
}

TEST_CASE("load_corpus error paths") {
    CHECK_THROWS_AS(load_corpus(write_temp("empty.txt", ""), CorpusFormat::PlainLines),
                    CapacityError);
    CHECK_THROWS_AS(load_corpus(write_temp("badjson.jsonl", "{not json\n"), CorpusFormat::Jsonl),
                    ParseError);
    CHECK_THROWS_AS(
        load_corpus(write_temp("paybits.jsonl", R"({"text":"x","label":0,"payload_bits":3})"
                                                "\n"),
                    CorpusFormat::Jsonl),
        ParseError);
    CHECK_THROWS_AS(load_corpus("/nonexistent/no.jsonl", CorpusFormat::Jsonl), IoError);
}

TEST_CASE("jsonl round trip preserves records") {
    std::vector<TextRecord> records{make_record({"a", "b"}, 0), make_record({"c"}, 1, 12)};
    records[0].domain = records[1].domain = "d";
    auto path = (std::filesystem::temp_directory_path() / "reed_corpus_rt.jsonl").string();
    save_jsonl(path, records);
    auto back = load_corpus(path, CorpusFormat::Jsonl);
    REQUIRE(back.size() == 2);
    CHECK(back[0].tokens == records[0].tokens);
    CHECK(back[1].payload_bits == 12);
    CHECK(back[1].algorithm == "HC");
}

TEST_CASE("make_splits partitions exhaustively at exact capacity") {
    std::vector<TextRecord> cover, stego;
    for (int i = 0; i < 3; ++i) {
        cover.push_back(make_record({"c", std::to_string(i)}, 0));
        stego.push_back(make_record({"s", std::to_string(i)}, 1, 4));
    }
    DatasetSplits splits = make_splits(cover, stego, SplitSizes{1, 1, 1}, 7);
    for (const auto* s : {&splits.train, &splits.val, &splits.test}) {
        REQUIRE(s->size() == 2);
        CHECK((*s)[0].label + (*s)[1].label == 1);
    }
}

TEST_CASE("make_splits reports the short class") {
    std::vector<TextRecord> cover, stego;
    for (int i = 0; i < 10; ++i) {
        cover.push_back(make_record({"c", std::to_string(i)}, 0));
        stego.push_back(make_record({"s", std::to_string(i)}, 1, 4));
    }
    try {
        make_splits(cover, stego, SplitSizes{5, 5, 5}, 7);
        FAIL("expected CapacityError");
    } catch (const CapacityError& e) {
        CHECK(std::string(e.what()).find("cover") != std::string::npos);
    }
}

TEST_CASE("make_splits: disjointness, balance, determinism") {
    Rng rng(42);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<TextRecord> cover, stego;
        for (int i = 0; i < 60; ++i) {
            cover.push_back(make_record(
                {"c", std::to_string(rng.uniform_int(0, 1000)), std::to_string(i)}, 0));
            stego.push_back(make_record(
                {"s", std::to_string(rng.uniform_int(0, 1000)), std::to_string(i)}, 1, 8));
        }
        uint64_t seed = rng.next_u64();
        DatasetSplits a = make_splits(cover, stego, SplitSizes{20, 5, 10}, seed);
        DatasetSplits b = make_splits(cover, stego, SplitSizes{20, 5, 10}, seed);

        // Determinism: identical splits under the same seed.
        for (auto [sa, sb] : {std::pair(&a.train, &b.train), std::pair(&a.val, &b.val),
                              std::pair(&a.test, &b.test)}) {
            REQUIRE(sa->size() == sb->size());
            for (size_t i = 0; i < sa->size(); ++i) {
                CHECK((*sa)[i].tokens == (*sb)[i].tokens);
                CHECK((*sa)[i].label == (*sb)[i].label);
            }
        }

        // Pairwise identity disjointness and per-split class balance.
        auto identities = [](const std::vector<TextRecord>& split) {
            std::set<uint64_t> ids;
            for (const auto& r : split) ids.insert(record_identity(r));
            return ids;
        };
        auto tr = identities(a.train), va = identities(a.val), te = identities(a.test);
        for (uint64_t id : va) CHECK(tr.count(id) == 0);
        for (uint64_t id : te) {
            CHECK(tr.count(id) == 0);
            CHECK(va.count(id) == 0);
        }
        for (const auto* s : {&a.train, &a.val, &a.test}) {
            int64_t ones = 0;
            for (const auto& r : *s) ones += r.label;
            CHECK(ones * 2 == static_cast<int64_t>(s->size()));
        }
    }
}

TEST_CASE("make_splits collapses duplicate token sequences") {
    std::vector<TextRecord> cover, stego;
    for (int i = 0; i < 4; ++i) cover.push_back(make_record({"same", "cover"}, 0));
    for (int i = 0; i < 4; ++i) cover.push_back(make_record({"c", std::to_string(i)}, 0));
    for (int i = 0; i < 6; ++i) stego.push_back(make_record({"s", std::to_string(i)}, 1, 4));
    // 5 unique covers; asking for 6 must fail even though 8 raw records exist.
    CHECK_THROWS_AS(make_splits(cover, stego, SplitSizes{2, 2, 2}, 1), CapacityError);
    DatasetSplits ok = make_splits(cover, stego, SplitSizes{2, 2, 1}, 1);
    CHECK(ok.train.size() == 4);
}

TEST_CASE("compute_stats evaluates AL and BPW") {
    // Hand oracle: AL = 10 tokens / 1 record, BPW = 35 bits / 10 tokens = 3.5.
    TextRecord r1;
    for (int i = 0; i < 10; ++i) r1.tokens.push_back("t");
    r1.label = 1;
    r1.payload_bits = 35;
    TextStats st = compute_stats(std::vector<TextRecord>{r1});
    CHECK(st.avg_length == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(st.bpw == doctest::Approx(3.5).epsilon(1e-12));

    // Hand oracle: lengths 8 and 12 -> AL 10; bits 0+40 over 20 words -> 2.0.
    TextRecord r2, r3;
    for (int i = 0; i < 8; ++i) r2.tokens.push_back("a");
    for (int i = 0; i < 12; ++i) r3.tokens.push_back("b");
    r3.label = 1;
    r3.payload_bits = 40;
    TextStats st2 = compute_stats(std::vector<TextRecord>{r2, r3});
    CHECK(st2.avg_length == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(st2.bpw == doctest::Approx(2.0).epsilon(1e-12));

    // Pure cover set has zero BPW; empty input is an error.
    TextStats st3 = compute_stats(std::vector<TextRecord>{r2});
    CHECK(st3.bpw == 0.0);
    CHECK_THROWS_AS(compute_stats(std::vector<TextRecord>{}), ParamError);
}

TEST_CASE("synthesize_corpus is deterministic with domain-private topic words") {
    SyntheticSpec spec;
    spec.name = "alpha";
    spec.topic_prefix = "alpha";
    spec.sentences = 50;
    spec.seed = 9;
    auto a = synthesize_corpus(spec);
    auto b = synthesize_corpus(spec);
    REQUIRE(a.size() == 50);
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].tokens == b[i].tokens);

    spec.name = "beta";
    spec.topic_prefix = "beta";
    auto c = synthesize_corpus(spec);
    std::set<std::string> alpha_topics, beta_topics;
    for (const auto& r : a)
        for (const auto& t : r.tokens)
            if (t.rfind("alpha", 0) == 0) alpha_topics.insert(t);
    for (const auto& r : c)
        for (const auto& t : r.tokens) {
            CHECK(t.rfind("alpha", 0) != 0);  // no cross-domain topic leakage
            if (t.rfind("beta", 0) == 0) beta_topics.insert(t);
        }
    CHECK(!alpha_topics.empty());
    CHECK(!beta_topics.empty());
}

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "reed/errors.hpp"
#include "reed/pipeline.hpp"
#include "reed/stego.hpp"
#include "reed/util.hpp"

using namespace reed;
namespace fs = std::filesystem;

namespace {

nlohmann::json tiny_config_json(const std::string& out_dir) {
    return nlohmann::json{
        {"output_dir", out_dir},
        {"seed", 11},
        {"domains",
         {{{"name", "alpha"},
           {"synthetic",
            {{"topic_prefix", "alpha"}, {"topic_words", 60}, {"sentences", 300}}}},
          {{"name", "beta"},
           {"synthetic",
            {{"topic_prefix", "beta"}, {"topic_words", 60}, {"sentences", 300}}}}}},
        {"algorithms", {"HC", "AC"}},
        {"splits", {{"train_per_class", 40}, {"val_per_class", 12}, {"test_per_class", 16}}},
        {"coder", {{"pool_size", 8}, {"max_len", 200}, {"min_len", 3}}},
        {"payload", {{"min_bits", 16}, {"max_bits", 40}}},
        {"detector",
         {{"feature_dim", 256}, {"repr_dim", 16}, {"epochs", 4}, {"batch_size", 16}}},
        {"editing",
         {{"alpha", 1.0},
          {"lambda_by_algorithm", {{"HC", 2.4}, {"AC", 5.0}}},
          {"offset_samples", 30},
          {"direction_samples", 30}}},
        {"ttem", {{"batch_size", 8}}},
    };
}

std::string fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    return dir.string();
}

std::map<std::string, std::string> snapshot_files(const std::string& root,
                                                  const std::string& ext) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file() && entry.path().extension() == ext)
            out[fs::relative(entry.path(), root).string()] = read_file(entry.path().string());
    }
    return out;
}

}  // namespace

TEST_CASE("config parsing, validation, and hashing") {
    ExperimentConfig cfg = parse_config(tiny_config_json("x"));
    CHECK(cfg.domains.size() == 2);
    CHECK(cfg.algorithms == std::vector<std::string>{"HC", "AC"});
    CHECK(cfg.lambda_for("HC") == 2.4);
    CHECK(cfg.lambda_for("ZZZ") == 0.0);
    CHECK(cfg.effective_lambda_grid().size() == 101);

    // The hash identifies the protocol, not where outputs land.
    ExperimentConfig other = parse_config(tiny_config_json("y"));
    CHECK(cfg.config_hash() == other.config_hash());
    other.seed = 12;
    CHECK(cfg.config_hash() != other.config_hash());

    nlohmann::json bad = tiny_config_json("x");
    bad["algorithms"] = {"HC", "LSB"};
    CHECK_THROWS_AS(parse_config(bad), Error);
    bad = tiny_config_json("x");
    bad.erase("domains");
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
    bad = tiny_config_json("x");
    bad["domains"][0].erase("synthetic");
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
    bad = tiny_config_json("x");
    bad["splits"]["train_per_class"] = 0;
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
    bad = tiny_config_json("x");
    bad["ttem"]["learning_rate"] = 0.0;
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
}

TEST_CASE("full mini pipeline: artifacts, shapes, and provenance") {
    ExperimentConfig cfg = parse_config(tiny_config_json(fresh_dir("reed_pipe_full")));
    ResultsTable table = run_full_pipeline(cfg);
    PipelinePaths paths(cfg.output_dir);

    // 2 algorithms x 2 directed tasks x 4 methods.
    CHECK(table.rows.size() == 2 * 2 * 4);
    std::set<std::string> methods;
    for (const auto& r : table.rows) {
        methods.insert(r.method);
        CHECK(r.confusion.total() == 32);  // 16 per class in the target test split
        CHECK(r.acc >= 0.0);
        CHECK(r.acc <= 1.0);
        CHECK(r.f1 >= 0.0);
        CHECK(r.f1 <= 1.0);
        CHECK(r.source != r.target);
    }
    CHECK(methods == std::set<std::string>{"baseline", "reed-da", "reed-dg", "ttem"});

    for (const char* f :
         {"config.snapshot.json", "data/stats.csv", "results/results.csv",
          "results/results.txt"}) {
        CHECK(file_exists(cfg.output_dir + "/" + std::string(f)));
    }
    CHECK(file_exists(paths.lm_file("alpha")));
    CHECK(file_exists(paths.model_file("alpha", "HC")));
    CHECK(file_exists(paths.offset_file("AC", "beta", "alpha")));
    CHECK(file_exists(paths.direction_file("HC", "beta")));

    // Splits on disk hold what the coders wrote: balanced, with payload bits.
    auto test_split = load_corpus(paths.split_file("alpha", "HC", "test"),
                                  CorpusFormat::Jsonl);
    CHECK(test_split.size() == 32);
    int64_t stego_count = 0;
    for (const auto& r : test_split) {
        if (r.label == 1) {
            ++stego_count;
            CHECK(r.algorithm == "HC");
            CHECK(r.payload_bits >= 16);
            CHECK(r.payload_bits <= 40);
        }
    }
    CHECK(stego_count == 16);

    // Stats: one cover row per domain plus one row per (domain, algorithm).
    std::string stats = read_file(paths.stats_file());
    CHECK(stats.find("alpha,cover,") != std::string::npos);
    CHECK(stats.find("alpha,HC,") != std::string::npos);
    CHECK(stats.find("beta,AC,") != std::string::npos);

    // Stage isolation: evaluate rewrites results only, never data or models.
    std::string model_bytes = read_file(paths.model_file("alpha", "HC"));
    std::string split_bytes = read_file(paths.split_file("alpha", "HC", "train"));
    stage_evaluate(cfg);
    CHECK(read_file(paths.model_file("alpha", "HC")) == model_bytes);
    CHECK(read_file(paths.split_file("alpha", "HC", "train")) == split_bytes);

    // The stego half of each pool decodes back through the saved LM.
    NGramLM lm = NGramLM::from_json(nlohmann::json::parse(read_file(paths.lm_file("alpha"))));
    CoderParams params = cfg.coder;
    params.coder = Coder::HC;
    int checked = 0;
    for (const auto& r : test_split) {
        if (r.label != 1) continue;
        // Payload bits are derived from the record's generation seed, which is
        // not stored; a successful structural decode is what we verify here.
        BitString bits = stego_decode(lm, r.tokens, static_cast<size_t>(r.payload_bits), params);
        CHECK(bits.size() == static_cast<size_t>(r.payload_bits));
        if (++checked >= 4) break;
    }
}

TEST_CASE("in-domain sanity: offset editing roughly preserves accuracy") {
    ExperimentConfig cfg = parse_config(tiny_config_json(fresh_dir("reed_pipe_indomain")));
    cfg.algorithms = {"HC"};
    stage_gen_data(cfg);
    stage_train(cfg);

    PipelinePaths paths(cfg.output_dir);
    DetectorModel model = load_model(paths.model_file("alpha", "HC"));
    auto train = load_corpus(paths.split_file("alpha", "HC", "train"), CorpusFormat::Jsonl);
    auto test = load_corpus(paths.split_file("alpha", "HC", "test"), CorpusFormat::Jsonl);

    // Source == target: the offset is estimated between two samples of the
    // same distribution, so it is small and barely moves the metrics.
    std::vector<TokenSeq> toks = tokens_of(train);
    EditVector ev = estimate_offset(model, toks, toks, 1.0, SampleBudget{30, 1},
                                    SampleBudget{30, 2});
    double norm = 0.0;
    for (double v : ev.v_sub) norm += v * v;
    norm = std::sqrt(norm);
    CHECK(norm < 0.5);

    auto features = featurize_records(test, model.feature_dim(), model.feature_seed());
    MethodSpec base;
    base.method = Method::Baseline;
    MethodSpec da;
    da.method = Method::ReedDa;
    da.offset = ev;
    TaskMeta meta{"HC", "alpha", "alpha", cfg.seed};
    TaskResult rb = run_task(model, features, base, meta);
    TaskResult rd = run_task(model, features, da, meta);
    CHECK(std::abs(rb.acc - rd.acc) <= 0.02 + 1e-12);
}

TEST_CASE("rerunning a stage produces byte-identical outputs") {
    ExperimentConfig cfg = parse_config(tiny_config_json(fresh_dir("reed_pipe_determinism")));
    cfg.algorithms = {"HC"};
    run_full_pipeline(cfg);
    stage_sweep_alpha(cfg);
    stage_sweep_lambda(cfg);

    auto csv_before = snapshot_files(cfg.output_dir, ".csv");
    auto jsonl_before = snapshot_files(cfg.output_dir, ".jsonl");
    REQUIRE(!csv_before.empty());
    REQUIRE(!jsonl_before.empty());

    run_full_pipeline(cfg);
    stage_sweep_alpha(cfg);
    stage_sweep_lambda(cfg);

    CHECK(snapshot_files(cfg.output_dir, ".csv") == csv_before);
    CHECK(snapshot_files(cfg.output_dir, ".jsonl") == jsonl_before);
}

TEST_CASE("stale upstream artifacts are refused with an explanation") {
    ExperimentConfig cfg = parse_config(tiny_config_json(fresh_dir("reed_pipe_stale")));
    cfg.algorithms = {"HC"};
    run_full_pipeline(cfg);

    // A changed config no longer matches the generated data.
    ExperimentConfig changed = cfg;
    changed.seed = 999;
    CHECK_THROWS_AS(stage_train(changed), StaleArtifactError);
    CHECK_THROWS_AS(stage_evaluate(changed), StaleArtifactError);

    // A retrained/tampered model no longer matches the stored vectors.
    PipelinePaths paths(cfg.output_dir);
    nlohmann::json mj = nlohmann::json::parse(read_file(paths.model_file("alpha", "HC")));
    mj["b2"][0] = "0.125";
    write_file(paths.model_file("alpha", "HC"), mj.dump());
    CHECK_THROWS_AS(stage_evaluate(cfg), StaleArtifactError);
}

TEST_CASE("a failed task yields a partial table with failure markers") {
    ExperimentConfig cfg = parse_config(tiny_config_json(fresh_dir("reed_pipe_partial")));
    cfg.algorithms = {"HC"};
    cfg.methods = {"baseline"};
    run_full_pipeline(cfg);

    PipelinePaths paths(cfg.output_dir);
    fs::remove(paths.split_file("beta", "HC", "test"));  // alpha->beta now fails
    ResultsTable table = stage_evaluate(cfg);
    REQUIRE(table.failures.size() == 1);
    CHECK(table.failures[0].find("target=beta") != std::string::npos);
    CHECK(table.rows.size() == 1);  // beta->alpha still evaluated
    CHECK(table.rows[0].target == "alpha");

    std::string csv = read_file(paths.results_csv());
    CHECK(csv.find("# FAILED algorithm=HC source=alpha target=beta") != std::string::npos);
}

TEST_CASE("evaluate without vectors yields a baseline-only table") {
    ExperimentConfig cfg = parse_config(tiny_config_json(fresh_dir("reed_pipe_novec")));
    cfg.algorithms = {"HC"};
    stage_gen_data(cfg);
    stage_train(cfg);
    ResultsTable table = stage_evaluate(cfg);  // reed-da/reed-dg skipped, ttem runs
    std::set<std::string> methods;
    for (const auto& r : table.rows) methods.insert(r.method);
    CHECK(methods == std::set<std::string>{"baseline", "ttem"});
    CHECK(table.rows.size() == 2 * 2);
}

TEST_CASE("lambda sweep stage writes the full grid and a selection") {
    ExperimentConfig cfg = parse_config(tiny_config_json(fresh_dir("reed_pipe_sweep")));
    cfg.algorithms = {"HC"};
    stage_gen_data(cfg);
    stage_train(cfg);
    stage_edit_vectors(cfg);
    stage_sweep_lambda(cfg);

    PipelinePaths paths(cfg.output_dir);
    std::string csv = read_file(paths.lambda_sweep_csv("HC", "alpha"));
    int64_t lines = std::count(csv.begin(), csv.end(), '\n');
    CHECK(lines == 103);  // comment + header + 101 grid rows

    nlohmann::json sel = nlohmann::json::parse(read_file(paths.lambda_selected()));
    CHECK(sel.at("selected").contains("HC__alpha"));
    CHECK(sel.at("selected").contains("HC__beta"));
    double lam = sel["selected"]["HC__alpha"].get<double>();
    CHECK(lam >= 0.0);
    CHECK(lam <= 10.0);

    // The selected value can be applied explicitly.
    ResultsTable table = stage_evaluate(cfg, /*use_selected_lambda=*/true);
    for (const auto& r : table.rows) {
        if (r.method == "reed-dg" && r.source == "alpha")
            CHECK(r.lambda == lam);
    }
}

TEST_CASE("results CSV carries the provenance header and exact column set") {
    ExperimentConfig cfg = parse_config(tiny_config_json(fresh_dir("reed_pipe_csv")));
    cfg.algorithms = {"HC"};
    cfg.methods = {"baseline"};
    run_full_pipeline(cfg);
    std::string csv = read_file(PipelinePaths(cfg.output_dir).results_csv());
    CHECK(csv.rfind("# config_hash=" + cfg.config_hash(), 0) == 0);
    CHECK(csv.find("algorithm,source,target,method,tp,tn,fp,fn,acc,f1,alpha,lambda,seed,"
                   "model_checksum\n") != std::string::npos);
}

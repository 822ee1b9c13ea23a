#include "reed/config.hpp"

#include <algorithm>
#include <set>

#include "reed/errors.hpp"
#include "reed/eval.hpp"
#include "reed/util.hpp"

namespace reed {

using nlohmann::json;

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    ExperimentConfig cfg;
    cfg.output_dir = get_or<std::string>(j, "output_dir", cfg.output_dir);
    cfg.seed = get_or<uint64_t>(j, "seed", cfg.seed);

    if (!j.contains("domains") || !j.at("domains").is_array() || j.at("domains").empty())
        throw ConfigError("config needs a non-empty 'domains' array");
    for (const auto& dj : j.at("domains")) {
        DomainSpec d;
        d.name = get_or<std::string>(dj, "name", "");
        if (d.name.empty()) throw ConfigError("every domain needs a 'name'");
        if (dj.contains("synthetic")) {
            const json& sj = dj.at("synthetic");
            SyntheticSpec s;
            s.name = d.name;
            s.topic_prefix = get_or<std::string>(sj, "topic_prefix", d.name);
            s.topic_words = get_or<int>(sj, "topic_words", s.topic_words);
            s.sentences = get_or<int>(sj, "sentences", s.sentences);
            s.min_len = get_or<int>(sj, "min_len", s.min_len);
            s.max_len = get_or<int>(sj, "max_len", s.max_len);
            s.function_word_prob = get_or<double>(sj, "function_word_prob", s.function_word_prob);
            // Per-domain seed derives from the experiment seed and the name.
            d.synthetic = s;
        }
        if (dj.contains("corpus_path"))
            d.corpus_path = get_or<std::string>(dj, "corpus_path", "");
        cfg.domains.push_back(std::move(d));
    }

    cfg.algorithms = get_or<std::vector<std::string>>(j, "algorithms", {"HC"});

    if (j.contains("splits")) {
        const json& sj = j.at("splits");
        cfg.splits.train_per_class = get_or<int64_t>(sj, "train_per_class", 1000);
        cfg.splits.val_per_class = get_or<int64_t>(sj, "val_per_class", 200);
        cfg.splits.test_per_class = get_or<int64_t>(sj, "test_per_class", 300);
    } else {
        cfg.splits = SplitSizes{1000, 200, 300};
    }

    if (j.contains("lm")) {
        cfg.lm.order = get_or<int>(j.at("lm"), "order", cfg.lm.order);
        cfg.lm.delta = get_or<double>(j.at("lm"), "delta", cfg.lm.delta);
    }

    if (j.contains("coder")) {
        const json& cj = j.at("coder");
        cfg.coder.pool_size = get_or<int>(cj, "pool_size", cfg.coder.pool_size);
        cfg.coder.precision_bits = get_or<int>(cj, "precision_bits", cfg.coder.precision_bits);
        cfg.coder.min_len = get_or<int>(cj, "min_len", cfg.coder.min_len);
        cfg.coder.max_len = get_or<int>(cj, "max_len", cfg.coder.max_len);
    }

    if (j.contains("payload")) {
        cfg.payload.min_bits = get_or<int>(j.at("payload"), "min_bits", cfg.payload.min_bits);
        cfg.payload.max_bits = get_or<int>(j.at("payload"), "max_bits", cfg.payload.max_bits);
    }

    if (j.contains("detector")) {
        const json& dj = j.at("detector");
        cfg.detector.feature_dim = get_or<int>(dj, "feature_dim", cfg.detector.feature_dim);
        cfg.detector.repr_dim = get_or<int>(dj, "repr_dim", cfg.detector.repr_dim);
        cfg.detector.learning_rate = get_or<double>(dj, "learning_rate", cfg.detector.learning_rate);
        cfg.detector.epochs = get_or<int>(dj, "epochs", cfg.detector.epochs);
        cfg.detector.batch_size = get_or<int>(dj, "batch_size", cfg.detector.batch_size);
    }

    if (j.contains("editing")) {
        const json& ej = j.at("editing");
        cfg.editing.alpha = get_or<double>(ej, "alpha", cfg.editing.alpha);
        if (ej.contains("lambda_by_algorithm")) {
            for (const auto& [k, v] : ej.at("lambda_by_algorithm").items())
                cfg.editing.lambda_by_algorithm[k] = v.get<double>();
        }
        cfg.editing.offset_samples =
            get_or<int64_t>(ej, "offset_samples", cfg.editing.offset_samples);
        cfg.editing.direction_samples =
            get_or<int64_t>(ej, "direction_samples", cfg.editing.direction_samples);
        if (ej.contains("alpha_grid"))
            cfg.editing.alpha_grid = ej.at("alpha_grid").get<std::vector<double>>();
        if (ej.contains("lambda_grid"))
            cfg.editing.lambda_grid = ej.at("lambda_grid").get<std::vector<double>>();
    }

    if (j.contains("ttem")) {
        const json& tj = j.at("ttem");
        cfg.ttem.learning_rate = get_or<double>(tj, "learning_rate", cfg.ttem.learning_rate);
        cfg.ttem.steps_per_batch = get_or<int>(tj, "steps_per_batch", cfg.ttem.steps_per_batch);
        cfg.ttem.batch_size = get_or<int>(tj, "batch_size", cfg.ttem.batch_size);
        cfg.ttem.classifier_only =
            get_or<std::string>(tj, "update", "all") == "classifier-only";
    }

    if (j.contains("methods")) cfg.methods = j.at("methods").get<std::vector<std::string>>();

    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    if (!file_exists(path)) throw ConfigError("config file not found: " + path);
    json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
    return parse_config(j);
}

void ExperimentConfig::validate() const {
    if (domains.empty()) throw ConfigError("no domains configured");
    std::set<std::string> names;
    for (const auto& d : domains) {
        if (!names.insert(d.name).second) throw ConfigError("duplicate domain name: " + d.name);
        if (!d.synthetic && !d.corpus_path)
            throw ConfigError("domain '" + d.name + "' needs 'synthetic' or 'corpus_path'");
        if (d.corpus_path && !file_exists(*d.corpus_path))
            throw ConfigError("domain '" + d.name + "': corpus file not found: " + *d.corpus_path);
    }
    if (algorithms.empty()) throw ConfigError("no algorithms configured");
    for (const auto& a : algorithms) {
        try {
            coder_from_name(a);
        } catch (const ParamError& e) {
            throw ConfigError(e.what());
        }
    }
    if (splits.train_per_class < 1 || splits.val_per_class < 1 || splits.test_per_class < 1)
        throw ConfigError("split sizes must all be >= 1");
    if (lm.order < 1 || !(lm.delta > 0.0)) throw ConfigError("invalid lm config");
    try {
        CoderParams p = coder;
        for (const auto& a : algorithms) {
            p.coder = coder_from_name(a);
            p.validate();
        }
    } catch (const ParamError& e) {
        throw ConfigError(std::string("coder config: ") + e.what());
    }
    if (payload.min_bits < 0 || payload.max_bits < payload.min_bits)
        throw ConfigError("invalid payload bit range");
    if (editing.offset_samples < 1 || editing.direction_samples < 1)
        throw ConfigError("estimation sample budgets must be >= 1");
    if (editing.alpha_grid.empty()) throw ConfigError("alpha_grid must not be empty");
    for (const auto& m : methods) {
        try {
            method_from_name(m);
        } catch (const ParamError& e) {
            throw ConfigError(e.what());
        }
    }
    try {
        ttem.validate();
    } catch (const ParamError& e) {
        throw ConfigError(std::string("ttem config: ") + e.what());
    }
    if (!(ttem.learning_rate > 0.0))
        throw ConfigError("ttem config: learning_rate must be > 0");
}

json ExperimentConfig::canonical_json() const {
    // output_dir is deliberately absent: the hash identifies the experiment
    // protocol, not where its artifacts land.
    json j;
    j["seed"] = seed;
    json domains_j = json::array();
    for (const auto& d : domains) {
        json dj;
        dj["name"] = d.name;
        if (d.synthetic) {
            const SyntheticSpec& s = *d.synthetic;
            dj["synthetic"] = {{"topic_prefix", s.topic_prefix},
                               {"topic_words", s.topic_words},
                               {"sentences", s.sentences},
                               {"min_len", s.min_len},
                               {"max_len", s.max_len},
                               {"function_word_prob", s.function_word_prob}};
        }
        if (d.corpus_path) dj["corpus_path"] = *d.corpus_path;
        domains_j.push_back(std::move(dj));
    }
    j["domains"] = std::move(domains_j);
    j["algorithms"] = algorithms;
    j["splits"] = {{"train_per_class", splits.train_per_class},
                   {"val_per_class", splits.val_per_class},
                   {"test_per_class", splits.test_per_class}};
    j["lm"] = {{"order", lm.order}, {"delta", lm.delta}};
    j["coder"] = {{"pool_size", coder.pool_size},
                  {"precision_bits", coder.precision_bits},
                  {"min_len", coder.min_len},
                  {"max_len", coder.max_len}};
    j["payload"] = {{"min_bits", payload.min_bits}, {"max_bits", payload.max_bits}};
    j["detector"] = {{"feature_dim", detector.feature_dim},
                     {"repr_dim", detector.repr_dim},
                     {"learning_rate", detector.learning_rate},
                     {"epochs", detector.epochs},
                     {"batch_size", detector.batch_size}};
    j["editing"] = {{"alpha", editing.alpha},
                    {"lambda_by_algorithm", editing.lambda_by_algorithm},
                    {"offset_samples", editing.offset_samples},
                    {"direction_samples", editing.direction_samples},
                    {"alpha_grid", editing.alpha_grid},
                    {"lambda_grid", effective_lambda_grid()}};
    j["ttem"] = {{"learning_rate", ttem.learning_rate},
                 {"steps_per_batch", ttem.steps_per_batch},
                 {"batch_size", ttem.batch_size},
                 {"update", ttem.classifier_only ? "classifier-only" : "all"}};
    j["methods"] = methods;
    return j;
}

std::string ExperimentConfig::config_hash() const {
    uint64_t h = fnv1a64(canonical_json().dump());
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

double ExperimentConfig::lambda_for(const std::string& algorithm) const {
    auto it = editing.lambda_by_algorithm.find(algorithm);
    if (it != editing.lambda_by_algorithm.end()) return it->second;
    return 0.0;
}

std::vector<double> ExperimentConfig::effective_lambda_grid() const {
    if (!editing.lambda_grid.empty()) return editing.lambda_grid;
    std::vector<double> grid;
    grid.reserve(101);
    for (int i = 0; i <= 100; ++i) grid.push_back(static_cast<double>(i) / 10.0);
    return grid;
}

}  // namespace reed

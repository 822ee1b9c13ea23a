#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "reed/corpus.hpp"
#include "reed/detector.hpp"
#include "reed/stego.hpp"
#include "reed/ttem.hpp"

namespace reed {

// One corpus per domain: either synthesized on the fly or loaded from a
// user-supplied jsonl/plain file of cover texts.
struct DomainSpec {
    std::string name;
    std::optional<SyntheticSpec> synthetic;
    std::optional<std::string> corpus_path;  // plain-lines cover texts
};

struct LmConfig {
    int order = 3;
    double delta = 0.1;
};

struct PayloadConfig {
    int min_bits = 32;
    int max_bits = 96;
};

struct EditingConfig {
    double alpha = 1.0;
    std::map<std::string, double> lambda_by_algorithm;  // may list unimplemented coders
    int64_t offset_samples = 1000;
    int64_t direction_samples = 1000;
    std::vector<double> alpha_grid = {0.0, 0.25, 0.5, 1.0, 1.5, 2.0};
    std::vector<double> lambda_grid;  // empty -> default 0.0..10.0 step 0.1
};

// The whole experiment protocol as data. Every stage derives all of its
// randomness from `seed`, so a config fully determines every output byte.
struct ExperimentConfig {
    std::string output_dir = "out";
    uint64_t seed = 1;
    std::vector<DomainSpec> domains;
    std::vector<std::string> algorithms;  // subset of HC, AC, ADG
    SplitSizes splits;
    LmConfig lm;
    CoderParams coder;
    PayloadConfig payload;
    DetectorHparams detector;
    EditingConfig editing;
    TtemConfig ttem;
    std::vector<std::string> methods = {"baseline", "reed-da", "reed-dg", "ttem"};

    // Raw parsed JSON (defaults filled in); hashed for provenance.
    nlohmann::json canonical_json() const;
    std::string config_hash() const;

    double lambda_for(const std::string& algorithm) const;
    std::vector<double> effective_lambda_grid() const;

    void validate() const;  // throws ConfigError
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

}  // namespace reed

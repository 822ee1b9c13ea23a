#pragma once

#include <iosfwd>
#include <string>

#include "reed/config.hpp"
#include "reed/eval.hpp"

namespace reed {

// Artifact layout under the experiment output directory. Every stage writes
// to its own subtree; evaluate never touches data/ or models/.
struct PipelinePaths {
    std::string root;

    explicit PipelinePaths(std::string root_dir) : root(std::move(root_dir)) {}

    std::string config_snapshot() const { return root + "/config.snapshot.json"; }
    std::string lm_file(const std::string& domain) const {
        return root + "/data/" + domain + "/lm.json";
    }
    std::string split_file(const std::string& domain, const std::string& algo,
                           const std::string& split) const {
        return root + "/data/" + domain + "/" + algo + "/" + split + ".jsonl";
    }
    std::string stats_file() const { return root + "/data/stats.csv"; }
    std::string model_file(const std::string& source, const std::string& algo) const {
        return root + "/models/" + source + "__" + algo + ".json";
    }
    std::string offset_file(const std::string& algo, const std::string& src,
                            const std::string& tgt) const {
        return root + "/vectors/offset__" + algo + "__" + src + "__" + tgt + ".json";
    }
    std::string direction_file(const std::string& algo, const std::string& src) const {
        return root + "/vectors/direction__" + algo + "__" + src + ".json";
    }
    std::string results_csv() const { return root + "/results/results.csv"; }
    std::string results_text() const { return root + "/results/results.txt"; }
    std::string alpha_sweep_csv(const std::string& algo, const std::string& src,
                                const std::string& tgt) const {
        return root + "/sweeps/alpha__" + algo + "__" + src + "__" + tgt + ".csv";
    }
    std::string lambda_sweep_csv(const std::string& algo, const std::string& src) const {
        return root + "/sweeps/lambda__" + algo + "__" + src + ".csv";
    }
    std::string lambda_selected() const { return root + "/sweeps/lambda_selected.json"; }
};

// Stage commands. Each verifies upstream artifacts (config hash, model
// checksums) and refuses to run on stale inputs.
void stage_gen_data(const ExperimentConfig& cfg);
void stage_train(const ExperimentConfig& cfg);
void stage_edit_vectors(const ExperimentConfig& cfg);
ResultsTable stage_evaluate(const ExperimentConfig& cfg, bool use_selected_lambda = false);
void stage_sweep_alpha(const ExperimentConfig& cfg);
void stage_sweep_lambda(const ExperimentConfig& cfg);
void stage_stats(const ExperimentConfig& cfg, std::ostream& out);

// gen-data + train + edit-vectors + evaluate in one call.
ResultsTable run_full_pipeline(const ExperimentConfig& cfg, bool use_selected_lambda = false);

// Fast self-diagnosis: gradient checks, coder round trips, identity edits,
// frozen-model checksums. Prints one line per check; returns the failure count.
int run_selfcheck(std::ostream& out);

// Rendering helpers (also used by tests).
std::string results_to_csv(const ResultsTable& table, const std::string& config_hash,
                           uint64_t seed);
std::string results_to_text(const ResultsTable& table);

}  // namespace reed

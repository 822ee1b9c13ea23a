// reedbench — command-line front end for the representation-editing
// steganalysis workbench. One experiment config drives every stage:
//
//   reedbench gen-data     --config cfg.json     synthesize corpora, stego data, splits
//   reedbench train        --config cfg.json     train + freeze per-source detectors
//   reedbench edit-vectors --config cfg.json     estimate offset / direction vectors
//   reedbench evaluate     --config cfg.json     run directed transfer tasks
//   reedbench sweep        --config cfg.json --kind alpha|lambda
//   reedbench stats        --config cfg.json     print dataset AL/BPW table
//   reedbench selfcheck                          run built-in diagnostics
//
// Exit codes: 0 success, 1 config/validation failure, 2 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "reed/config.hpp"
#include "reed/errors.hpp"
#include "reed/pipeline.hpp"
#include "reed/util.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string output_dir;  // overrides config
    uint64_t seed = 0;
    bool seed_set = false;
};

reed::ExperimentConfig load(const CommonOpts& opts) {
    reed::ExperimentConfig cfg = reed::load_config(opts.config_path);
    if (!opts.output_dir.empty()) cfg.output_dir = opts.output_dir;
    if (opts.seed_set) cfg.seed = opts.seed;
    // REEDBENCH_OUT provides the default root for relative output dirs.
    if (const char* root = std::getenv("REEDBENCH_OUT");
        root && *root && !std::filesystem::path(cfg.output_dir).is_absolute()) {
        cfg.output_dir = (std::filesystem::path(root) / cfg.output_dir).string();
    }
    cfg.validate();
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "experiment config file (JSON)")
        ->required();
    cmd->add_option("--output-dir", opts.output_dir, "override the config output_dir");
    auto* seed_opt = cmd->add_option("--seed", opts.seed, "override the config seed");
    cmd->callback([&opts, seed_opt] { opts.seed_set = seed_opt->count() > 0; });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"reedbench: cross-domain text steganalysis workbench"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string sweep_kind = "alpha";
    bool use_selected_lambda = false;

    CLI::App* gen = app.add_subcommand("gen-data", "build corpora, stego texts, and splits");
    add_common(gen, opts);
    CLI::App* train = app.add_subcommand("train", "train and freeze source-domain detectors");
    add_common(train, opts);
    CLI::App* vectors = app.add_subcommand("edit-vectors", "estimate editing vectors");
    add_common(vectors, opts);
    CLI::App* evaluate = app.add_subcommand("evaluate", "run directed transfer tasks");
    add_common(evaluate, opts);
    evaluate->add_flag("--use-selected-lambda", use_selected_lambda,
                       "apply the sweep-selected lambda instead of the config value");
    CLI::App* sweep = app.add_subcommand("sweep", "editing-strength sweeps");
    add_common(sweep, opts);
    sweep->add_option("--kind", sweep_kind, "alpha or lambda")
        ->check(CLI::IsMember({"alpha", "lambda"}));
    CLI::App* stats = app.add_subcommand("stats", "print the dataset statistics table");
    add_common(stats, opts);
    CLI::App* selfcheck = app.add_subcommand("selfcheck", "run built-in diagnostics");

    CLI11_PARSE(app, argc, argv);

    try {
        if (selfcheck->parsed()) {
            int failures = reed::run_selfcheck(std::cout);
            if (failures > 0) {
                std::cerr << "selfcheck: " << failures << " check(s) failed\n";
                return 2;
            }
            std::cout << "selfcheck: all checks passed\n";
            return 0;
        }

        reed::ExperimentConfig cfg = load(opts);
        if (gen->parsed()) {
            reed::stage_gen_data(cfg);
            std::cout << "gen-data: wrote datasets under " << cfg.output_dir << "\n";
        } else if (train->parsed()) {
            reed::stage_train(cfg);
            std::cout << "train: wrote models under " << cfg.output_dir << "/models\n";
        } else if (vectors->parsed()) {
            reed::stage_edit_vectors(cfg);
            std::cout << "edit-vectors: wrote vectors under " << cfg.output_dir << "/vectors\n";
        } else if (evaluate->parsed()) {
            reed::ResultsTable table = reed::stage_evaluate(cfg, use_selected_lambda);
            std::cout << reed::results_to_text(table);
            std::cout << "evaluate: wrote " << reed::PipelinePaths(cfg.output_dir).results_csv()
                      << "\n";
            if (!table.failures.empty()) {
                std::cerr << "evaluate: " << table.failures.size()
                          << " task(s) failed; table is partial\n";
                return 2;
            }
        } else if (sweep->parsed()) {
            if (sweep_kind == "alpha")
                reed::stage_sweep_alpha(cfg);
            else
                reed::stage_sweep_lambda(cfg);
            std::cout << "sweep: wrote CSVs under " << cfg.output_dir << "/sweeps\n";
        } else if (stats->parsed()) {
            reed::stage_stats(cfg, std::cout);
        }
        return 0;
    } catch (const reed::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const reed::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 1;
    } catch (const reed::ParamError& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

#include "reed/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "reed/errors.hpp"
#include "reed/lm.hpp"
#include "reed/stego.hpp"
#include "reed/util.hpp"

namespace reed {

using nlohmann::json;

namespace {

std::string hex64(uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_snapshot(const ExperimentConfig& cfg, const PipelinePaths& paths) {
    json snap;
    snap["config_hash"] = cfg.config_hash();
    snap["config"] = cfg.canonical_json();
    write_file(paths.config_snapshot(), snap.dump(2) + "\n");
}

void require_snapshot(const ExperimentConfig& cfg, const PipelinePaths& paths) {
    if (!file_exists(paths.config_snapshot()))
        throw IoError("no dataset snapshot under '" + paths.root + "'; run gen-data first");
    json snap = json::parse(read_file(paths.config_snapshot()), nullptr, false);
    if (snap.is_discarded()) throw IoError("corrupt config snapshot: " + paths.config_snapshot());
    std::string have = snap.value("config_hash", "");
    if (have != cfg.config_hash())
        throw StaleArtifactError("config hash mismatch: datasets under '" + paths.root +
                                 "' were generated with config " + have + " but the current config "
                                 "hashes to " + cfg.config_hash() + "; re-run gen-data");
}

DetectorModel load_model_checked(const ExperimentConfig& cfg, const std::string& path) {
    json prov;
    DetectorModel model = load_model(path, &prov);
    std::string have = prov.value("config_hash", "");
    if (have != cfg.config_hash())
        throw StaleArtifactError("model '" + path + "' was trained under config " + have +
                                 " but the current config hashes to " + cfg.config_hash() +
                                 "; re-run train");
    if (!model.frozen()) throw StaleArtifactError("model '" + path + "' is not frozen");
    return model;
}

void check_vector_provenance(const json& prov, const DetectorModel& model,
                             const std::string& path) {
    std::string have = prov.value("model_checksum", "");
    if (have != hex64(model.checksum()))
        throw StaleArtifactError("vector '" + path + "' was estimated for model checksum " + have +
                                 " but the loaded model hashes to " + hex64(model.checksum()) +
                                 "; re-run edit-vectors");
}

// Draw unique (by identity) cover records from the language model.
std::vector<TextRecord> sample_unique_covers(const NGramLM& lm, const ExperimentConfig& cfg,
                                             const std::string& domain, int64_t need,
                                             std::unordered_set<uint64_t>& identities) {
    std::vector<TextRecord> covers;
    covers.reserve(static_cast<size_t>(need));
    uint64_t attempt = 0;
    const uint64_t attempt_limit = static_cast<uint64_t>(need) * 200 + 1000;
    while (static_cast<int64_t>(covers.size()) < need) {
        if (attempt >= attempt_limit)
            throw CapacityError("gen-data: domain '" + domain +
                                "': could not sample enough unique cover texts");
        TextRecord rec = lm.sample_text(cfg.coder.max_len,
                                        derive_seed(cfg.seed, "cover;" + domain, attempt), domain);
        ++attempt;
        if (rec.tokens.empty()) continue;
        if (identities.insert(record_identity(rec)).second) covers.push_back(std::move(rec));
    }
    return covers;
}

std::vector<TextRecord> sample_unique_stegos(const NGramLM& lm, const ExperimentConfig& cfg,
                                             const std::string& domain, const std::string& algo,
                                             int64_t need,
                                             std::unordered_set<uint64_t>& identities) {
    CoderParams params = cfg.coder;
    params.coder = coder_from_name(algo);

    std::vector<TextRecord> stegos;
    stegos.reserve(static_cast<size_t>(need));
    uint64_t attempt = 0;
    const uint64_t attempt_limit = static_cast<uint64_t>(need) * 200 + 1000;
    const std::string tag = "payload;" + domain + ";" + algo;
    while (static_cast<int64_t>(stegos.size()) < need) {
        if (attempt >= attempt_limit)
            throw CapacityError("gen-data: domain '" + domain + "', algorithm " + algo +
                                ": could not generate enough unique stego texts");
        Rng len_rng(derive_seed(cfg.seed, tag, attempt));
        size_t nbits = static_cast<size_t>(
            len_rng.uniform_int(cfg.payload.min_bits, cfg.payload.max_bits));
        BitString bits = BitString::random(nbits, derive_seed(cfg.seed, "bits;" + tag, attempt));
        TextRecord rec;
        try {
            rec = stego_encode(lm, bits, params, domain);
        } catch (const CapacityError& e) {
            throw CapacityError("gen-data: domain '" + domain + "', algorithm " + algo +
                                ", record attempt " + std::to_string(attempt) + ": " + e.what());
        }
        ++attempt;
        if (rec.tokens.empty()) continue;
        // Extraction must return the exact payload; anything else is a coder bug.
        BitString back = stego_decode(lm, rec.tokens, bits.size(), params);
        if (!(back == bits))
            throw Error("gen-data: round-trip mismatch for domain '" + domain + "', algorithm " +
                        algo + ", attempt " + std::to_string(attempt - 1));
        if (identities.insert(record_identity(rec)).second) stegos.push_back(std::move(rec));
    }
    return stegos;
}

std::string stats_row(const std::string& domain, const std::string& algo,
                      std::span<const TextRecord> records) {
    TextStats st = compute_stats(records);
    std::ostringstream row;
    row << domain << ',' << algo << ',' << records.size() << ',' << format_double(st.avg_length)
        << ',' << format_double(st.bpw) << '\n';
    return row.str();
}

std::vector<TextRecord> load_split(const PipelinePaths& paths, const std::string& domain,
                                   const std::string& algo, const std::string& split) {
    std::string path = paths.split_file(domain, algo, split);
    if (!file_exists(path))
        throw IoError("missing dataset split '" + path + "'; run gen-data first");
    return load_corpus(path, CorpusFormat::Jsonl);
}

std::vector<TextRecord> filter_label(std::span<const TextRecord> records, int label) {
    std::vector<TextRecord> out;
    for (const auto& r : records)
        if (r.label == label) out.push_back(r);
    return out;
}

}  // namespace

void stage_gen_data(const ExperimentConfig& cfg) {
    PipelinePaths paths(cfg.output_dir);
    ensure_dir(paths.root);
    write_snapshot(cfg, paths);

    std::ostringstream stats;
    stats << "# config_hash=" << cfg.config_hash() << " seed=" << cfg.seed << "\n";
    stats << "domain,algorithm,records,avg_length,bpw\n";

    const int64_t need = cfg.splits.total_per_class();
    for (const auto& dom : cfg.domains) {
        std::vector<TextRecord> base;
        if (dom.synthetic) {
            SyntheticSpec spec = *dom.synthetic;
            spec.seed = derive_seed(cfg.seed, "synth;" + dom.name);
            base = synthesize_corpus(spec);
        } else {
            PlainMeta meta;
            meta.domain = dom.name;
            base = load_corpus(*dom.corpus_path, CorpusFormat::PlainLines, meta);
        }
        NGramLM lm = NGramLM::train(base, cfg.lm.order, cfg.lm.delta);
        json lm_json = lm.to_json();
        lm_json["provenance"] = {{"config_hash", cfg.config_hash()}, {"seed", cfg.seed}};
        write_file(paths.lm_file(dom.name), lm_json.dump() + "\n");

        std::unordered_set<uint64_t> identities;
        std::vector<TextRecord> covers = sample_unique_covers(lm, cfg, dom.name, need, identities);
        stats << stats_row(dom.name, "cover", covers);

        for (const auto& algo : cfg.algorithms) {
            std::vector<TextRecord> stegos =
                sample_unique_stegos(lm, cfg, dom.name, algo, need, identities);
            stats << stats_row(dom.name, algo, stegos);

            uint64_t split_seed = derive_seed(cfg.seed, "splits;" + dom.name + ";" + algo);
            DatasetSplits splits = make_splits(covers, stegos, cfg.splits, split_seed);
            save_jsonl(paths.split_file(dom.name, algo, "train"), splits.train);
            save_jsonl(paths.split_file(dom.name, algo, "val"), splits.val);
            save_jsonl(paths.split_file(dom.name, algo, "test"), splits.test);
            // The jsonl schema is records-only; provenance rides in a sidecar.
            json meta{{"config_hash", cfg.config_hash()},
                      {"seed", cfg.seed},
                      {"split_seed", split_seed},
                      {"domain", dom.name},
                      {"algorithm", algo}};
            write_file(paths.root + "/data/" + dom.name + "/" + algo + "/meta.json",
                       meta.dump(2) + "\n");
        }
    }
    write_file(paths.stats_file(), stats.str());
}

void stage_train(const ExperimentConfig& cfg) {
    PipelinePaths paths(cfg.output_dir);
    require_snapshot(cfg, paths);

    for (const auto& algo : cfg.algorithms) {
        for (const auto& dom : cfg.domains) {
            std::vector<TextRecord> train = load_split(paths, dom.name, algo, "train");
            std::vector<TextRecord> val = load_split(paths, dom.name, algo, "val");
            DetectorHparams hp = cfg.detector;
            hp.seed = derive_seed(cfg.seed, "detector;" + dom.name + ";" + algo);
            DetectorModel model = train_detector(train, val, hp);

            json prov;
            prov["config_hash"] = cfg.config_hash();
            prov["seed"] = hp.seed;
            prov["model_checksum"] = hex64(model.checksum());
            save_model(model, paths.model_file(dom.name, algo), prov);
        }
    }
}

void stage_edit_vectors(const ExperimentConfig& cfg) {
    PipelinePaths paths(cfg.output_dir);
    require_snapshot(cfg, paths);

    for (const auto& algo : cfg.algorithms) {
        for (const auto& src : cfg.domains) {
            DetectorModel model = load_model_checked(cfg, paths.model_file(src.name, algo));
            std::vector<TextRecord> src_train = load_split(paths, src.name, algo, "train");
            std::vector<TokenSeq> src_tokens = tokens_of(src_train);

            // Offsets need target-domain samples; the direction is source-only.
            for (const auto& tgt : cfg.domains) {
                if (tgt.name == src.name) continue;
                std::vector<TextRecord> tgt_train = load_split(paths, tgt.name, algo, "train");
                std::vector<TokenSeq> tgt_tokens = tokens_of(tgt_train);
                SampleBudget src_budget{cfg.editing.offset_samples,
                                        derive_seed(cfg.seed, "offset-src;" + algo + ";" + src.name +
                                                                  ";" + tgt.name)};
                SampleBudget tgt_budget{cfg.editing.offset_samples,
                                        derive_seed(cfg.seed, "offset-tgt;" + algo + ";" + src.name +
                                                                  ";" + tgt.name)};
                EditVector ev = estimate_offset(model, src_tokens, tgt_tokens, cfg.editing.alpha,
                                                src_budget, tgt_budget);
                json prov;
                prov["config_hash"] = cfg.config_hash();
                prov["model_checksum"] = hex64(model.checksum());
                prov["src_seed"] = src_budget.seed;
                prov["tgt_seed"] = tgt_budget.seed;
                write_file(paths.offset_file(algo, src.name, tgt.name),
                           offset_to_json(ev, prov).dump(2) + "\n");
            }

            std::vector<TokenSeq> covers = tokens_of(filter_label(src_train, 0));
            std::vector<TokenSeq> stegos = tokens_of(filter_label(src_train, 1));
            SampleBudget dir_budget{cfg.editing.direction_samples,
                                    derive_seed(cfg.seed, "direction;" + algo + ";" + src.name)};
            DirectionVector dv =
                estimate_direction(model, covers, stegos, cfg.lambda_for(algo), dir_budget);
            json prov;
            prov["config_hash"] = cfg.config_hash();
            prov["model_checksum"] = hex64(model.checksum());
            prov["seed"] = dir_budget.seed;
            write_file(paths.direction_file(algo, src.name),
                       direction_to_json(dv, prov).dump(2) + "\n");
        }
    }
}

std::string results_to_csv(const ResultsTable& table, const std::string& config_hash,
                           uint64_t seed) {
    std::ostringstream out;
    out << "# config_hash=" << config_hash << " seed=" << seed << "\n";
    out << "algorithm,source,target,method,tp,tn,fp,fn,acc,f1,alpha,lambda,seed,model_checksum\n";
    for (const auto& r : table.rows) {
        out << r.algorithm << ',' << r.source << ',' << r.target << ',' << r.method << ','
            << r.confusion.tp << ',' << r.confusion.tn << ',' << r.confusion.fp << ','
            << r.confusion.fn << ',' << format_double(r.acc) << ',' << format_double(r.f1) << ','
            << format_double(r.alpha) << ',' << format_double(r.lambda) << ',' << r.seed << ','
            << hex64(r.model_checksum) << '\n';
    }
    for (const auto& f : table.failures) out << "# FAILED " << f << '\n';
    return out.str();
}

std::string results_to_text(const ResultsTable& table) {
    // Task columns in first-appearance order, then the per-method average;
    // cells are Acc/F1 in percent, two decimals, matching the usual layout.
    std::vector<std::string> algos;
    for (const auto& r : table.rows) {
        if (std::find(algos.begin(), algos.end(), r.algorithm) == algos.end())
            algos.push_back(r.algorithm);
    }
    auto averages = table.averages();

    std::ostringstream out;
    out << std::fixed << std::setprecision(2);
    for (const auto& algo : algos) {
        std::vector<std::string> tasks;
        std::vector<std::string> methods;
        std::map<std::pair<std::string, std::string>, const TaskResult*> cell;
        for (const auto& r : table.rows) {
            if (r.algorithm != algo) continue;
            std::string task = r.source + "-" + r.target;
            if (std::find(tasks.begin(), tasks.end(), task) == tasks.end()) tasks.push_back(task);
            if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
                methods.push_back(r.method);
            cell[{r.method, task}] = &r;
        }

        const int name_w = 16, col_w = 14;
        out << "algorithm: " << algo << "\n";
        out << std::left << std::setw(name_w) << "method";
        for (const auto& t : tasks) out << std::setw(col_w) << t;
        out << std::setw(col_w) << "Avg." << "\n";
        for (const auto& m : methods) {
            std::string label = m == "ttem" ? "detector+ttem" : m;
            out << std::setw(name_w) << label;
            for (const auto& t : tasks) {
                auto it = cell.find({m, t});
                if (it == cell.end()) {
                    out << std::setw(col_w) << "--";
                } else {
                    std::ostringstream v;
                    v << std::fixed << std::setprecision(2) << it->second->acc * 100.0 << "/"
                      << it->second->f1 * 100.0;
                    out << std::setw(col_w) << v.str();
                }
            }
            auto avg = averages.at({algo, m});
            std::ostringstream v;
            v << std::fixed << std::setprecision(2) << avg.first * 100.0 << "/"
              << avg.second * 100.0;
            out << std::setw(col_w) << v.str() << "\n";
        }
        out << "\n";
    }
    for (const auto& f : table.failures) out << "FAILED " << f << "\n";
    return out.str();
}

ResultsTable stage_evaluate(const ExperimentConfig& cfg, bool use_selected_lambda) {
    PipelinePaths paths(cfg.output_dir);
    require_snapshot(cfg, paths);

    json selected;
    if (use_selected_lambda) {
        if (!file_exists(paths.lambda_selected()))
            throw IoError("no sweep selection file '" + paths.lambda_selected() +
                          "'; run sweep lambda first");
        selected = json::parse(read_file(paths.lambda_selected()));
    }

    ResultsTable table;
    auto mark_failure = [&table](const std::string& algo, const std::string& src,
                                 const std::string& tgt, const std::string& method,
                                 const std::string& error) {
        table.failures.push_back("algorithm=" + algo + " source=" + src + " target=" + tgt +
                                 " method=" + method + " error=" + error);
    };
    for (const auto& algo : cfg.algorithms) {
        for (const auto& src : cfg.domains) {
            DetectorModel model = load_model_checked(cfg, paths.model_file(src.name, algo));
            for (const auto& tgt : cfg.domains) {
                if (tgt.name == src.name) continue;
                std::vector<TextRecord> test;
                try {
                    test = load_split(paths, tgt.name, algo, "test");
                } catch (const Error& e) {
                    mark_failure(algo, src.name, tgt.name, "*", e.what());
                    continue;
                }
                auto features =
                    featurize_records(test, model.feature_dim(), model.feature_seed());
                TaskMeta meta{algo, src.name, tgt.name, cfg.seed};

                for (const auto& method : cfg.methods) {
                    try {
                        MethodSpec spec;
                        spec.method = method_from_name(method);
                        if (spec.method == Method::ReedDa) {
                            std::string path = paths.offset_file(algo, src.name, tgt.name);
                            if (!file_exists(path)) {
                                std::cerr << "evaluate: no offset vector for " << algo << " "
                                          << src.name << "->" << tgt.name
                                          << "; skipping reed-da (run edit-vectors)\n";
                                continue;
                            }
                            json prov;
                            EditVector ev =
                                offset_from_json(json::parse(read_file(path)), &prov);
                            check_vector_provenance(prov, model, path);
                            spec.offset = std::move(ev);
                        } else if (spec.method == Method::ReedDg) {
                            std::string path = paths.direction_file(algo, src.name);
                            if (!file_exists(path)) {
                                std::cerr << "evaluate: no direction vector for " << algo << " "
                                          << src.name << "; skipping reed-dg (run edit-vectors)\n";
                                continue;
                            }
                            json prov;
                            DirectionVector dv =
                                direction_from_json(json::parse(read_file(path)), &prov);
                            check_vector_provenance(prov, model, path);
                            if (use_selected_lambda) {
                                std::string key = algo + "__" + src.name;
                                if (!selected.contains("selected") ||
                                    !selected["selected"].contains(key))
                                    throw StaleArtifactError(
                                        "lambda selection file has no entry for " + key +
                                        "; re-run sweep lambda");
                                dv.lambda = selected["selected"][key].get<double>();
                            }
                            spec.direction = std::move(dv);
                        } else if (spec.method == Method::Ttem) {
                            TtemConfig tc = cfg.ttem;
                            tc.order_seed = derive_seed(
                                cfg.seed, "ttem;" + algo + ";" + src.name + ";" + tgt.name);
                            spec.ttem = tc;
                        }
                        table.rows.push_back(run_task(model, features, spec, meta));
                    } catch (const StaleArtifactError&) {
                        throw;  // stale inputs refuse the stage outright
                    } catch (const std::exception& e) {
                        mark_failure(algo, src.name, tgt.name, method, e.what());
                    }
                }
            }
        }
    }

    write_file(paths.results_csv(), results_to_csv(table, cfg.config_hash(), cfg.seed));
    write_file(paths.results_text(), "config_hash: " + cfg.config_hash() +
                                         "  seed: " + std::to_string(cfg.seed) + "\n\n" +
                                         results_to_text(table));
    return table;
}

void stage_sweep_alpha(const ExperimentConfig& cfg) {
    PipelinePaths paths(cfg.output_dir);
    require_snapshot(cfg, paths);

    for (const auto& algo : cfg.algorithms) {
        for (const auto& src : cfg.domains) {
            DetectorModel model = load_model_checked(cfg, paths.model_file(src.name, algo));
            for (const auto& tgt : cfg.domains) {
                if (tgt.name == src.name) continue;
                std::string vec_path = paths.offset_file(algo, src.name, tgt.name);
                if (!file_exists(vec_path))
                    throw IoError("missing offset vector '" + vec_path +
                                  "'; run edit-vectors first");
                json prov;
                EditVector ev = offset_from_json(json::parse(read_file(vec_path)), &prov);
                check_vector_provenance(prov, model, vec_path);

                std::vector<TextRecord> test = load_split(paths, tgt.name, algo, "test");
                auto features =
                    featurize_records(test, model.feature_dim(), model.feature_seed());
                auto rows = sweep_alpha(model, ev, features, cfg.editing.alpha_grid);

                std::ostringstream csv;
                csv << "# config_hash=" << cfg.config_hash() << " seed=" << cfg.seed
                    << " algorithm=" << algo << " source=" << src.name << " target=" << tgt.name
                    << "\n";
                csv << "alpha,acc\n";
                for (const auto& r : rows)
                    csv << format_double(r.alpha) << ',' << format_double(r.acc) << '\n';
                write_file(paths.alpha_sweep_csv(algo, src.name, tgt.name), csv.str());
            }
        }
    }
}

void stage_sweep_lambda(const ExperimentConfig& cfg) {
    PipelinePaths paths(cfg.output_dir);
    require_snapshot(cfg, paths);

    std::vector<double> grid = cfg.effective_lambda_grid();
    json selected;
    selected["criterion"] = "max F1 on source validation; ties -> smallest lambda";
    selected["selected"] = json::object();

    for (const auto& algo : cfg.algorithms) {
        for (const auto& src : cfg.domains) {
            DetectorModel model = load_model_checked(cfg, paths.model_file(src.name, algo));
            std::string vec_path = paths.direction_file(algo, src.name);
            if (!file_exists(vec_path))
                throw IoError("missing direction vector '" + vec_path +
                              "'; run edit-vectors first");
            json prov;
            DirectionVector dv = direction_from_json(json::parse(read_file(vec_path)), &prov);
            check_vector_provenance(prov, model, vec_path);

            // Domain generalization: only source-domain data may inform the
            // choice, so the sweep is scored on the source validation split.
            std::vector<TextRecord> val = load_split(paths, src.name, algo, "val");
            auto features = featurize_records(val, model.feature_dim(), model.feature_seed());
            auto rows = sweep_lambda(model, dv, features, grid);

            std::ostringstream csv;
            csv << "# config_hash=" << cfg.config_hash() << " seed=" << cfg.seed
                << " algorithm=" << algo << " source=" << src.name << " eval=source-val\n";
            csv << "lambda,acc,f1\n";
            for (const auto& r : rows)
                csv << format_double(r.lambda) << ',' << format_double(r.acc) << ','
                    << format_double(r.f1) << '\n';
            write_file(paths.lambda_sweep_csv(algo, src.name), csv.str());

            selected["selected"][algo + "__" + src.name] = select_lambda(rows);
        }
    }
    selected["config_hash"] = cfg.config_hash();
    selected["seed"] = cfg.seed;
    write_file(paths.lambda_selected(), selected.dump(2) + "\n");
}

void stage_stats(const ExperimentConfig& cfg, std::ostream& out) {
    PipelinePaths paths(cfg.output_dir);
    require_snapshot(cfg, paths);
    if (!file_exists(paths.stats_file()))
        throw IoError("missing stats file '" + paths.stats_file() + "'; run gen-data first");
    out << read_file(paths.stats_file());
}

ResultsTable run_full_pipeline(const ExperimentConfig& cfg, bool use_selected_lambda) {
    stage_gen_data(cfg);
    stage_train(cfg);
    stage_edit_vectors(cfg);
    if (use_selected_lambda) stage_sweep_lambda(cfg);
    return stage_evaluate(cfg, use_selected_lambda);
}

}  // namespace reed

#include "reed/eval.hpp"

#include <algorithm>
#include <cmath>

#include "reed/errors.hpp"

namespace reed {

Confusion confusion(std::span<const int> preds, std::span<const int> labels) {
    if (preds.size() != labels.size())
        throw ParamError("confusion: predictions and labels differ in length");
    if (preds.empty()) throw ParamError("confusion: empty inputs");
    Confusion c;
    for (size_t i = 0; i < preds.size(); ++i) {
        int p = preds[i], y = labels[i];
        if ((p != 0 && p != 1) || (y != 0 && y != 1))
            throw ParamError("confusion: labels must be 0/1");
        if (y == 1)
            (p == 1 ? c.tp : c.fn) += 1;
        else
            (p == 0 ? c.tn : c.fp) += 1;
    }
    return c;
}

double accuracy(const Confusion& c) {
    int64_t total = c.total();
    if (total <= 0) throw ParamError("accuracy: empty confusion");
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(total);
}

double f1(const Confusion& c) {
    int64_t denom = 2 * c.tp + c.fp + c.fn;
    if (denom == 0) return 0.0;
    return static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

Method method_from_name(std::string_view name) {
    if (name == "baseline") return Method::Baseline;
    if (name == "reed-da") return Method::ReedDa;
    if (name == "reed-dg") return Method::ReedDg;
    if (name == "ttem") return Method::Ttem;
    throw ParamError("unknown method: '" + std::string(name) + "'");
}

std::string method_name(Method m) {
    switch (m) {
        case Method::Baseline: return "baseline";
        case Method::ReedDa: return "reed-da";
        case Method::ReedDg: return "reed-dg";
        case Method::Ttem: return "ttem";
    }
    throw ParamError("invalid method enum");
}

std::map<std::pair<std::string, std::string>, std::pair<double, double>> ResultsTable::averages()
    const {
    std::map<std::pair<std::string, std::string>, std::pair<double, double>> out;
    std::map<std::pair<std::string, std::string>, int64_t> counts;
    for (const auto& r : rows) {
        auto key = std::make_pair(r.algorithm, r.method);
        out[key].first += r.acc;
        out[key].second += r.f1;
        counts[key] += 1;
    }
    for (auto& [key, sums] : out) {
        sums.first /= static_cast<double>(counts[key]);
        sums.second /= static_cast<double>(counts[key]);
    }
    return out;
}

TaskResult run_task(const DetectorModel& frozen, std::span<const LabeledFeatures> test,
                    const MethodSpec& spec, const TaskMeta& meta) {
    if (test.empty()) throw ParamError("run_task: empty test set");

    std::vector<int> preds(test.size(), 0);
    std::vector<int> labels(test.size(), 0);
    for (size_t i = 0; i < test.size(); ++i) labels[i] = test[i].label;

    switch (spec.method) {
        case Method::Baseline: {
            for (size_t i = 0; i < test.size(); ++i) preds[i] = frozen.predict(test[i].x);
            break;
        }
        case Method::ReedDa: {
            if (!spec.offset) throw ParamError("run_task: reed-da needs an offset vector");
            for (size_t i = 0; i < test.size(); ++i) {
                Representation z = frozen.extract(test[i].x);
                preds[i] = frozen.predict_from_repr(apply_offset(z, *spec.offset));
            }
            break;
        }
        case Method::ReedDg: {
            if (!spec.direction) throw ParamError("run_task: reed-dg needs a direction vector");
            for (size_t i = 0; i < test.size(); ++i) {
                Representation z = frozen.extract(test[i].x);
                preds[i] = frozen.predict_from_repr(apply_direction(z, *spec.direction));
            }
            break;
        }
        case Method::Ttem: {
            if (!spec.ttem) throw ParamError("run_task: ttem needs a TtemConfig");
            std::vector<FeatureVector> xs;
            xs.reserve(test.size());
            for (const auto& s : test) xs.push_back(s.x);
            preds = ttem_run(frozen, xs, *spec.ttem);
            break;
        }
    }

    TaskResult result;
    result.algorithm = meta.algorithm;
    result.source = meta.source;
    result.target = meta.target;
    result.method = method_name(spec.method);
    result.confusion = confusion(preds, labels);
    result.acc = accuracy(result.confusion);
    result.f1 = f1(result.confusion);
    result.alpha = spec.offset ? spec.offset->alpha : 0.0;
    result.lambda = spec.direction ? spec.direction->lambda : 0.0;
    result.seed = meta.seed;
    result.model_checksum = frozen.checksum();
    return result;
}

TaskResult run_task(const DetectorModel& frozen, std::span<const TextRecord> test,
                    const MethodSpec& spec, const TaskMeta& meta) {
    auto features =
        featurize_records(test, frozen.feature_dim(), frozen.feature_seed());
    return run_task(frozen, features, spec, meta);
}

namespace {

// Representations are fixed across grid points; extract them once.
std::pair<std::vector<Representation>, std::vector<int>> cache_reprs(
    const DetectorModel& frozen, std::span<const LabeledFeatures> test) {
    std::vector<Representation> reprs;
    std::vector<int> labels;
    reprs.reserve(test.size());
    labels.reserve(test.size());
    for (const auto& s : test) {
        reprs.push_back(frozen.extract(s.x));
        labels.push_back(s.label);
    }
    return {std::move(reprs), std::move(labels)};
}

}  // namespace

std::vector<AlphaRow> sweep_alpha(const DetectorModel& frozen, const EditVector& offset,
                                  std::span<const LabeledFeatures> test,
                                  std::span<const double> grid) {
    if (grid.empty()) throw ParamError("sweep_alpha: empty grid");
    if (test.empty()) throw ParamError("sweep_alpha: empty test set");
    std::vector<double> points;
    if (std::find(grid.begin(), grid.end(), 0.0) == grid.end()) points.push_back(0.0);
    points.insert(points.end(), grid.begin(), grid.end());

    auto [reprs, labels] = cache_reprs(frozen, test);
    std::vector<AlphaRow> rows;
    rows.reserve(points.size());
    std::vector<int> preds(reprs.size(), 0);
    for (double alpha : points) {
        EditVector ev = offset;
        ev.alpha = alpha;
        for (size_t i = 0; i < reprs.size(); ++i)
            preds[i] = frozen.predict_from_repr(apply_offset(reprs[i], ev));
        rows.push_back(AlphaRow{alpha, accuracy(confusion(preds, labels))});
    }
    return rows;
}

std::vector<LambdaRow> sweep_lambda(const DetectorModel& frozen, const DirectionVector& direction,
                                    std::span<const LabeledFeatures> test,
                                    std::span<const double> grid) {
    if (grid.empty()) throw ParamError("sweep_lambda: empty grid");
    if (test.empty()) throw ParamError("sweep_lambda: empty test set");
    auto [reprs, labels] = cache_reprs(frozen, test);
    std::vector<LambdaRow> rows;
    rows.reserve(grid.size());
    std::vector<int> preds(reprs.size(), 0);
    for (double lambda : grid) {
        DirectionVector dv = direction;
        dv.lambda = lambda;
        for (size_t i = 0; i < reprs.size(); ++i)
            preds[i] = frozen.predict_from_repr(apply_direction(reprs[i], dv));
        Confusion c = confusion(preds, labels);
        rows.push_back(LambdaRow{lambda, accuracy(c), f1(c)});
    }
    return rows;
}

std::vector<double> default_lambda_grid() {
    std::vector<double> grid;
    grid.reserve(101);
    for (int i = 0; i <= 100; ++i) grid.push_back(static_cast<double>(i) / 10.0);
    return grid;
}

double select_lambda(std::span<const LambdaRow> rows) {
    if (rows.empty()) throw ParamError("select_lambda: no rows");
    const LambdaRow* best = &rows[0];
    for (const auto& r : rows) {
        if (r.f1 > best->f1 || (r.f1 == best->f1 && r.lambda < best->lambda)) best = &r;
    }
    return best->lambda;
}

}  // namespace reed

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reed/corpus.hpp"
#include "reed/detector.hpp"
#include "reed/editing.hpp"
#include "reed/ttem.hpp"

namespace reed {

struct Confusion {
    int64_t tp = 0, tn = 0, fp = 0, fn = 0;
    int64_t total() const { return tp + tn + fp + fn; }
    bool operator==(const Confusion&) const = default;
};

// Stego (label 1) is the positive class.
Confusion confusion(std::span<const int> preds, std::span<const int> labels);

// (TP + TN) / total
double accuracy(const Confusion& c);

// 2TP / (2TP + FP + FN); 0.0 by convention when the denominator is 0.
double f1(const Confusion& c);

enum class Method { Baseline, ReedDa, ReedDg, Ttem };

Method method_from_name(std::string_view name);  // "baseline"|"reed-da"|"reed-dg"|"ttem"
std::string method_name(Method m);

struct MethodSpec {
    Method method = Method::Baseline;
    std::optional<EditVector> offset;        // ReedDa
    std::optional<DirectionVector> direction;  // ReedDg
    std::optional<TtemConfig> ttem;          // Ttem
};

struct TaskResult {
    std::string algorithm;
    std::string source;
    std::string target;
    std::string method;
    Confusion confusion;
    double acc = 0.0;
    double f1 = 0.0;
    double alpha = 0.0;   // ReedDa rows
    double lambda = 0.0;  // ReedDg rows
    uint64_t seed = 0;
    uint64_t model_checksum = 0;
};

struct ResultsTable {
    std::vector<TaskResult> rows;
    // Tasks that failed at runtime, as "algorithm=.. source=.. target=..
    // method=.. error=.." markers; a non-empty list means a partial table.
    std::vector<std::string> failures;
    // Mean (acc, f1) per (algorithm, method) over all directed tasks present.
    std::map<std::pair<std::string, std::string>, std::pair<double, double>> averages() const;
};

struct TaskMeta {
    std::string algorithm;
    std::string source;
    std::string target;
    uint64_t seed = 0;
};

// Run one directed transfer evaluation: featurize -> extract -> (edit) ->
// predict -> metrics. The model stays frozen throughout; the ttem method
// adapts a copy.
TaskResult run_task(const DetectorModel& frozen, std::span<const TextRecord> test,
                    const MethodSpec& spec, const TaskMeta& meta);

// Same but reusing precomputed features/labels for the test set.
TaskResult run_task(const DetectorModel& frozen, std::span<const LabeledFeatures> test,
                    const MethodSpec& spec, const TaskMeta& meta);

// ---------------------------------------------------------------------------
// Editing-strength sweeps

struct AlphaRow {
    double alpha = 0.0;
    double acc = 0.0;
};

struct LambdaRow {
    double lambda = 0.0;
    double acc = 0.0;
    double f1 = 0.0;
};

// Evaluate the offset edit at each grid point on a fixed task. A 0.0 baseline
// point is prepended when the grid does not already contain one; duplicate
// grid values produce duplicate rows.
std::vector<AlphaRow> sweep_alpha(const DetectorModel& frozen, const EditVector& offset,
                                  std::span<const LabeledFeatures> test,
                                  std::span<const double> grid);

std::vector<LambdaRow> sweep_lambda(const DetectorModel& frozen, const DirectionVector& direction,
                                    std::span<const LabeledFeatures> test,
                                    std::span<const double> grid);

// 101 points: 0.0 to 10.0 in steps of 0.1.
std::vector<double> default_lambda_grid();

// Operator-facing selection rule: the row with the best F1, ties broken by
// the smallest lambda. Selection is reported, never silently applied.
double select_lambda(std::span<const LambdaRow> rows);

}  // namespace reed

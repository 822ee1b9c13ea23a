#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "reed/detector.hpp"

namespace reed {

struct TtemConfig {
    double learning_rate = 1e-5;
    int steps_per_batch = 1;
    int batch_size = 32;
    bool classifier_only = false;  // default updates all parameters
    uint64_t order_seed = 0;       // batch order; results are reported with it

    void validate() const;
};

// Mean softmax prediction entropy over a batch of logit pairs, natural log.
double prediction_entropy(std::span<const std::array<double, 2>> logits_batch);

// dH/dlogits for a single sample (used by the update and by gradient checks).
std::array<double, 2> entropy_grad_logits(const std::array<double, 2>& logits);

// One (or steps_per_batch) entropy-minimization SGD step(s) on the given
// batch. Takes the model by value: the caller's instance is never touched.
DetectorModel ttem_step(DetectorModel model, std::span<const FeatureVector> batch,
                        const TtemConfig& cfg);

// Sequential adaptation pass over a test set: samples are shuffled under
// order_seed into batches; each batch is predicted with the current parameters
// and then used for one update, state carrying forward. Predictions are
// returned in the original sample order. The frozen input model is copied and
// never mutated; the adapted copy is returned through adapted_out if wanted.
std::vector<int> ttem_run(const DetectorModel& frozen, std::span<const FeatureVector> test,
                          const TtemConfig& cfg, DetectorModel* adapted_out = nullptr);

}  // namespace reed

#include "reed/ttem.hpp"

#include <cmath>
#include <numeric>

#include "reed/errors.hpp"
#include "reed/util.hpp"

namespace reed {

void TtemConfig::validate() const {
    // Zero is accepted here so the identity-update boundary case is runnable;
    // experiment configs additionally demand a strictly positive rate.
    if (!(learning_rate >= 0.0)) throw ParamError("ttem: learning_rate must be >= 0");
    if (steps_per_batch < 1) throw ParamError("ttem: steps_per_batch must be >= 1");
    if (batch_size < 1) throw ParamError("ttem: batch_size must be >= 1");
}

namespace {

// Stable log-softmax pieces for a logit pair.
void log_softmax2(const std::array<double, 2>& u, std::array<double, 2>& logp,
                  std::array<double, 2>& p) {
    double m = std::max(u[0], u[1]);
    double lse = m + std::log(std::exp(u[0] - m) + std::exp(u[1] - m));
    for (int c = 0; c < 2; ++c) {
        logp[static_cast<size_t>(c)] = u[static_cast<size_t>(c)] - lse;
        p[static_cast<size_t>(c)] = std::exp(logp[static_cast<size_t>(c)]);
    }
}

}  // namespace

double prediction_entropy(std::span<const std::array<double, 2>> logits_batch) {
    if (logits_batch.empty()) throw ParamError("prediction_entropy: empty batch");
    double sum = 0.0;
    for (const auto& u : logits_batch) {
        std::array<double, 2> logp, p;
        log_softmax2(u, logp, p);
        double h = 0.0;
        for (int c = 0; c < 2; ++c) {
            double pc = p[static_cast<size_t>(c)];
            if (pc > 0.0) h -= pc * logp[static_cast<size_t>(c)];
        }
        sum += h;
    }
    return sum / static_cast<double>(logits_batch.size());
}

std::array<double, 2> entropy_grad_logits(const std::array<double, 2>& logits) {
    // H = -sum_c p_c log p_c with p = softmax(u); dH/du_k = -p_k (log p_k + H).
    std::array<double, 2> logp, p;
    log_softmax2(logits, logp, p);
    double h = 0.0;
    for (int c = 0; c < 2; ++c) {
        if (p[static_cast<size_t>(c)] > 0.0)
            h -= p[static_cast<size_t>(c)] * logp[static_cast<size_t>(c)];
    }
    std::array<double, 2> g;
    for (int c = 0; c < 2; ++c)
        g[static_cast<size_t>(c)] =
            -p[static_cast<size_t>(c)] * (logp[static_cast<size_t>(c)] + h);
    return g;
}

DetectorModel ttem_step(DetectorModel model, std::span<const FeatureVector> batch,
                        const TtemConfig& cfg) {
    cfg.validate();
    if (batch.empty()) throw ParamError("ttem_step: empty batch");
    if (model.frozen()) model = model.thawed_copy();

    for (int step = 0; step < cfg.steps_per_batch; ++step) {
        std::vector<std::array<double, 2>> grads;
        grads.reserve(batch.size());
        for (const auto& x : batch) grads.push_back(entropy_grad_logits(model.forward(x).second));
        DetectorModel::Gradients g = model.backward(batch, grads);
        model.apply_gradients(g, cfg.learning_rate, cfg.classifier_only);
    }
    return model;
}

std::vector<int> ttem_run(const DetectorModel& frozen, std::span<const FeatureVector> test,
                          const TtemConfig& cfg, DetectorModel* adapted_out) {
    cfg.validate();
    if (test.empty()) throw ParamError("ttem_run: empty test set");

    std::vector<size_t> order(test.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.order_seed, "ttem_order"));
    shuffle(order, rng);

    DetectorModel model = frozen.thawed_copy();
    std::vector<int> preds(test.size(), 0);
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
        size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
        std::vector<FeatureVector> batch;
        batch.reserve(end - start);
        for (size_t k = start; k < end; ++k) batch.push_back(test[order[k]]);
        // Predict with the parameters the batch arrives at, then adapt.
        for (size_t k = start; k < end; ++k) preds[order[k]] = model.predict(test[order[k]]);
        model = ttem_step(std::move(model), batch, cfg);
    }
    if (adapted_out) *adapted_out = std::move(model);
    return preds;
}

}  // namespace reed

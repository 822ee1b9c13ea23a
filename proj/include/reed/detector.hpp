#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "reed/corpus.hpp"

namespace reed {

// Sparse view of an F-dimensional feature vector: (index, value) pairs sorted
// by index. Text features rarely touch more than a few dozen buckets.
struct FeatureVector {
    int32_t dim = 0;
    std::vector<std::pair<int32_t, double>> entries;

    std::vector<double> to_dense() const;
    double l2_norm() const;
    static FeatureVector from_dense(std::span<const double> values);
};

// Signed feature hashing of word unigrams and bigrams into `dim` buckets,
// L2-normalized unless the token list is empty.
FeatureVector featurize(const TokenSeq& tokens, int32_t dim, uint64_t seed);
FeatureVector featurize(const TextRecord& rec, int32_t dim, uint64_t seed);

struct Representation {
    std::vector<double> z;

    size_t dim() const { return z.size(); }
    bool operator==(const Representation&) const = default;
};

struct DetectorHparams {
    int feature_dim = 4096;
    int repr_dim = 64;
    double learning_rate = 0.1;
    int epochs = 10;
    int batch_size = 64;
    uint64_t seed = 0;
    uint64_t feature_seed = 0x7265656466656174ull;
};

struct LabeledFeatures {
    FeatureVector x;
    int label = 0;
};

// Two-layer detector h(x) = classifier(tanh(W1 x + b1)). The hidden activation
// is the representation that editing operates on. Once frozen, nothing mutates
// the parameters; adaptation baselines work on thawed copies.
class DetectorModel {
public:
    DetectorModel() = default;
    static DetectorModel init(const DetectorHparams& hp);

    int feature_dim() const { return F_; }
    int repr_dim() const { return d_; }
    uint64_t feature_seed() const { return feature_seed_; }
    uint64_t train_seed() const { return seed_; }
    bool frozen() const { return frozen_; }
    void freeze() { frozen_ = true; }
    DetectorModel thawed_copy() const;

    // z = tanh(W1 x + b1); logits = W2 z + b2.
    std::pair<Representation, std::array<double, 2>> forward(const FeatureVector& x) const;
    Representation extract(const FeatureVector& x) const;
    std::array<double, 2> logits_from_repr(const Representation& z) const;
    // argmax over the two logits; exact tie predicts cover (0).
    int predict_from_repr(const Representation& z) const;
    int predict(const FeatureVector& x) const;

    // featurize + extract using the model's own feature configuration.
    Representation represent(const TokenSeq& tokens) const;

    // FNV checksum over dimensions and raw parameter bytes.
    uint64_t checksum() const;

    // Gradient step helpers used by training and test-time adaptation.
    // grad_logits holds dLoss/dlogits per sample, aligned with batch.
    struct Gradients {
        std::vector<double> w1, b1, w2, b2;
    };
    Gradients backward(std::span<const FeatureVector> batch,
                       std::span<const std::array<double, 2>> grad_logits) const;
    void apply_gradients(const Gradients& g, double learning_rate, bool classifier_only = false);

    nlohmann::json to_json() const;
    static DetectorModel from_json(const nlohmann::json& j);

    // Direct parameter access for checks and serialization.
    std::span<const double> w1() const { return w1_; }
    std::span<const double> b1() const { return b1_; }
    std::span<const double> w2() const { return w2_; }
    std::span<const double> b2() const { return b2_; }
    std::span<double> mutable_w1();
    std::span<double> mutable_b1();
    std::span<double> mutable_w2();
    std::span<double> mutable_b2();

private:
    int F_ = 0;
    int d_ = 0;
    uint64_t seed_ = 0;
    uint64_t feature_seed_ = 0;
    bool frozen_ = false;
    std::vector<double> w1_;  // d x F row-major
    std::vector<double> b1_;  // d
    std::vector<double> w2_;  // 2 x d row-major
    std::vector<double> b2_;  // 2
};

// Minibatch SGD on softmax cross-entropy; returns the frozen
// best-validation-accuracy checkpoint. Deterministic under hp.seed.
DetectorModel train_detector(std::span<const LabeledFeatures> train,
                             std::span<const LabeledFeatures> val, const DetectorHparams& hp);
DetectorModel train_detector(std::span<const TextRecord> train, std::span<const TextRecord> val,
                             const DetectorHparams& hp);

std::vector<LabeledFeatures> featurize_records(std::span<const TextRecord> records, int32_t dim,
                                               uint64_t feature_seed);

double evaluate_accuracy(const DetectorModel& model, std::span<const LabeledFeatures> data);

// Analytic cross-entropy gradients vs central finite differences (step 1e-5)
// over every parameter; returns the max relative error (absolute floor 1e-8).
double grad_check(const DetectorModel& model, const FeatureVector& x, int label);

void save_model(const DetectorModel& model, const std::string& path,
                const nlohmann::json& provenance = {});
DetectorModel load_model(const std::string& path, nlohmann::json* provenance_out = nullptr);

}  // namespace reed

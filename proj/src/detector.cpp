#include "reed/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>

#include "reed/errors.hpp"
#include "reed/util.hpp"

namespace reed {

using nlohmann::json;

std::vector<double> FeatureVector::to_dense() const {
    std::vector<double> out(static_cast<size_t>(dim), 0.0);
    for (auto [i, v] : entries) out[static_cast<size_t>(i)] = v;
    return out;
}

double FeatureVector::l2_norm() const {
    double s = 0.0;
    for (auto [i, v] : entries) s += v * v;
    return std::sqrt(s);
}

FeatureVector FeatureVector::from_dense(std::span<const double> values) {
    FeatureVector x;
    x.dim = static_cast<int32_t>(values.size());
    for (int32_t i = 0; i < x.dim; ++i) {
        if (values[static_cast<size_t>(i)] != 0.0) x.entries.emplace_back(i, values[static_cast<size_t>(i)]);
    }
    return x;
}

FeatureVector featurize(const TokenSeq& tokens, int32_t dim, uint64_t seed) {
    if (dim < 2) throw ParamError("featurize: dim must be >= 2");
    std::map<int32_t, double> buckets;
    auto add = [&](std::string_view key) {
        uint64_t h = fnv1a64(key, seed);
        int32_t bucket = static_cast<int32_t>(h % static_cast<uint64_t>(dim));
        double sign = (h >> 63) ? -1.0 : 1.0;
        buckets[bucket] += sign;
    };
    for (const auto& t : tokens) add(t);
    for (size_t i = 0; i + 1 < tokens.size(); ++i) {
        // 0x1e separates the bigram halves so "ab"+"c" != "a"+"bc".
        add(tokens[i] + '\x1e' + tokens[i + 1]);
    }

    FeatureVector x;
    x.dim = dim;
    double norm = 0.0;
    for (auto [i, v] : buckets) {
        if (v != 0.0) {
            x.entries.emplace_back(i, v);
            norm += v * v;
        }
    }
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (auto& [i, v] : x.entries) v /= norm;
    }
    return x;
}

FeatureVector featurize(const TextRecord& rec, int32_t dim, uint64_t seed) {
    return featurize(rec.tokens, dim, seed);
}

DetectorModel DetectorModel::init(const DetectorHparams& hp) {
    if (hp.feature_dim < 2) throw ParamError("detector: feature_dim must be >= 2");
    if (hp.repr_dim < 1) throw ParamError("detector: repr_dim must be >= 1");
    DetectorModel m;
    m.F_ = hp.feature_dim;
    m.d_ = hp.repr_dim;
    m.seed_ = hp.seed;
    m.feature_seed_ = hp.feature_seed;
    m.w1_.assign(static_cast<size_t>(m.d_) * static_cast<size_t>(m.F_), 0.0);
    m.b1_.assign(static_cast<size_t>(m.d_), 0.0);
    m.w2_.assign(2 * static_cast<size_t>(m.d_), 0.0);
    m.b2_.assign(2, 0.0);

    Rng rng(derive_seed(hp.seed, "detector_init"));
    const double r1 = std::sqrt(6.0 / static_cast<double>(m.F_ + m.d_));
    for (double& w : m.w1_) w = rng.uniform_real(-r1, r1);
    const double r2 = std::sqrt(6.0 / static_cast<double>(m.d_ + 2));
    for (double& w : m.w2_) w = rng.uniform_real(-r2, r2);
    return m;
}

DetectorModel DetectorModel::thawed_copy() const {
    DetectorModel m = *this;
    m.frozen_ = false;
    return m;
}

std::pair<Representation, std::array<double, 2>> DetectorModel::forward(
    const FeatureVector& x) const {
    if (x.dim != F_) throw ShapeError("forward: feature dim " + std::to_string(x.dim) +
                                      " != model F " + std::to_string(F_));
    Representation z;
    z.z.assign(static_cast<size_t>(d_), 0.0);
    for (int i = 0; i < d_; ++i) {
        double acc = b1_[static_cast<size_t>(i)];
        const double* row = &w1_[static_cast<size_t>(i) * static_cast<size_t>(F_)];
        for (auto [j, v] : x.entries) acc += row[j] * v;
        z.z[static_cast<size_t>(i)] = std::tanh(acc);
    }
    return {z, logits_from_repr(z)};
}

Representation DetectorModel::extract(const FeatureVector& x) const { return forward(x).first; }

std::array<double, 2> DetectorModel::logits_from_repr(const Representation& z) const {
    if (static_cast<int>(z.dim()) != d_)
        throw ShapeError("logits_from_repr: repr dim " + std::to_string(z.dim()) +
                         " != model d " + std::to_string(d_));
    std::array<double, 2> u{b2_[0], b2_[1]};
    for (int c = 0; c < 2; ++c) {
        const double* row = &w2_[static_cast<size_t>(c) * static_cast<size_t>(d_)];
        double acc = 0.0;
        for (int i = 0; i < d_; ++i) acc += row[i] * z.z[static_cast<size_t>(i)];
        u[static_cast<size_t>(c)] += acc;
    }
    return u;
}

int DetectorModel::predict_from_repr(const Representation& z) const {
    std::array<double, 2> u = logits_from_repr(z);
    return u[1] > u[0] ? 1 : 0;  // tie -> cover
}

int DetectorModel::predict(const FeatureVector& x) const {
    return predict_from_repr(forward(x).first);
}

Representation DetectorModel::represent(const TokenSeq& tokens) const {
    return extract(featurize(tokens, F_, feature_seed_));
}

uint64_t DetectorModel::checksum() const {
    uint64_t h = fnv1a64("detector", 0);
    auto fold = [&h](const void* p, size_t n) { h = fnv1a64(p, n, h); };
    int32_t dims[2] = {F_, d_};
    fold(dims, sizeof(dims));
    fold(w1_.data(), w1_.size() * sizeof(double));
    fold(b1_.data(), b1_.size() * sizeof(double));
    fold(w2_.data(), w2_.size() * sizeof(double));
    fold(b2_.data(), b2_.size() * sizeof(double));
    return h;
}

std::span<double> DetectorModel::mutable_w1() {
    if (frozen_) throw ParamError("detector: frozen model is immutable");
    return w1_;
}
std::span<double> DetectorModel::mutable_b1() {
    if (frozen_) throw ParamError("detector: frozen model is immutable");
    return b1_;
}
std::span<double> DetectorModel::mutable_w2() {
    if (frozen_) throw ParamError("detector: frozen model is immutable");
    return w2_;
}
std::span<double> DetectorModel::mutable_b2() {
    if (frozen_) throw ParamError("detector: frozen model is immutable");
    return b2_;
}

DetectorModel::Gradients DetectorModel::backward(
    std::span<const FeatureVector> batch, std::span<const std::array<double, 2>> grad_logits) const {
    if (batch.size() != grad_logits.size())
        throw ShapeError("backward: batch/grad size mismatch");
    if (batch.empty()) throw ParamError("backward: empty batch");

    Gradients g;
    g.w1.assign(w1_.size(), 0.0);
    g.b1.assign(b1_.size(), 0.0);
    g.w2.assign(w2_.size(), 0.0);
    g.b2.assign(b2_.size(), 0.0);

    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (size_t s = 0; s < batch.size(); ++s) {
        const FeatureVector& x = batch[s];
        auto [z, u] = forward(x);
        (void)u;
        const std::array<double, 2>& du = grad_logits[s];

        for (int c = 0; c < 2; ++c) {
            g.b2[static_cast<size_t>(c)] += du[static_cast<size_t>(c)] * inv_n;
            for (int i = 0; i < d_; ++i)
                g.w2[static_cast<size_t>(c) * static_cast<size_t>(d_) + static_cast<size_t>(i)] +=
                    du[static_cast<size_t>(c)] * z.z[static_cast<size_t>(i)] * inv_n;
        }
        for (int i = 0; i < d_; ++i) {
            double dz = du[0] * w2_[static_cast<size_t>(i)] +
                        du[1] * w2_[static_cast<size_t>(d_) + static_cast<size_t>(i)];
            double zi = z.z[static_cast<size_t>(i)];
            double da = dz * (1.0 - zi * zi);  // tanh'
            g.b1[static_cast<size_t>(i)] += da * inv_n;
            double* row = &g.w1[static_cast<size_t>(i) * static_cast<size_t>(F_)];
            for (auto [j, v] : x.entries) row[j] += da * v * inv_n;
        }
    }
    return g;
}

void DetectorModel::apply_gradients(const Gradients& g, double learning_rate,
                                    bool classifier_only) {
    if (frozen_) throw ParamError("detector: frozen model is immutable");
    for (size_t i = 0; i < w2_.size(); ++i) w2_[i] -= learning_rate * g.w2[i];
    for (size_t i = 0; i < b2_.size(); ++i) b2_[i] -= learning_rate * g.b2[i];
    if (!classifier_only) {
        for (size_t i = 0; i < w1_.size(); ++i) w1_[i] -= learning_rate * g.w1[i];
        for (size_t i = 0; i < b1_.size(); ++i) b1_[i] -= learning_rate * g.b1[i];
    }
}

namespace {

std::array<double, 2> softmax2(const std::array<double, 2>& u) {
    double m = std::max(u[0], u[1]);
    double e0 = std::exp(u[0] - m);
    double e1 = std::exp(u[1] - m);
    double s = e0 + e1;
    return {e0 / s, e1 / s};
}

double cross_entropy(const std::array<double, 2>& u, int label) {
    double m = std::max(u[0], u[1]);
    double lse = m + std::log(std::exp(u[0] - m) + std::exp(u[1] - m));
    return lse - u[static_cast<size_t>(label)];
}

}  // namespace

std::vector<LabeledFeatures> featurize_records(std::span<const TextRecord> records, int32_t dim,
                                               uint64_t feature_seed) {
    std::vector<LabeledFeatures> out;
    out.reserve(records.size());
    for (const auto& rec : records)
        out.push_back(LabeledFeatures{featurize(rec, dim, feature_seed), rec.label});
    return out;
}

double evaluate_accuracy(const DetectorModel& model, std::span<const LabeledFeatures> data) {
    if (data.empty()) throw ParamError("evaluate_accuracy: empty data");
    int64_t correct = 0;
    for (const auto& s : data)
        if (model.predict(s.x) == s.label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

DetectorModel train_detector(std::span<const LabeledFeatures> train,
                             std::span<const LabeledFeatures> val, const DetectorHparams& hp) {
    if (train.empty()) throw ParamError("train_detector: empty training set");
    if (val.empty()) throw ParamError("train_detector: empty validation set");
    if (!(hp.learning_rate > 0.0)) throw ParamError("train_detector: learning_rate must be > 0");
    if (hp.epochs < 0) throw ParamError("train_detector: epochs must be >= 0");
    if (hp.batch_size < 1) throw ParamError("train_detector: batch_size must be >= 1");
    for (const auto& s : train)
        if (s.label != 0 && s.label != 1) throw ParamError("train_detector: label must be 0/1");

    DetectorModel model = DetectorModel::init(hp);
    DetectorModel best = model;
    double best_acc = evaluate_accuracy(model, val);

    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        Rng rng(derive_seed(hp.seed, "detector_epoch", static_cast<uint64_t>(epoch)));
        shuffle(order, rng);
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(hp.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(hp.batch_size));
            std::vector<FeatureVector> batch;
            std::vector<std::array<double, 2>> grads;
            batch.reserve(end - start);
            grads.reserve(end - start);
            for (size_t k = start; k < end; ++k) {
                const LabeledFeatures& s = train[order[k]];
                auto [z, u] = model.forward(s.x);
                (void)z;
                std::array<double, 2> p = softmax2(u);
                p[static_cast<size_t>(s.label)] -= 1.0;  // dCE/dlogits
                batch.push_back(s.x);
                grads.push_back(p);
            }
            DetectorModel::Gradients g = model.backward(batch, grads);
            model.apply_gradients(g, hp.learning_rate);
        }
        double acc = evaluate_accuracy(model, val);
        if (acc > best_acc) {
            best_acc = acc;
            best = model;
        }
    }
    best.freeze();
    return best;
}

DetectorModel train_detector(std::span<const TextRecord> train, std::span<const TextRecord> val,
                             const DetectorHparams& hp) {
    auto tr = featurize_records(train, hp.feature_dim, hp.feature_seed);
    auto va = featurize_records(val, hp.feature_dim, hp.feature_seed);
    return train_detector(tr, va, hp);
}

double grad_check(const DetectorModel& model, const FeatureVector& x, int label) {
    if (model.frozen()) throw ParamError("grad_check: needs an unfrozen copy");
    if (label != 0 && label != 1) throw ParamError("grad_check: label must be 0/1");

    DetectorModel m = model;
    auto loss = [&]() {
        auto [z, u] = m.forward(x);
        (void)z;
        return cross_entropy(u, label);
    };
    auto [z0, u0] = m.forward(x);
    (void)z0;
    std::array<double, 2> du = softmax2(u0);
    du[static_cast<size_t>(label)] -= 1.0;
    std::vector<FeatureVector> batch{x};
    std::vector<std::array<double, 2>> gl{du};
    DetectorModel::Gradients g = m.backward(batch, gl);

    const double h = 1e-5;
    double max_rel = 0.0;
    auto probe = [&](std::span<double> params, const std::vector<double>& analytic) {
        for (size_t i = 0; i < params.size(); ++i) {
            double saved = params[i];
            params[i] = saved + h;
            double lp = loss();
            params[i] = saved - h;
            double lm = loss();
            params[i] = saved;
            double numeric = (lp - lm) / (2 * h);
            double denom = std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
            max_rel = std::max(max_rel, std::abs(analytic[i] - numeric) / denom);
        }
    };
    probe(m.mutable_w1(), g.w1);
    probe(m.mutable_b1(), g.b1);
    probe(m.mutable_w2(), g.w2);
    probe(m.mutable_b2(), g.b2);
    return max_rel;
}

namespace {

json doubles_to_json(std::span<const double> v) {
    json arr = json::array();
    for (double x : v) arr.push_back(format_double(x));
    return arr;
}

std::vector<double> doubles_from_json(const json& arr, size_t expected, const char* name) {
    if (!arr.is_array() || arr.size() != expected)
        throw IoError(std::string("detector file: bad array size for ") + name);
    std::vector<double> out;
    out.reserve(expected);
    for (const auto& e : arr) out.push_back(parse_double(e.get<std::string>()));
    return out;
}

}  // namespace

json DetectorModel::to_json() const {
    json j;
    j["version"] = 1;
    j["kind"] = "detector";
    j["F"] = F_;
    j["d"] = d_;
    j["seed"] = seed_;
    j["feature_seed"] = feature_seed_;
    j["frozen"] = frozen_;
    j["W1"] = doubles_to_json(w1_);
    j["b1"] = doubles_to_json(b1_);
    j["W2"] = doubles_to_json(w2_);
    j["b2"] = doubles_to_json(b2_);
    return j;
}

DetectorModel DetectorModel::from_json(const json& j) {
    if (!j.is_object() || j.value("kind", "") != "detector")
        throw IoError("not a detector model file");
    if (j.value("version", 0) != 1) throw IoError("unsupported detector model version");
    DetectorModel m;
    m.F_ = j.at("F").get<int>();
    m.d_ = j.at("d").get<int>();
    if (m.F_ < 2 || m.d_ < 1) throw IoError("detector file: invalid dimensions");
    m.seed_ = j.at("seed").get<uint64_t>();
    m.feature_seed_ = j.at("feature_seed").get<uint64_t>();
    m.frozen_ = j.at("frozen").get<bool>();
    size_t F = static_cast<size_t>(m.F_), d = static_cast<size_t>(m.d_);
    m.w1_ = doubles_from_json(j.at("W1"), d * F, "W1");
    m.b1_ = doubles_from_json(j.at("b1"), d, "b1");
    m.w2_ = doubles_from_json(j.at("W2"), 2 * d, "W2");
    m.b2_ = doubles_from_json(j.at("b2"), 2, "b2");
    return m;
}

void save_model(const DetectorModel& model, const std::string& path, const json& provenance) {
    json j = model.to_json();
    if (!provenance.is_null() && !provenance.empty()) j["provenance"] = provenance;
    write_file(path, j.dump(2) + "\n");
}

DetectorModel load_model(const std::string& path, json* provenance_out) {
    if (!file_exists(path)) throw IoError("model file not found: " + path);
    json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw IoError("model file is not valid JSON: " + path);
    if (provenance_out) *provenance_out = j.value("provenance", json::object());
    return DetectorModel::from_json(j);
}

}  // namespace reed

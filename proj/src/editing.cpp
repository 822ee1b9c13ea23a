#include "reed/editing.hpp"

#include <cmath>
#include <numeric>

#include "reed/errors.hpp"
#include "reed/util.hpp"

namespace reed {

using nlohmann::json;

std::vector<double> mean_representation(std::span<const Representation> reprs) {
    if (reprs.empty()) throw ParamError("mean_representation: empty sample set");
    const size_t d = reprs.front().dim();
    std::vector<double> sum(d, 0.0), comp(d, 0.0);
    for (const auto& r : reprs) {
        if (r.dim() != d) throw ShapeError("mean_representation: mixed dimensions");
        for (size_t i = 0; i < d; ++i) {
            double y = r.z[i] - comp[i];
            double t = sum[i] + y;
            comp[i] = (t - sum[i]) - y;
            sum[i] = t;
        }
    }
    for (double& s : sum) s /= static_cast<double>(reprs.size());
    return sum;
}

EditVector estimate_offset_from_reprs(std::span<const Representation> src,
                                      std::span<const Representation> tgt, double alpha) {
    if (src.empty()) throw ParamError("estimate_offset: empty source sample set");
    if (tgt.empty()) throw ParamError("estimate_offset: empty target sample set");
    std::vector<double> mu_s = mean_representation(src);
    std::vector<double> mu_t = mean_representation(tgt);
    if (mu_s.size() != mu_t.size()) throw ShapeError("estimate_offset: dimension mismatch");
    EditVector ev;
    ev.alpha = alpha;
    ev.m_s = static_cast<int64_t>(src.size());
    ev.m_t = static_cast<int64_t>(tgt.size());
    ev.v_sub.resize(mu_s.size());
    for (size_t i = 0; i < mu_s.size(); ++i) ev.v_sub[i] = mu_t[i] - mu_s[i];
    return ev;
}

DirectionVector estimate_direction_from_reprs(std::span<const Representation> covers,
                                              std::span<const Representation> stegos,
                                              double lambda) {
    if (covers.empty()) throw ParamError("estimate_direction: empty cover sample set");
    if (stegos.empty()) throw ParamError("estimate_direction: empty stego sample set");
    if (lambda < 0.0) throw ParamError("estimate_direction: lambda must be >= 0");
    std::vector<double> mu0 = mean_representation(covers);
    std::vector<double> mu1 = mean_representation(stegos);
    if (mu0.size() != mu1.size()) throw ShapeError("estimate_direction: dimension mismatch");

    DirectionVector dv;
    dv.lambda = lambda;
    dv.n0 = static_cast<int64_t>(covers.size());
    dv.n1 = static_cast<int64_t>(stegos.size());
    dv.mu0 = mu0;
    dv.v_norm.resize(mu0.size());
    double norm_sq = 0.0;
    for (size_t i = 0; i < mu0.size(); ++i) {
        dv.v_norm[i] = mu1[i] - mu0[i];
        norm_sq += dv.v_norm[i] * dv.v_norm[i];
    }
    double norm = std::sqrt(norm_sq);
    if (norm < 1e-12)
        throw DegenerateDirectionError(
            "estimate_direction: cover and stego means coincide (|mu1-mu0| < 1e-12)");
    for (double& v : dv.v_norm) v /= norm;
    return dv;
}

namespace {

// Deterministic sample without replacement: take all when the pool fits the
// budget, otherwise the first max_samples of a seeded shuffle.
std::vector<Representation> sampled_representations(const DetectorModel& model,
                                                    std::span<const TokenSeq> pool,
                                                    const SampleBudget& budget) {
    std::vector<size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (budget.max_samples < 1) throw ParamError("SampleBudget: max_samples must be >= 1");
    if (static_cast<int64_t>(pool.size()) > budget.max_samples) {
        Rng rng(derive_seed(budget.seed, "estimation_sample"));
        shuffle(idx, rng);
        idx.resize(static_cast<size_t>(budget.max_samples));
    }
    std::vector<Representation> reprs;
    reprs.reserve(idx.size());
    for (size_t i : idx) reprs.push_back(model.represent(pool[i]));
    return reprs;
}

}  // namespace

std::vector<TokenSeq> tokens_of(std::span<const TextRecord> records) {
    std::vector<TokenSeq> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.tokens);
    return out;
}

EditVector estimate_offset(const DetectorModel& model, std::span<const TokenSeq> src,
                           std::span<const TokenSeq> tgt, double alpha,
                           const SampleBudget& src_budget, const SampleBudget& tgt_budget) {
    if (src.empty()) throw ParamError("estimate_offset: empty source sample set");
    if (tgt.empty()) throw ParamError("estimate_offset: empty target sample set");
    auto src_reprs = sampled_representations(model, src, src_budget);
    auto tgt_reprs = sampled_representations(model, tgt, tgt_budget);
    return estimate_offset_from_reprs(src_reprs, tgt_reprs, alpha);
}

DirectionVector estimate_direction(const DetectorModel& model, std::span<const TokenSeq> covers,
                                   std::span<const TokenSeq> stegos, double lambda,
                                   const SampleBudget& budget) {
    if (covers.empty()) throw ParamError("estimate_direction: empty cover sample set");
    if (stegos.empty()) throw ParamError("estimate_direction: empty stego sample set");
    SampleBudget cover_budget = budget;
    cover_budget.seed = derive_seed(budget.seed, "covers");
    SampleBudget stego_budget = budget;
    stego_budget.seed = derive_seed(budget.seed, "stegos");
    auto cover_reprs = sampled_representations(model, covers, cover_budget);
    auto stego_reprs = sampled_representations(model, stegos, stego_budget);
    return estimate_direction_from_reprs(cover_reprs, stego_reprs, lambda);
}

Representation apply_offset(const Representation& z, const EditVector& ev) {
    if (z.dim() != ev.v_sub.size()) throw ShapeError("apply_offset: dimension mismatch");
    if (ev.alpha == 0.0) return z;
    Representation out = z;
    for (size_t i = 0; i < out.z.size(); ++i) out.z[i] -= ev.alpha * ev.v_sub[i];
    return out;
}

double projection_score(const Representation& z, const DirectionVector& dv) {
    if (z.dim() != dv.v_norm.size() || dv.mu0.size() != dv.v_norm.size())
        throw ShapeError("projection_score: dimension mismatch");
    double s = 0.0;
    for (size_t i = 0; i < z.z.size(); ++i) s += (z.z[i] - dv.mu0[i]) * dv.v_norm[i];
    return s;
}

Representation apply_direction(const Representation& z, const DirectionVector& dv) {
    if (dv.lambda == 0.0) {
        if (z.dim() != dv.v_norm.size()) throw ShapeError("apply_direction: dimension mismatch");
        return z;
    }
    double s = projection_score(z, dv);
    Representation out = z;
    for (size_t i = 0; i < out.z.size(); ++i) out.z[i] += dv.lambda * s * dv.v_norm[i];
    return out;
}

namespace {

json doubles_json(std::span<const double> v) {
    json arr = json::array();
    for (double x : v) arr.push_back(format_double(x));
    return arr;
}

std::vector<double> doubles_parse(const json& arr, const char* name) {
    if (!arr.is_array()) throw IoError(std::string("vector file: ") + name + " must be an array");
    std::vector<double> out;
    out.reserve(arr.size());
    for (const auto& e : arr) out.push_back(parse_double(e.get<std::string>()));
    return out;
}

}  // namespace

json offset_to_json(const EditVector& ev, const json& provenance) {
    json j;
    j["version"] = 1;
    j["kind"] = "offset";
    j["d"] = ev.v_sub.size();
    j["v_sub"] = doubles_json(ev.v_sub);
    j["alpha"] = format_double(ev.alpha);
    j["m_s"] = ev.m_s;
    j["m_t"] = ev.m_t;
    if (!provenance.is_null() && !provenance.empty()) j["provenance"] = provenance;
    return j;
}

EditVector offset_from_json(const json& j, json* provenance_out) {
    if (!j.is_object() || j.value("kind", "") != "offset") throw IoError("not an offset vector file");
    if (j.value("version", 0) != 1) throw IoError("unsupported offset vector version");
    EditVector ev;
    ev.v_sub = doubles_parse(j.at("v_sub"), "v_sub");
    if (ev.v_sub.size() != j.at("d").get<size_t>()) throw IoError("offset vector: d mismatch");
    ev.alpha = parse_double(j.at("alpha").get<std::string>());
    ev.m_s = j.at("m_s").get<int64_t>();
    ev.m_t = j.at("m_t").get<int64_t>();
    if (provenance_out) *provenance_out = j.value("provenance", json::object());
    return ev;
}

json direction_to_json(const DirectionVector& dv, const json& provenance) {
    json j;
    j["version"] = 1;
    j["kind"] = "direction";
    j["d"] = dv.v_norm.size();
    j["mu0"] = doubles_json(dv.mu0);
    j["v_norm"] = doubles_json(dv.v_norm);
    j["lambda"] = format_double(dv.lambda);
    j["n0"] = dv.n0;
    j["n1"] = dv.n1;
    if (!provenance.is_null() && !provenance.empty()) j["provenance"] = provenance;
    return j;
}

DirectionVector direction_from_json(const json& j, json* provenance_out) {
    if (!j.is_object() || j.value("kind", "") != "direction")
        throw IoError("not a direction vector file");
    if (j.value("version", 0) != 1) throw IoError("unsupported direction vector version");
    DirectionVector dv;
    dv.mu0 = doubles_parse(j.at("mu0"), "mu0");
    dv.v_norm = doubles_parse(j.at("v_norm"), "v_norm");
    if (dv.mu0.size() != dv.v_norm.size() || dv.v_norm.size() != j.at("d").get<size_t>())
        throw IoError("direction vector: dimension mismatch");
    dv.lambda = parse_double(j.at("lambda").get<std::string>());
    dv.n0 = j.at("n0").get<int64_t>();
    dv.n1 = j.at("n1").get<int64_t>();
    if (provenance_out) *provenance_out = j.value("provenance", json::object());
    return dv;
}

}  // namespace reed

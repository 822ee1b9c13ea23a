#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "reed/corpus.hpp"
#include "reed/detector.hpp"

namespace reed {

// Domain-offset editing vector for the adaptation setting: v_sub is the
// difference of the target and source mean representations; editing subtracts
// alpha * v_sub from each target representation.
struct EditVector {
    std::vector<double> v_sub;
    double alpha = 1.0;
    int64_t m_s = 0;  // source samples used in the estimate
    int64_t m_t = 0;  // target samples used
};

// Cover-to-stego direction for the generalization setting: v_norm is the unit
// vector from the source cover mean toward the source stego mean. Editing
// adds lambda * projection * v_norm, so it is sample specific.
struct DirectionVector {
    std::vector<double> mu0;
    std::vector<double> v_norm;
    double lambda = 0.0;
    int64_t n0 = 0;
    int64_t n1 = 0;
};

struct SampleBudget {
    int64_t max_samples = 1000;
    uint64_t seed = 0;
};

// Mean of representations with compensated (Kahan) accumulation.
std::vector<double> mean_representation(std::span<const Representation> reprs);

EditVector estimate_offset_from_reprs(std::span<const Representation> src,
                                      std::span<const Representation> tgt, double alpha);
DirectionVector estimate_direction_from_reprs(std::span<const Representation> covers,
                                              std::span<const Representation> stegos,
                                              double lambda);

// Text-level estimators. These take raw token sequences, never records, so
// target labels cannot leak into the estimate. Sampling is without
// replacement under the budget seed; when fewer samples exist, all are used
// and the actual counts are recorded in the result.
EditVector estimate_offset(const DetectorModel& model, std::span<const TokenSeq> src,
                           std::span<const TokenSeq> tgt, double alpha,
                           const SampleBudget& src_budget, const SampleBudget& tgt_budget);
DirectionVector estimate_direction(const DetectorModel& model, std::span<const TokenSeq> covers,
                                   std::span<const TokenSeq> stegos, double lambda,
                                   const SampleBudget& budget);

std::vector<TokenSeq> tokens_of(std::span<const TextRecord> records);

// z~ = z - alpha * v_sub. alpha == 0 returns z unchanged.
Representation apply_offset(const Representation& z, const EditVector& ev);

// S_pro(z) = (z - mu0) . v_norm
double projection_score(const Representation& z, const DirectionVector& dv);

// z~ = z + lambda * S_pro(z) * v_norm. lambda == 0 returns z unchanged;
// z == mu0 is a fixed point for every lambda.
Representation apply_direction(const Representation& z, const DirectionVector& dv);

nlohmann::json offset_to_json(const EditVector& ev, const nlohmann::json& provenance = {});
EditVector offset_from_json(const nlohmann::json& j, nlohmann::json* provenance_out = nullptr);
nlohmann::json direction_to_json(const DirectionVector& dv, const nlohmann::json& provenance = {});
DirectionVector direction_from_json(const nlohmann::json& j,
                                    nlohmann::json* provenance_out = nullptr);

}  // namespace reed

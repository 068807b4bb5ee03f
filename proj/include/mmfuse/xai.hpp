#pragma once

#include <map>
#include <string>
#include <vector>

#include "mmfuse/fusion.hpp"
#include "mmfuse/matrix.hpp"
#include "mmfuse/nn.hpp"

namespace mmfuse::xai {

struct AttributionRecord {
    std::string model_id;
    Vec feature_importances;  // input-space, one per member input feature
    Vec baseline;
    std::size_t ig_steps = 0;
};

struct ModelWeightReport {
    std::vector<std::string> member_ids;       // fixed member order from the fusion spec
    Vec per_model_weight;                      // sums to 1
    std::map<std::string, double> per_modality_weight;
};

/// Member importances read off the head's first dense layer: member j's
/// weight is the summed absolute value of the columns in its c-block,
/// normalized to 1. Modality weights sum their members.
ModelWeightReport model_weights(const fusion::FusionModel& model);

/// Integrated gradients of the target-class logit along the straight path
/// from the baseline, midpoint Riemann sum with `steps` points:
/// IG_i = (x_i - b_i) * mean_t dF/dx_i at b + ((t-0.5)/steps)(x - b).
Vec integrated_gradients(const nn::DenseNetwork& net, const Vec& x, const Vec& baseline,
                         std::size_t target_class, std::size_t steps);

/// Weighted sum of same-modality attribution vectors; weights are
/// renormalized over the supplied subset.
Vec weighted_xai(const std::vector<AttributionRecord>& attributions, const Vec& weights);

std::string weight_report_json(const ModelWeightReport& report);

/// One row per (instance, member, feature) with the combined per-modality
/// importances appended under the pseudo-member "combined:<modality>".
std::string attribution_csv(const std::vector<std::string>& instance_ids,
                            const std::vector<std::vector<AttributionRecord>>& per_instance,
                            const std::vector<Vec>& combined,
                            const std::string& combined_modality);

}  // namespace mmfuse::xai

#include "mmfuse/xai.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mmfuse/io.hpp"

namespace mmfuse::xai {

ModelWeightReport model_weights(const fusion::FusionModel& model) {
    const auto& spec = model.spec;
    if (spec.kind != fusion::FusionKind::jlf)
        throw std::invalid_argument("model_weights: needs a shared-representation head");
    if (model.head_net.layers.empty())
        throw std::invalid_argument("model_weights: untrained head");
    const Matrix& W = model.head_net.layers.front().weights;
    if (W.cols != spec.shared_dim())
        throw std::invalid_argument("model_weights: head width != shared dim");

    ModelWeightReport report;
    report.per_model_weight.assign(spec.member_count(), 0.0);
    double total = 0.0;
    for (std::size_t m = 0; m < spec.member_count(); ++m) {
        report.member_ids.push_back(spec.member_id(m));
        double sum = 0.0;
        for (std::size_t r = 0; r < W.rows; ++r)
            for (std::size_t j = 0; j < spec.n_classes; ++j)
                sum += std::abs(W(r, m * spec.n_classes + j));
        report.per_model_weight[m] = sum;
        total += sum;
    }
    if (total == 0.0)
        throw std::invalid_argument("model_weights: head weights are all zero");
    for (auto& w : report.per_model_weight) w /= total;
    for (std::size_t m = 0; m < spec.member_count(); ++m)
        report.per_modality_weight[spec.member_modality[m]] += report.per_model_weight[m];
    return report;
}

Vec integrated_gradients(const nn::DenseNetwork& net, const Vec& x, const Vec& baseline,
                         std::size_t target_class, std::size_t steps) {
    if (baseline.size() != x.size())
        throw std::invalid_argument("integrated_gradients: baseline dim != input dim");
    if (steps < 16) throw std::invalid_argument("integrated_gradients: needs >= 16 steps");
    const std::size_t d = x.size();
    Vec acc(d, 0.0);
    Vec point(d);
    for (std::size_t t = 1; t <= steps; ++t) {
        const double alpha = (static_cast<double>(t) - 0.5) / static_cast<double>(steps);
        for (std::size_t i = 0; i < d; ++i) point[i] = baseline[i] + alpha * (x[i] - baseline[i]);
        Vec g = nn::input_gradient(net, point, target_class);
        for (std::size_t i = 0; i < d; ++i) acc[i] += g[i];
    }
    Vec ig(d);
    for (std::size_t i = 0; i < d; ++i)
        ig[i] = (x[i] - baseline[i]) * acc[i] / static_cast<double>(steps);
    return ig;
}

Vec weighted_xai(const std::vector<AttributionRecord>& attributions, const Vec& weights) {
    if (attributions.empty()) throw std::invalid_argument("weighted_xai: no attributions");
    if (weights.size() != attributions.size())
        throw std::invalid_argument("weighted_xai: weight count != attribution count");
    const std::size_t d = attributions.front().feature_importances.size();
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("weighted_xai: negative weight");
        total += w;
    }
    if (total == 0.0) throw std::invalid_argument("weighted_xai: all weights are zero");
    Vec combined(d, 0.0);
    for (std::size_t m = 0; m < attributions.size(); ++m) {
        const Vec& e = attributions[m].feature_importances;
        if (e.size() != d)
            throw std::invalid_argument("weighted_xai: attribution length mismatch");
        const double w = weights[m] / total;
        for (std::size_t i = 0; i < d; ++i) combined[i] += w * e[i];
    }
    return combined;
}

std::string weight_report_json(const ModelWeightReport& report) {
    std::ostringstream out;
    out << "{\"per_model\":{";
    for (std::size_t m = 0; m < report.member_ids.size(); ++m) {
        if (m) out << ",";
        out << "\"" << report.member_ids[m]
            << "\":" << io::format_double(report.per_model_weight[m]);
    }
    out << "},\"per_modality\":{";
    bool first = true;
    for (const auto& [modality, w] : report.per_modality_weight) {
        if (!first) out << ",";
        first = false;
        out << "\"" << modality << "\":" << io::format_double(w);
    }
    out << "}}";
    return out.str();
}

std::string attribution_csv(const std::vector<std::string>& instance_ids,
                            const std::vector<std::vector<AttributionRecord>>& per_instance,
                            const std::vector<Vec>& combined,
                            const std::string& combined_modality) {
    if (instance_ids.size() != per_instance.size() || instance_ids.size() != combined.size())
        throw std::invalid_argument("attribution_csv: row count mismatch");
    std::ostringstream out;
    out << "id,model,feature,importance\n";
    for (std::size_t i = 0; i < instance_ids.size(); ++i) {
        for (const auto& rec : per_instance[i])
            for (std::size_t f = 0; f < rec.feature_importances.size(); ++f)
                out << instance_ids[i] << "," << rec.model_id << "," << f << ","
                    << io::format_double(rec.feature_importances[f]) << "\n";
        for (std::size_t f = 0; f < combined[i].size(); ++f)
            out << instance_ids[i] << ",combined:" << combined_modality << "," << f << ","
                << io::format_double(combined[i][f]) << "\n";
    }
    return out.str();
}

}  // namespace mmfuse::xai

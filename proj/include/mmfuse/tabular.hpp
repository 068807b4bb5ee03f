#pragma once

#include <string>
#include <vector>

#include "mmfuse/matrix.hpp"
#include "mmfuse/nn.hpp"

namespace mmfuse::tabular {

enum class ColumnKind { continuous, categorical };

/// One modality's table. Missing cells are tracked in missing_mask (1 =
/// missing) and hold 0 in features until imputation fills them.
struct TabularDataset {
    std::string modality;
    std::vector<std::string> ids;
    std::vector<std::string> feature_names;
    Matrix features;      // N x d
    Matrix missing_mask;  // N x d of 0/1
    std::vector<int> labels;
    std::vector<std::string> centers;

    std::size_t size() const { return features.rows; }
    std::size_t dim() const { return features.cols; }
    std::size_t n_classes() const;
    void validate() const;
};

/// Delimited text with reserved header columns `id`, `center`, `label`;
/// all other columns are features. Empty cells denote missing values.
TabularDataset load_csv(const std::string& path, const std::string& modality);
void save_csv(const TabularDataset& ds, const std::string& path);

// ---- Preprocessing (statistics fit on training rows only) ----

struct ImputeStats {
    std::vector<ColumnKind> kinds;
    Vec fill_values;  // training mean (continuous) or mode (categorical)
};

ImputeStats fit_impute(const TabularDataset& ds, const std::vector<ColumnKind>& kinds,
                       const std::vector<std::size_t>& train_rows);

/// Fills missing cells with the fitted statistics; the mask is preserved.
TabularDataset impute(const TabularDataset& ds, const ImputeStats& stats);

struct ScaleStats {
    Vec col_min, col_max;  // over training rows
};

ScaleStats fit_minmax(const TabularDataset& ds, const std::vector<std::size_t>& train_rows);

/// (x - min) / (max - min) per column; constant columns map to 0; every row
/// is clipped to [0,1], which leaves training rows untouched and bounds
/// held-out rows.
TabularDataset minmax_scale(const TabularDataset& ds, const ScaleStats& stats);

std::string impute_stats_to_json(const ImputeStats& im, const ScaleStats& sc);

// ---- Model zoo ----

struct MlpSpec {
    std::string name;
    std::vector<std::size_t> hidden_dims;
    std::size_t input_dim = 0;
    std::size_t output_dim = 2;
};

/// The four reference MLPs: mlp-1 [64,64,32], mlp-2 [64,128,128,64,32],
/// mlp-3 [64,128,256,256,128,64,32], mlp-4 [64,128,256,512,512,256,128,64,32].
/// ReLU on all hidden layers.
MlpSpec mlp_preset(const std::string& name, std::size_t input_dim, std::size_t output_dim);
bool is_mlp_preset(const std::string& name);

nn::DenseNetwork build_mlp(const MlpSpec& spec, Rng& rng);

nn::LabeledSet subset(const TabularDataset& ds, const std::vector<std::size_t>& rows);

/// Trains one (architecture, modality) cell on the given row split.
nn::TrainResult train_unimodal(const MlpSpec& spec, const TabularDataset& ds,
                               const std::vector<std::size_t>& train_rows,
                               const std::vector<std::size_t>& val_rows,
                               const nn::TrainConfig& cfg, double k);

// ---- Prediction matrices ----

struct PredictionMatrix {
    std::string model_id;
    std::string modality_id;
    std::string fold_id;
    std::vector<std::string> instance_ids;
    Matrix scores;  // N x c rows of softmax_k outputs
    std::vector<int> crisp_labels;

    std::size_t size() const { return scores.rows; }
    void validate() const;
};

PredictionMatrix predict(const nn::DenseNetwork& net, const TabularDataset& ds,
                         const std::vector<std::size_t>& rows, double k,
                         const std::string& model_id, const std::string& fold_id);

/// Delimited text, columns `id, fold, model, modality, score_0..score_{c-1}, crisp`.
std::string prediction_csv(const std::vector<PredictionMatrix>& mats);
std::vector<PredictionMatrix> parse_prediction_csv(const std::string& text);

}  // namespace mmfuse::tabular

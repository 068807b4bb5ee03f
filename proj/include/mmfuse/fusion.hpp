#pragma once

#include <string>
#include <vector>

#include "mmfuse/matrix.hpp"
#include "mmfuse/nn.hpp"

namespace mmfuse::fusion {

enum class Mode { soft, crisp };
enum class HeadKind { head1_linear, head2_hidden4 };
enum class FusionKind { jlf, jf_concat, jf_kron, majority };

/// Configuration of one fusion ensemble over a fixed, ordered member list.
struct FusionSpec {
    FusionKind kind = FusionKind::jlf;
    Mode mode = Mode::soft;
    HeadKind head = HeadKind::head1_linear;
    double k_soft = 1.0;      // member softmax temperature (soft representation, vote scores)
    double k_st = 50.0;       // straight-through backward temperature (crisp mode)
    int encoding_layer = -2;  // member layer feeding jf variants
    std::size_t n_classes = 2;
    std::vector<std::string> member_modality;  // parallel to member_model
    std::vector<std::string> member_model;
    std::vector<std::size_t> member_input;  // member -> modality feature index

    std::size_t member_count() const { return member_model.size(); }
    std::size_t shared_dim() const { return n_classes * member_count(); }
    std::string member_id(std::size_t m) const {
        return member_modality[m] + ":" + member_model[m];
    }
    void validate() const;
};

/// Rows aligned across modalities: modality_features[q] is N x d_q.
struct MultimodalSet {
    std::vector<Matrix> modality_features;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    void validate() const;
};

struct FusionModel {
    std::string variant;
    FusionSpec spec;
    std::vector<nn::DenseNetwork> member_nets;  // classifiers, or encoders for jf kinds
    nn::DenseNetwork head_net;                  // unused for majority voting
    bool frozen_members = false;

    void validate() const;
};

/// Concatenated member classification vectors: tempered softmax in soft
/// mode, one-hot argmax in crisp mode. Length n_classes * members.
Vec shared_representation(const std::vector<Vec>& member_logits, const FusionSpec& spec);

/// head1: shared_dim -> c linear. head2: shared_dim -> 4 (relu) -> c.
nn::DenseNetwork build_head(const FusionSpec& spec, Rng& rng);

/// Concatenation fusion: the head applied to [v_1; ...; v_m].
Vec jf_concat(const std::vector<Vec>& member_encodings, const nn::DenseNetwork& head);

/// Left-fold Kronecker product of the 1-augmented encodings [v_i; 1];
/// length is the product of (len(v_i) + 1). Needs >= 2 encodings.
Vec jf_kron(const std::vector<Vec>& member_encodings);

/// Head logits for one instance (per-modality feature rows). For majority
/// kind this is the summed member score vector (argmax = vote).
Vec fusion_logits(const FusionModel& model, const std::vector<Vec>& modality_rows);

std::vector<int> predict_classes(const FusionModel& model, const MultimodalSet& set);

struct Metrics {
    double acc = 0.0;
    double tpr = 0.0;  // NaN when no positives
    double tnr = 0.0;  // NaN when no negatives
};

/// Acc for any class count; TPR/TNR against class 1 = positive (binary).
Metrics classification_metrics(const std::vector<int>& predicted, const std::vector<int>& labels);
Metrics evaluate_fusion(const FusionModel& model, const MultimodalSet& test_set);

// ---- Joint training ----

struct JointGradients {
    std::vector<nn::Gradients> member_grads;
    nn::Gradients head_grads;
    double mean_loss = 0.0;
};

/// Loss and exact joint gradients for the given rows. Crisp mode runs the
/// hard one-hot forward and substitutes the tempered-softmax Jacobian
/// (temperature k_st) on the way back.
JointGradients joint_backward(const FusionModel& model, const MultimodalSet& set,
                              const std::vector<std::size_t>& rows);

double fusion_loss(const FusionModel& model, const MultimodalSet& set);

struct JointTrainOptions {
    bool update_members = true;
    bool update_head = true;
};

struct FusionTrainResult {
    FusionModel model;
    std::vector<nn::EpochLog> log;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    bool stopped_early = false;
};

/// Same schedule as nn::train (plateau LR decay, early stopping, restore
/// best weights), over all member and head parameters.
FusionTrainResult train_fusion(const FusionModel& init, const MultimodalSet& train_set,
                               const MultimodalSet& val_set, const nn::TrainConfig& cfg,
                               const JointTrainOptions& opts);

/// End-to-end: gradients flow through the shared representation into every
/// member net (member nets start from their unimodal weights).
FusionTrainResult train_jlf(const FusionModel& init, const MultimodalSet& train_set,
                            const MultimodalSet& val_set, const nn::TrainConfig& cfg);

/// Frozen members, head only; member parameters stay bit-identical.
FusionTrainResult train_lf_frozen(const FusionModel& init, const MultimodalSet& train_set,
                                  const MultimodalSet& val_set, const nn::TrainConfig& cfg);

// ---- Variant construction and serialization ----

bool is_known_variant(const std::string& name);
const std::vector<std::string>& all_variants();

/// Builds the model for a named variant (jlf-s-1, jlf-s-2, jlf-c-1, jlf-c-2,
/// lf-s-1, lf-s-2, lf-c-1, lf-c-2, lf-mv, jf-c, jf-m) from pre-trained
/// member classifiers. jf variants truncate members at spec.encoding_layer
/// and attach a linear head; the rng initializes head weights.
FusionModel make_variant(const std::string& name, const FusionSpec& base_spec,
                         const std::vector<nn::DenseNetwork>& member_nets, Rng& rng);

std::string serialize_fusion(const FusionModel& model);
FusionModel parse_fusion(std::istream& in);
void save_fusion(const FusionModel& model, const std::string& path);
FusionModel load_fusion(const std::string& path);

}  // namespace mmfuse::fusion

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mmfuse/fusion.hpp"
#include "mmfuse/selection.hpp"
#include "mmfuse/tabular.hpp"

namespace mmfuse::harness {

// ---- Synthetic multimodal data ----

struct ModalityGenConfig {
    std::string name;
    std::size_t dims = 4;
    double signal_strength = 1.0;  // 0 = pure noise
};

/// Binary labels; each modality hides a label-dependent shift in its first
/// three features (unit noise), mixed with a per-sample shared noise term
/// controlled by cross_noise so inter-model diversity is tunable. Centers
/// add a fixed per-center feature offset of magnitude center_shift.
struct SynthConfig {
    std::size_t n_samples = 1000;
    std::vector<ModalityGenConfig> modalities;
    double cross_noise = 0.0;  // 0 = independent modality noise, 1 = shared
    std::size_t n_centers = 1;
    double center_shift = 0.0;
    std::uint64_t seed = 0;
    std::string id_prefix = "s";  // distinguishes external cohorts

    void validate() const;
};

std::vector<tabular::TabularDataset> generate(const SynthConfig& cfg);

// ---- Split plans ----

enum class SplitKind { cv, loco, ev };
std::string split_kind_name(SplitKind k);

struct Fold {
    std::string id;
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

struct SplitPlan {
    SplitKind kind = SplitKind::cv;
    std::vector<Fold> folds;
};

/// Stratified k-fold: disjoint rotating test folds (~1/k of the data), the
/// remainder split so train/val sit at 70%/20% of the whole, stratified,
/// deterministic by seed. k must be >= 2.
SplitPlan make_cv_splits(const std::vector<int>& labels, std::size_t k_folds,
                         std::uint64_t seed);

/// One fold per distinct center: that center is the test set, the rest is
/// split train/val with val_fraction of the remainder going to validation.
SplitPlan make_loco_splits(const std::vector<std::string>& centers, double val_fraction,
                           std::uint64_t seed);

std::string split_plan_json(const SplitPlan& plan);
SplitPlan parse_split_plan_json(const std::string& text);

// ---- Experiment configuration ----

struct ModelConfig {
    std::string name;
    std::vector<std::size_t> hidden_dims;  // empty = resolve as an mlp preset
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    SynthConfig generator;
    SynthConfig external;  // EV cohort; n_samples 0 disables
    std::vector<ModelConfig> models;
    std::vector<std::vector<int>> theta;  // m x n actives; empty = all ones
    nn::TrainConfig training;
    nn::TrainConfig fusion_training;  // joint-training schedule (defaults to training)
    double softmax_k = 1.0;
    std::size_t candidate_cap = 0;       // 0 = uncapped
    bool reuse_cv_selection = true;      // loco reuses the cv-plan gamma*
    std::vector<std::string> variants;
    double k_soft = 1.0;
    double k_st = 50.0;
    int encoding_layer = -2;
    std::string ablate_modality;  // drop this modality's members from gamma*
    std::size_t cv_folds = 5;
    bool run_loco = true;
    bool run_ev = false;
    std::map<std::string, std::map<std::string, std::string>> column_kinds;

    void validate() const;
};

ExperimentConfig default_config();
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Apply a flat dotted-path override, e.g. "training.learning_rate=0.01".
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

// ---- Orchestration ----

struct MetricRow {
    std::string variant;
    std::string split;  // cv | loco | ev
    std::string fold;
    fusion::Metrics metrics;
};

struct VariantSummary {
    double acc_mean = 0.0, acc_std = 0.0;
    double tpr_mean = 0.0, tpr_std = 0.0;
    double tnr_mean = 0.0, tnr_std = 0.0;
    std::size_t folds = 0;
};

/// Everything one fold produced: fitted preprocessing, trained cells and
/// their validation predictions. Kept so selection, fusion and the leakage
/// audit can reuse the same artifacts.
struct FoldState {
    Fold fold;
    std::vector<tabular::ImputeStats> impute_stats;   // per modality
    std::vector<tabular::ScaleStats> scale_stats;     // per modality
    std::vector<tabular::TabularDataset> processed;   // per modality, all rows
    std::map<std::pair<std::size_t, std::size_t>, nn::DenseNetwork> cell_nets;
    std::map<std::pair<std::size_t, std::size_t>, std::vector<nn::EpochLog>> cell_logs;
    selection::FoldData val_data;
};

std::string training_log_csv(const std::vector<nn::EpochLog>& log);

struct ExperimentResult {
    selection::ApplicationMatrix theta;
    selection::SelectionResult selection;
    std::vector<MetricRow> rows;
    std::map<std::string, std::map<std::string, VariantSummary>> summary;  // variant -> split
    std::vector<FoldState> cv_states;  // retained for audits and the CLI
};

selection::ApplicationMatrix build_theta(const ExperimentConfig& cfg);

/// Preprocess (fit on train rows only), train every active cell, predict on
/// the validation rows.
FoldState run_fold(const ExperimentConfig& cfg,
                   const std::vector<tabular::TabularDataset>& datasets, const Fold& fold,
                   const std::string& fold_id);

/// Full pipeline on the given datasets: CV plan, selection on the CV
/// validation predictions, fusion variants per fold, optional LOCO (reusing
/// gamma*) and optional external validation of the CV-fold models.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::vector<tabular::TabularDataset>& datasets,
                                const std::vector<tabular::TabularDataset>& external);

/// Convenience: generate the data from cfg.generator / cfg.external first.
ExperimentResult run_generated_experiment(const ExperimentConfig& cfg);

std::string metrics_csv(const std::vector<MetricRow>& rows);
std::vector<MetricRow> parse_metrics_csv(const std::string& text);
std::map<std::string, std::map<std::string, VariantSummary>> summarize(
    const std::vector<MetricRow>& rows);
std::string summary_csv(const std::map<std::string, std::map<std::string, VariantSummary>>& s);

}  // namespace mmfuse::harness

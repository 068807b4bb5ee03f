#include "mmfuse/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "mmfuse/io.hpp"

namespace mmfuse::harness {

using nlohmann::json;

namespace {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b,
                          std::uint64_t c) {
    Rng rng(master);
    return rng.fork(a * 1000003ULL + b * 131ULL + c).next_u64();
}

}  // namespace

// ---- Synthetic data ----

void SynthConfig::validate() const {
    if (modalities.empty()) throw std::invalid_argument("generator: no modalities");
    for (const auto& m : modalities) {
        if (m.dims < 1) throw std::invalid_argument("generator: modality dims must be >= 1");
        if (m.signal_strength < 0)
            throw std::invalid_argument("generator: negative signal strength");
    }
    if (n_centers < 1) throw std::invalid_argument("generator: needs >= 1 center");
    if (cross_noise < 0.0 || cross_noise > 1.0)
        throw std::invalid_argument("generator: cross_noise outside [0,1]");
}

std::vector<tabular::TabularDataset> generate(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);

    std::vector<int> labels(cfg.n_samples);
    std::vector<std::size_t> centers(cfg.n_samples);
    for (std::size_t i = 0; i < cfg.n_samples; ++i) {
        labels[i] = static_cast<int>(rng.below(2));
        centers[i] = static_cast<std::size_t>(rng.below(cfg.n_centers));
    }
    // fixed per-(center, modality, feature) offsets
    std::vector<std::vector<Vec>> center_offsets(cfg.n_centers);
    for (std::size_t c = 0; c < cfg.n_centers; ++c) {
        center_offsets[c].resize(cfg.modalities.size());
        for (std::size_t q = 0; q < cfg.modalities.size(); ++q) {
            center_offsets[c][q].resize(cfg.modalities[q].dims);
            for (auto& v : center_offsets[c][q]) v = cfg.center_shift * rng.gauss();
        }
    }

    std::vector<tabular::TabularDataset> out(cfg.modalities.size());
    for (std::size_t q = 0; q < cfg.modalities.size(); ++q) {
        auto& ds = out[q];
        ds.modality = cfg.modalities[q].name;
        ds.features = Matrix(cfg.n_samples, cfg.modalities[q].dims);
        ds.missing_mask = Matrix(cfg.n_samples, cfg.modalities[q].dims);
        for (std::size_t j = 0; j < cfg.modalities[q].dims; ++j)
            ds.feature_names.push_back("f" + std::to_string(j));
        ds.labels = labels;
    }
    for (std::size_t i = 0; i < cfg.n_samples; ++i) {
        const double sign = labels[i] == 1 ? 1.0 : -1.0;
        const double shared = rng.gauss();
        const std::string center_name = cfg.id_prefix + "c" + std::to_string(centers[i]);
        const std::string id = cfg.id_prefix + std::to_string(i);
        for (std::size_t q = 0; q < cfg.modalities.size(); ++q) {
            const auto& mc = cfg.modalities[q];
            const std::size_t informative = std::min<std::size_t>(3, mc.dims);
            const double shift = mc.signal_strength / std::sqrt(static_cast<double>(informative));
            for (std::size_t j = 0; j < mc.dims; ++j) {
                double noise = rng.gauss();
                double v = center_offsets[centers[i]][q][j];
                if (j < informative)
                    v += shift * sign + std::sqrt(1.0 - cfg.cross_noise) * noise +
                         std::sqrt(cfg.cross_noise) * shared;
                else
                    v += noise;
                out[q].features(i, j) = v;
            }
            out[q].ids.push_back(id);
            out[q].centers.push_back(center_name);
        }
    }
    for (auto& ds : out) ds.validate();
    return out;
}

// ---- Splits ----

std::string split_kind_name(SplitKind k) {
    switch (k) {
        case SplitKind::cv: return "cv";
        case SplitKind::loco: return "loco";
        case SplitKind::ev: return "ev";
    }
    return "cv";
}

namespace {

/// Deal each class round-robin into k buckets after a seeded shuffle.
std::vector<std::vector<std::size_t>> stratified_buckets(const std::vector<int>& labels,
                                                         std::size_t k, Rng& rng) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    std::vector<std::vector<std::size_t>> buckets(k);
    for (auto& [label, ids] : by_class) {
        if (ids.size() < k)
            throw std::invalid_argument("cv split: class " + std::to_string(label) +
                                        " has fewer samples than folds");
        rng.shuffle(ids);
        for (std::size_t i = 0; i < ids.size(); ++i) buckets[i % k].push_back(ids[i]);
    }
    for (auto& b : buckets) std::sort(b.begin(), b.end());
    return buckets;
}

}  // namespace

SplitPlan make_cv_splits(const std::vector<int>& labels, std::size_t k_folds,
                         std::uint64_t seed) {
    if (k_folds < 2) throw std::invalid_argument("cv split: needs k >= 2 folds");
    if (labels.empty()) throw std::invalid_argument("cv split: empty label list");
    Rng rng(seed);
    auto buckets = stratified_buckets(labels, k_folds, rng);

    SplitPlan plan;
    plan.kind = SplitKind::cv;
    for (std::size_t f = 0; f < k_folds; ++f) {
        Fold fold;
        fold.id = "cv" + std::to_string(f);
        fold.test = buckets[f];
        std::vector<std::size_t> rest;
        for (std::size_t g = 0; g < k_folds; ++g)
            if (g != f) rest.insert(rest.end(), buckets[g].begin(), buckets[g].end());
        // stratified train/val split of the remainder: 20% of the whole goes
        // to validation, i.e. 2/9 of the remaining 90%
        std::map<int, std::vector<std::size_t>> by_class;
        for (std::size_t idx : rest) by_class[labels[idx]].push_back(idx);
        Rng fold_rng = rng.fork(1000 + f);
        for (auto& [label, ids] : by_class) {
            fold_rng.shuffle(ids);
            const std::size_t n_val = static_cast<std::size_t>(
                std::llround(static_cast<double>(ids.size()) * 2.0 / 9.0));
            for (std::size_t i = 0; i < ids.size(); ++i)
                (i < n_val ? fold.val : fold.train).push_back(ids[i]);
        }
        std::sort(fold.train.begin(), fold.train.end());
        std::sort(fold.val.begin(), fold.val.end());
        if (fold.train.empty() || fold.val.empty())
            throw std::invalid_argument("cv split: empty train or validation partition");
        plan.folds.push_back(std::move(fold));
    }
    return plan;
}

SplitPlan make_loco_splits(const std::vector<std::string>& centers, double val_fraction,
                           std::uint64_t seed) {
    if (centers.empty()) throw std::invalid_argument("loco split: empty center list");
    if (val_fraction <= 0.0 || val_fraction >= 1.0)
        throw std::invalid_argument("loco split: val_fraction outside (0,1)");
    std::set<std::string> distinct(centers.begin(), centers.end());
    if (distinct.size() < 2) throw std::invalid_argument("loco split: needs >= 2 centers");

    SplitPlan plan;
    plan.kind = SplitKind::loco;
    Rng rng(seed);
    std::size_t fold_index = 0;
    for (const auto& held_out : distinct) {
        Fold fold;
        fold.id = "loco-" + held_out;
        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < centers.size(); ++i)
            (centers[i] == held_out ? fold.test : rest).push_back(i);
        Rng fold_rng = rng.fork(fold_index++);
        fold_rng.shuffle(rest);
        const std::size_t n_val = static_cast<std::size_t>(
            std::llround(static_cast<double>(rest.size()) * val_fraction));
        for (std::size_t i = 0; i < rest.size(); ++i)
            (i < n_val ? fold.val : fold.train).push_back(rest[i]);
        std::sort(fold.train.begin(), fold.train.end());
        std::sort(fold.val.begin(), fold.val.end());
        if (fold.train.empty() || fold.val.empty())
            throw std::invalid_argument("loco split: center " + held_out +
                                        " leaves an empty train or validation set");
        plan.folds.push_back(std::move(fold));
    }
    return plan;
}

std::string split_plan_json(const SplitPlan& plan) {
    json j;
    j["kind"] = split_kind_name(plan.kind);
    j["folds"] = json::array();
    for (const auto& f : plan.folds)
        j["folds"].push_back({{"id", f.id}, {"train", f.train}, {"val", f.val}, {"test", f.test}});
    return j.dump(2);
}

SplitPlan parse_split_plan_json(const std::string& text) {
    json j = json::parse(text);
    SplitPlan plan;
    const std::string kind = j.at("kind").get<std::string>();
    plan.kind = kind == "loco" ? SplitKind::loco : kind == "ev" ? SplitKind::ev : SplitKind::cv;
    for (const auto& jf : j.at("folds")) {
        Fold f;
        f.id = jf.at("id").get<std::string>();
        f.train = jf.at("train").get<std::vector<std::size_t>>();
        f.val = jf.at("val").get<std::vector<std::size_t>>();
        f.test = jf.at("test").get<std::vector<std::size_t>>();
        plan.folds.push_back(std::move(f));
    }
    return plan;
}

// ---- Configuration ----

void ExperimentConfig::validate() const {
    generator.validate();
    if (models.empty()) throw std::invalid_argument("config: no model architectures");
    training.validate();
    fusion_training.validate();
    if (softmax_k <= 0.0 || k_soft <= 0.0 || k_st <= 0.0)
        throw std::invalid_argument("config: temperatures must be positive");
    if (cv_folds < 2) throw std::invalid_argument("config: cv_folds must be >= 2");
    for (const auto& v : variants)
        if (!fusion::is_known_variant(v))
            throw std::invalid_argument("config: unknown fusion variant " + v);
    if (!theta.empty()) {
        if (theta.size() != generator.modalities.size())
            throw std::invalid_argument("config: theta rows != modality count");
        for (const auto& row : theta)
            if (row.size() != models.size())
                throw std::invalid_argument("config: theta cols != model count");
    }
}

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.generator.n_samples = 2000;
    cfg.generator.n_centers = 4;
    cfg.generator.center_shift = 0.3;
    cfg.generator.modalities = {{"cli", 6, 0.8}, {"img", 6, 0.8}};
    cfg.external = cfg.generator;
    cfg.external.n_samples = 0;  // disabled until requested
    cfg.external.n_centers = 2;
    cfg.external.id_prefix = "e";
    cfg.models = {{"net-a", {16, 8}}, {"net-b", {24, 12}}};
    cfg.variants = {"jlf-s-1", "jlf-s-2", "jlf-c-1", "jlf-c-2", "lf-mv"};
    cfg.fusion_training = cfg.training;
    return cfg;
}

namespace {

void parse_training(const json& jt, nn::TrainConfig& tc) {
    if (jt.contains("learning_rate")) tc.learning_rate = jt["learning_rate"].get<double>();
    if (jt.contains("batch_size")) tc.batch_size = jt["batch_size"].get<std::size_t>();
    if (jt.contains("max_epochs")) tc.max_epochs = jt["max_epochs"].get<std::size_t>();
    if (jt.contains("early_stop_patience"))
        tc.early_stop_patience = jt["early_stop_patience"].get<std::size_t>();
    if (jt.contains("lr_plateau_patience"))
        tc.lr_plateau_patience = jt["lr_plateau_patience"].get<std::size_t>();
    if (jt.contains("lr_decay_factor")) tc.lr_decay_factor = jt["lr_decay_factor"].get<double>();
}

}  // namespace

namespace {

void parse_generator(const json& j, SynthConfig& gen, bool allow_modalities) {
    if (j.contains("n_samples")) gen.n_samples = j["n_samples"].get<std::size_t>();
    if (j.contains("n_centers")) gen.n_centers = j["n_centers"].get<std::size_t>();
    if (j.contains("center_shift")) gen.center_shift = j["center_shift"].get<double>();
    if (j.contains("cross_noise")) gen.cross_noise = j["cross_noise"].get<double>();
    if (j.contains("seed")) gen.seed = j["seed"].get<std::uint64_t>();
    if (allow_modalities && j.contains("modalities")) {
        gen.modalities.clear();
        for (const auto& jm : j["modalities"]) {
            ModalityGenConfig mc;
            mc.name = jm.at("name").get<std::string>();
            if (jm.contains("dims")) mc.dims = jm["dims"].get<std::size_t>();
            if (jm.contains("signal_strength"))
                mc.signal_strength = jm["signal_strength"].get<double>();
            gen.modalities.push_back(std::move(mc));
        }
    }
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: malformed json: ") + e.what());
    }
    ExperimentConfig cfg = default_config();
    try {
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("generator")) parse_generator(j["generator"], cfg.generator, true);
        cfg.external = cfg.generator;
        cfg.external.n_samples = 0;
        cfg.external.n_centers = 2;
        cfg.external.id_prefix = "e";
        if (j.contains("external")) parse_generator(j["external"], cfg.external, false);
        if (j.contains("models")) {
            cfg.models.clear();
            for (const auto& jm : j["models"]) {
                ModelConfig mc;
                mc.name = jm.at("name").get<std::string>();
                if (jm.contains("hidden"))
                    mc.hidden_dims = jm["hidden"].get<std::vector<std::size_t>>();
                cfg.models.push_back(std::move(mc));
            }
        }
        if (j.contains("theta")) cfg.theta = j["theta"].get<std::vector<std::vector<int>>>();
        if (j.contains("training")) parse_training(j["training"], cfg.training);
        cfg.fusion_training = cfg.training;
        if (j.contains("softmax_k")) cfg.softmax_k = j["softmax_k"].get<double>();
        if (j.contains("selection")) {
            if (j["selection"].contains("max_size"))
                cfg.candidate_cap = j["selection"]["max_size"].get<std::size_t>();
            if (j["selection"].contains("reuse_cv"))
                cfg.reuse_cv_selection = j["selection"]["reuse_cv"].get<bool>();
        }
        if (j.contains("fusion")) {
            const auto& jf = j["fusion"];
            if (jf.contains("variants"))
                cfg.variants = jf["variants"].get<std::vector<std::string>>();
            if (jf.contains("k_soft")) cfg.k_soft = jf["k_soft"].get<double>();
            if (jf.contains("k_st")) cfg.k_st = jf["k_st"].get<double>();
            if (jf.contains("encoding_layer"))
                cfg.encoding_layer = jf["encoding_layer"].get<int>();
            if (jf.contains("ablate_modality"))
                cfg.ablate_modality = jf["ablate_modality"].get<std::string>();
            if (jf.contains("training")) parse_training(jf["training"], cfg.fusion_training);
        }
        if (j.contains("splits")) {
            const auto& js = j["splits"];
            if (js.contains("cv_folds")) cfg.cv_folds = js["cv_folds"].get<std::size_t>();
            if (js.contains("loco")) cfg.run_loco = js["loco"].get<bool>();
            if (js.contains("ev")) cfg.run_ev = js["ev"].get<bool>();
        }
        if (j.contains("column_kinds"))
            cfg.column_kinds =
                j["column_kinds"]
                    .get<std::map<std::string, std::map<std::string, std::string>>>();
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: bad field: ") + e.what());
    }
    cfg.generator.seed = cfg.seed;
    if (!j.contains("external") || !j["external"].contains("seed"))
        cfg.external.seed = cfg.seed + 1000003ULL;
    cfg.training.seed = cfg.seed;
    cfg.fusion_training.seed = cfg.seed;
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    return config_from_json(io::read_file(path));
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw std::invalid_argument("override must look like key.path=value: " + assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    auto as_u = [&] { return static_cast<std::uint64_t>(std::stoull(value)); };
    auto as_z = [&] { return static_cast<std::size_t>(std::stoull(value)); };
    auto as_d = [&] { return std::stod(value); };
    if (path == "seed") {
        cfg.seed = as_u();
        cfg.generator.seed = cfg.seed;
        cfg.external.seed = cfg.seed + 1000003ULL;
        cfg.training.seed = cfg.seed;
        cfg.fusion_training.seed = cfg.seed;
    } else if (path == "generator.n_samples")
        cfg.generator.n_samples = as_z();
    else if (path == "generator.n_centers")
        cfg.generator.n_centers = as_z();
    else if (path == "generator.center_shift")
        cfg.generator.center_shift = as_d();
    else if (path == "generator.cross_noise")
        cfg.generator.cross_noise = as_d();
    else if (path == "external.n_samples")
        cfg.external.n_samples = as_z();
    else if (path == "external.n_centers")
        cfg.external.n_centers = as_z();
    else if (path == "training.learning_rate")
        cfg.training.learning_rate = as_d();
    else if (path == "training.batch_size")
        cfg.training.batch_size = as_z();
    else if (path == "training.max_epochs")
        cfg.training.max_epochs = as_z();
    else if (path == "training.early_stop_patience")
        cfg.training.early_stop_patience = as_z();
    else if (path == "training.lr_plateau_patience")
        cfg.training.lr_plateau_patience = as_z();
    else if (path == "training.lr_decay_factor")
        cfg.training.lr_decay_factor = as_d();
    else if (path == "fusion.training.learning_rate")
        cfg.fusion_training.learning_rate = as_d();
    else if (path == "fusion.training.batch_size")
        cfg.fusion_training.batch_size = as_z();
    else if (path == "fusion.training.max_epochs")
        cfg.fusion_training.max_epochs = as_z();
    else if (path == "fusion.training.early_stop_patience")
        cfg.fusion_training.early_stop_patience = as_z();
    else if (path == "fusion.training.lr_plateau_patience")
        cfg.fusion_training.lr_plateau_patience = as_z();
    else if (path == "fusion.training.lr_decay_factor")
        cfg.fusion_training.lr_decay_factor = as_d();
    else if (path == "softmax_k")
        cfg.softmax_k = as_d();
    else if (path == "selection.max_size")
        cfg.candidate_cap = as_z();
    else if (path == "selection.reuse_cv")
        cfg.reuse_cv_selection = value == "true" || value == "1";
    else if (path == "fusion.k_soft")
        cfg.k_soft = as_d();
    else if (path == "fusion.k_st")
        cfg.k_st = as_d();
    else if (path == "fusion.encoding_layer")
        cfg.encoding_layer = std::stoi(value);
    else if (path == "fusion.ablate_modality")
        cfg.ablate_modality = value;
    else if (path == "splits.cv_folds")
        cfg.cv_folds = as_z();
    else if (path == "splits.loco")
        cfg.run_loco = value == "true" || value == "1";
    else if (path == "splits.ev")
        cfg.run_ev = value == "true" || value == "1";
    else
        throw std::invalid_argument("unknown override key: " + path);
    cfg.validate();
}

// ---- Orchestration ----

selection::ApplicationMatrix build_theta(const ExperimentConfig& cfg) {
    selection::ApplicationMatrix theta;
    for (const auto& m : cfg.generator.modalities) theta.modalities.push_back(m.name);
    for (const auto& m : cfg.models) theta.models.push_back(m.name);
    theta.cells.assign(theta.modalities.size() * theta.models.size(), 1);
    if (!cfg.theta.empty())
        for (std::size_t i = 0; i < cfg.theta.size(); ++i)
            for (std::size_t j = 0; j < cfg.theta[i].size(); ++j)
                theta.cells[i * theta.models.size() + j] = cfg.theta[i][j] != 0;
    theta.validate();
    return theta;
}

namespace {

std::vector<tabular::ColumnKind> resolve_kinds(const ExperimentConfig& cfg,
                                               const tabular::TabularDataset& ds) {
    std::vector<tabular::ColumnKind> kinds(ds.dim(), tabular::ColumnKind::continuous);
    auto it = cfg.column_kinds.find(ds.modality);
    if (it == cfg.column_kinds.end()) return kinds;
    for (std::size_t j = 0; j < ds.dim(); ++j) {
        auto jt = it->second.find(ds.feature_names[j]);
        if (jt != it->second.end() && jt->second == "categorical")
            kinds[j] = tabular::ColumnKind::categorical;
    }
    return kinds;
}

tabular::MlpSpec resolve_spec(const ModelConfig& mc, std::size_t input_dim,
                              std::size_t n_classes) {
    if (mc.hidden_dims.empty()) return tabular::mlp_preset(mc.name, input_dim, n_classes);
    return tabular::MlpSpec{mc.name, mc.hidden_dims, input_dim, n_classes};
}

fusion::MultimodalSet make_multimodal(const std::vector<tabular::TabularDataset>& processed,
                                      const std::vector<std::size_t>& rows) {
    fusion::MultimodalSet set;
    for (const auto& ds : processed)
        set.modality_features.push_back(submatrix_rows(ds.features, rows));
    for (std::size_t r : rows) set.labels.push_back(processed.front().labels[r]);
    return set;
}

void check_alignment(const std::vector<tabular::TabularDataset>& datasets) {
    if (datasets.empty()) throw std::invalid_argument("experiment: no datasets");
    const auto& ref = datasets.front();
    for (const auto& ds : datasets) {
        ds.validate();
        if (ds.ids != ref.ids || ds.labels != ref.labels || ds.centers != ref.centers)
            throw std::invalid_argument(
                "experiment: modalities disagree on ids, labels or centers");
    }
}

struct TrainedVariants {
    std::vector<std::string> names;
    std::vector<fusion::FusionModel> models;
};

}  // namespace

FoldState run_fold(const ExperimentConfig& cfg,
                   const std::vector<tabular::TabularDataset>& datasets, const Fold& fold,
                   const std::string& fold_id) {
    FoldState state;
    state.fold = fold;
    const std::size_t n_classes = datasets.front().n_classes();
    for (std::size_t q = 0; q < datasets.size(); ++q) {
        auto kinds = resolve_kinds(cfg, datasets[q]);
        auto im = tabular::fit_impute(datasets[q], kinds, fold.train);
        tabular::TabularDataset filled = tabular::impute(datasets[q], im);
        auto sc = tabular::fit_minmax(filled, fold.train);
        state.impute_stats.push_back(std::move(im));
        state.scale_stats.push_back(sc);
        state.processed.push_back(tabular::minmax_scale(filled, sc));
    }
    state.val_data.fold_id = fold_id;
    for (std::size_t r : fold.val)
        state.val_data.labels.push_back(datasets.front().labels[r]);

    for (std::size_t q = 0; q < datasets.size(); ++q) {
        for (std::size_t j = 0; j < cfg.models.size(); ++j) {
            if (!cfg.theta.empty() && cfg.theta[q][j] == 0) continue;
            tabular::MlpSpec spec =
                resolve_spec(cfg.models[j], state.processed[q].dim(), n_classes);
            nn::TrainConfig tc = cfg.training;
            tc.seed = derive_seed(cfg.seed, std::hash<std::string>{}(fold_id), q, j);
            try {
                auto result = tabular::train_unimodal(spec, state.processed[q], fold.train,
                                                      fold.val, tc, cfg.softmax_k);
                state.cell_nets[{q, j}] = std::move(result.net);
                state.cell_logs[{q, j}] = std::move(result.log);
            } catch (const std::exception& e) {
                throw std::runtime_error("fold " + fold_id + ", cell " +
                                         state.processed[q].modality + ":" + cfg.models[j].name +
                                         ": " + e.what());
            }
            state.val_data.predictions[{q, j}] =
                tabular::predict(state.cell_nets[{q, j}], state.processed[q], fold.val,
                                 cfg.softmax_k, cfg.models[j].name, fold_id);
        }
    }
    return state;
}

namespace {

fusion::FusionSpec gamma_star_spec(const ExperimentConfig& cfg,
                                   const selection::ApplicationMatrix& theta,
                                   const selection::CandidateSet& gamma_star,
                                   std::size_t n_classes) {
    fusion::FusionSpec spec;
    spec.n_classes = n_classes;
    spec.k_soft = cfg.k_soft;
    spec.k_st = cfg.k_st;
    spec.encoding_layer = cfg.encoding_layer;
    for (const auto& m : gamma_star.members) {
        if (!cfg.ablate_modality.empty() && theta.modalities[m.modality] == cfg.ablate_modality)
            continue;
        spec.member_modality.push_back(theta.modalities[m.modality]);
        spec.member_model.push_back(theta.models[m.model]);
        spec.member_input.push_back(m.modality);
    }
    if (spec.member_model.empty())
        throw std::invalid_argument("ablation removed every gamma* member");
    return spec;
}

TrainedVariants train_fold_variants(const ExperimentConfig& cfg, const FoldState& state,
                                    const fusion::FusionSpec& spec,
                                    const selection::CandidateSet& gamma_star,
                                    const std::string& fold_tag) {
    TrainedVariants out;
    std::vector<nn::DenseNetwork> members;
    {
        std::size_t kept = 0;
        for (const auto& m : gamma_star.members) {
            if (!cfg.ablate_modality.empty() &&
                state.processed[m.modality].modality == cfg.ablate_modality)
                continue;
            auto it = state.cell_nets.find({m.modality, m.model});
            if (it == state.cell_nets.end())
                throw std::runtime_error(fold_tag + ": gamma* member has no trained network");
            members.push_back(it->second);
            ++kept;
        }
        if (kept != spec.member_count())
            throw std::runtime_error(fold_tag + ": member list mismatch");
    }
    fusion::MultimodalSet train_set = make_multimodal(state.processed, state.fold.train);
    fusion::MultimodalSet val_set = make_multimodal(state.processed, state.fold.val);
    for (std::size_t v = 0; v < cfg.variants.size(); ++v) {
        const std::string& name = cfg.variants[v];
        Rng rng(derive_seed(cfg.seed, std::hash<std::string>{}(fold_tag), 7777, v));
        fusion::FusionModel model = fusion::make_variant(name, spec, members, rng);
        try {
            if (model.spec.kind != fusion::FusionKind::majority) {
                nn::TrainConfig tc = cfg.fusion_training;
                tc.seed = derive_seed(cfg.seed, std::hash<std::string>{}(fold_tag), 991, v);
                fusion::JointTrainOptions opts;
                opts.update_members = !model.frozen_members;
                model = fusion::train_fusion(model, train_set, val_set, tc, opts).model;
            }
        } catch (const std::exception& e) {
            throw std::runtime_error(fold_tag + ", variant " + name + ": " + e.what());
        }
        out.names.push_back(name);
        out.models.push_back(std::move(model));
    }
    return out;
}

void unimodal_rows(const ExperimentConfig& cfg, const FoldState& state,
                   const std::string& split, const std::string& fold_id,
                   const std::vector<tabular::TabularDataset>& eval_sets,
                   const std::vector<std::size_t>& eval_rows, std::vector<MetricRow>& rows) {
    for (const auto& [cell, net] : state.cell_nets) {
        const auto& ds = eval_sets[cell.first];
        std::vector<int> predicted;
        predicted.reserve(eval_rows.size());
        for (std::size_t r : eval_rows)
            predicted.push_back(
                static_cast<int>(argmax(nn::forward(net, ds.features.row(r)))));
        std::vector<int> truth;
        truth.reserve(eval_rows.size());
        for (std::size_t r : eval_rows) truth.push_back(ds.labels[r]);
        MetricRow row;
        row.variant = "uni:" + ds.modality + ":" + cfg.models[cell.second].name;
        row.split = split;
        row.fold = fold_id;
        row.metrics = fusion::classification_metrics(predicted, truth);
        rows.push_back(std::move(row));
    }
}

std::vector<tabular::TabularDataset> preprocess_external(
    const std::vector<tabular::TabularDataset>& external, const FoldState& state) {
    std::vector<tabular::TabularDataset> out;
    for (std::size_t q = 0; q < external.size(); ++q) {
        tabular::TabularDataset filled = tabular::impute(external[q], state.impute_stats[q]);
        out.push_back(tabular::minmax_scale(filled, state.scale_stats[q]));
    }
    return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::vector<tabular::TabularDataset>& datasets,
                                const std::vector<tabular::TabularDataset>& external) {
    cfg.validate();
    check_alignment(datasets);
    if (datasets.size() != cfg.generator.modalities.size())
        throw std::invalid_argument("experiment: dataset count != configured modalities");
    if (!external.empty()) check_alignment(external);

    ExperimentResult result;
    result.theta = build_theta(cfg);
    const std::size_t n_classes = datasets.front().n_classes();

    SplitPlan cv = make_cv_splits(datasets.front().labels, cfg.cv_folds, cfg.seed);
    for (const auto& fold : cv.folds)
        result.cv_states.push_back(run_fold(cfg, datasets, fold, fold.id));

    std::vector<selection::FoldData> fold_data;
    for (const auto& state : result.cv_states) fold_data.push_back(state.val_data);
    result.selection = selection::run_selection(result.theta, fold_data, cfg.candidate_cap);
    const selection::CandidateSet& gamma_star =
        result.selection.scored[result.selection.gamma_star].candidate;
    fusion::FusionSpec spec = gamma_star_spec(cfg, result.theta, gamma_star, n_classes);

    std::vector<TrainedVariants> cv_variants;
    for (const auto& state : result.cv_states) {
        const std::string fold_id = state.fold.id;
        unimodal_rows(cfg, state, "cv", fold_id, state.processed, state.fold.test, result.rows);
        TrainedVariants tv = train_fold_variants(cfg, state, spec, gamma_star, fold_id);
        fusion::MultimodalSet test_set = make_multimodal(state.processed, state.fold.test);
        for (std::size_t v = 0; v < tv.names.size(); ++v)
            result.rows.push_back(
                {tv.names[v], "cv", fold_id, fusion::evaluate_fusion(tv.models[v], test_set)});
        cv_variants.push_back(std::move(tv));
    }

    if (cfg.run_loco) {
        SplitPlan loco = make_loco_splits(datasets.front().centers, 2.0 / 9.0, cfg.seed + 17);
        std::vector<FoldState> loco_states;
        for (const auto& fold : loco.folds)
            loco_states.push_back(run_fold(cfg, datasets, fold, fold.id));

        // by default the cv-plan gamma* carries over; optionally recompute it
        // from the loco validation predictions
        const selection::CandidateSet* loco_star = &gamma_star;
        selection::SelectionResult loco_selection;
        fusion::FusionSpec loco_spec = spec;
        if (!cfg.reuse_cv_selection) {
            std::vector<selection::FoldData> loco_fold_data;
            for (const auto& state : loco_states) loco_fold_data.push_back(state.val_data);
            loco_selection =
                selection::run_selection(result.theta, loco_fold_data, cfg.candidate_cap);
            loco_star = &loco_selection.scored[loco_selection.gamma_star].candidate;
            loco_spec = gamma_star_spec(cfg, result.theta, *loco_star, n_classes);
        }
        for (const auto& state : loco_states) {
            const auto& fold = state.fold;
            unimodal_rows(cfg, state, "loco", fold.id, state.processed, fold.test, result.rows);
            TrainedVariants tv = train_fold_variants(cfg, state, loco_spec, *loco_star, fold.id);
            fusion::MultimodalSet test_set = make_multimodal(state.processed, fold.test);
            for (std::size_t v = 0; v < tv.names.size(); ++v)
                result.rows.push_back(
                    {tv.names[v], "loco", fold.id,
                     fusion::evaluate_fusion(tv.models[v], test_set)});
        }
    }

    if (cfg.run_ev && !external.empty()) {
        std::vector<std::size_t> all_rows(external.front().size());
        std::iota(all_rows.begin(), all_rows.end(), 0);
        for (std::size_t f = 0; f < result.cv_states.size(); ++f) {
            const auto& state = result.cv_states[f];
            auto processed_ext = preprocess_external(external, state);
            unimodal_rows(cfg, state, "ev", state.fold.id, processed_ext, all_rows, result.rows);
            fusion::MultimodalSet ext_set = make_multimodal(processed_ext, all_rows);
            for (std::size_t v = 0; v < cv_variants[f].names.size(); ++v)
                result.rows.push_back(
                    {cv_variants[f].names[v], "ev", state.fold.id,
                     fusion::evaluate_fusion(cv_variants[f].models[v], ext_set)});
        }
    }

    result.summary = summarize(result.rows);
    return result;
}

ExperimentResult run_generated_experiment(const ExperimentConfig& cfg) {
    auto datasets = generate(cfg.generator);
    std::vector<tabular::TabularDataset> external;
    if (cfg.run_ev && cfg.external.n_samples > 0) {
        SynthConfig ext = cfg.external;
        ext.modalities = cfg.generator.modalities;
        external = generate(ext);
    }
    return run_experiment(cfg, datasets, external);
}

// ---- Reports ----

std::string training_log_csv(const std::vector<nn::EpochLog>& log) {
    std::ostringstream out;
    out << "epoch,train_loss,val_loss,lr,improved\n";
    for (const auto& e : log)
        out << e.epoch << "," << io::format_double(e.train_loss) << ","
            << io::format_double(e.val_loss) << "," << io::format_double(e.lr) << ","
            << (e.improved ? 1 : 0) << "\n";
    return out.str();
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
    std::ostringstream out;
    out << "variant,split,fold,acc,tpr,tnr\n";
    for (const auto& r : rows)
        out << r.variant << "," << r.split << "," << r.fold << ","
            << io::format_double(r.metrics.acc) << "," << io::format_double(r.metrics.tpr) << ","
            << io::format_double(r.metrics.tnr) << "\n";
    return out.str();
}

std::vector<MetricRow> parse_metrics_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "variant,split,fold,acc,tpr,tnr")
        throw std::runtime_error("metrics csv: unexpected header");
    std::vector<MetricRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = io::split(line, ',');
        if (f.size() != 6) throw std::runtime_error("metrics csv: ragged row");
        MetricRow r;
        r.variant = f[0];
        r.split = f[1];
        r.fold = f[2];
        r.metrics.acc = std::stod(f[3]);
        r.metrics.tpr = std::stod(f[4]);
        r.metrics.tnr = std::stod(f[5]);
        rows.push_back(std::move(r));
    }
    return rows;
}

namespace {

void accumulate(std::vector<double>& values, double v) {
    if (std::isfinite(v)) values.push_back(v);
}

std::pair<double, double> mean_std(const std::vector<double>& values) {
    if (values.empty()) return {std::nan(""), std::nan("")};
    double mean = std::accumulate(values.begin(), values.end(), 0.0) /
                  static_cast<double>(values.size());
    if (values.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

}  // namespace

std::map<std::string, std::map<std::string, VariantSummary>> summarize(
    const std::vector<MetricRow>& rows) {
    std::map<std::string, std::map<std::string, std::vector<MetricRow>>> grouped;
    for (const auto& r : rows) grouped[r.variant][r.split].push_back(r);
    std::map<std::string, std::map<std::string, VariantSummary>> out;
    for (const auto& [variant, splits] : grouped) {
        for (const auto& [split, group] : splits) {
            VariantSummary s;
            std::vector<double> acc, tpr, tnr;
            for (const auto& r : group) {
                accumulate(acc, r.metrics.acc);
                accumulate(tpr, r.metrics.tpr);
                accumulate(tnr, r.metrics.tnr);
            }
            std::tie(s.acc_mean, s.acc_std) = mean_std(acc);
            std::tie(s.tpr_mean, s.tpr_std) = mean_std(tpr);
            std::tie(s.tnr_mean, s.tnr_std) = mean_std(tnr);
            s.folds = group.size();
            out[variant][split] = s;
        }
    }
    return out;
}

std::string summary_csv(const std::map<std::string, std::map<std::string, VariantSummary>>& s) {
    std::ostringstream out;
    out << "variant,split,folds,acc_mean,acc_std,tpr_mean,tpr_std,tnr_mean,tnr_std\n";
    for (const auto& [variant, splits] : s)
        for (const auto& [split, v] : splits)
            out << variant << "," << split << "," << v.folds << ","
                << io::format_double(v.acc_mean) << "," << io::format_double(v.acc_std) << ","
                << io::format_double(v.tpr_mean) << "," << io::format_double(v.tpr_std) << ","
                << io::format_double(v.tnr_mean) << "," << io::format_double(v.tnr_std) << "\n";
    return out.str();
}

}  // namespace mmfuse::harness

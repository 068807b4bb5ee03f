// mmfuse: multimodal fusion pipeline driver.
//
// Stages write their artifacts under --out with stable names so any stage
// can be rerun in isolation:
//   gen-data        data/<modality>.csv (+ data/external_<modality>.csv)
//   train-unimodal  splits/*.json, prep/*.json, models/*.net,
//                   predictions/val_<fold>.csv, labels.csv
//   optimize        selection/candidates.csv, selection/summary.json
//   fuse            models/fusion/<variant>_<fold>.fus
//   evaluate        metrics/metrics.csv
//   explain         xai/weights.json, xai/attributions.csv
//   report          reports/summary.csv

#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <set>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "mmfuse/harness.hpp"
#include "mmfuse/io.hpp"
#include "mmfuse/kernels.hpp"
#include "mmfuse/xai.hpp"

namespace fs = std::filesystem;
using namespace mmfuse;
using nlohmann::json;

namespace {

struct Options {
    std::string config_path;
    std::string data_dir;
    std::string out_dir;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 0;
};

harness::ExperimentConfig load_cfg(const Options& opt) {
    harness::ExperimentConfig cfg = opt.config_path.empty()
                                        ? harness::default_config()
                                        : harness::load_config(opt.config_path);
    for (const auto& o : opt.overrides) harness::apply_override(cfg, o);
    if (opt.seed_set) harness::apply_override(cfg, "seed=" + std::to_string(opt.seed));
    return cfg;
}

std::string out_root(const Options& opt) {
    if (!opt.out_dir.empty()) return opt.out_dir;
    if (const char* env = std::getenv("MMFUSE_OUT")) return env;
    return ".";
}

std::string data_root(const Options& opt) {
    return opt.data_dir.empty() ? out_root(opt) + "/data" : opt.data_dir;
}

void ensure_dir(const std::string& path) { fs::create_directories(path); }

std::vector<tabular::TabularDataset> load_datasets(const harness::ExperimentConfig& cfg,
                                                   const std::string& dir,
                                                   const std::string& prefix = "") {
    std::vector<tabular::TabularDataset> out;
    for (const auto& m : cfg.generator.modalities)
        out.push_back(tabular::load_csv(dir + "/" + prefix + m.name + ".csv", m.name));
    return out;
}

struct FoldPlans {
    harness::SplitPlan cv;
    harness::SplitPlan loco;  // empty folds when loco disabled
};

FoldPlans build_plans(const harness::ExperimentConfig& cfg,
                      const std::vector<tabular::TabularDataset>& datasets) {
    FoldPlans plans;
    plans.cv = harness::make_cv_splits(datasets.front().labels, cfg.cv_folds, cfg.seed);
    if (cfg.run_loco)
        plans.loco =
            harness::make_loco_splits(datasets.front().centers, 2.0 / 9.0, cfg.seed + 17);
    return plans;
}

std::vector<std::pair<std::string, harness::Fold>> all_folds(const FoldPlans& plans) {
    std::vector<std::pair<std::string, harness::Fold>> out;
    for (const auto& f : plans.cv.folds) out.emplace_back("cv", f);
    for (const auto& f : plans.loco.folds) out.emplace_back("loco", f);
    return out;
}

std::string net_path(const std::string& root, const std::string& fold,
                     const std::string& modality, const std::string& model) {
    return root + "/models/" + fold + "_" + modality + "_" + model + ".net";
}

std::string fusion_path(const std::string& root, const std::string& variant,
                        const std::string& fold) {
    return root + "/models/fusion/" + variant + "_" + fold + ".fus";
}

// ---- gen-data ----

int cmd_gen_data(const Options& opt) {
    harness::ExperimentConfig cfg = load_cfg(opt);
    const std::string dir = out_root(opt) + "/data";
    ensure_dir(dir);
    for (const auto& ds : harness::generate(cfg.generator))
        tabular::save_csv(ds, dir + "/" + ds.modality + ".csv");
    if (cfg.run_ev && cfg.external.n_samples > 0) {
        harness::SynthConfig ext = cfg.external;
        ext.modalities = cfg.generator.modalities;
        for (const auto& ds : harness::generate(ext))
            tabular::save_csv(ds, dir + "/external_" + ds.modality + ".csv");
    }
    std::printf("wrote %zu modality table(s) under %s\n", cfg.generator.modalities.size(),
                dir.c_str());
    return 0;
}

// ---- train-unimodal ----

int cmd_train_unimodal(const Options& opt) {
    harness::ExperimentConfig cfg = load_cfg(opt);
    const std::string root = out_root(opt);
    auto datasets = load_datasets(cfg, data_root(opt));
    FoldPlans plans = build_plans(cfg, datasets);
    ensure_dir(root + "/splits");
    ensure_dir(root + "/prep");
    ensure_dir(root + "/models");
    ensure_dir(root + "/predictions");
    io::write_file_atomic(root + "/splits/cv.json", harness::split_plan_json(plans.cv));
    if (cfg.run_loco)
        io::write_file_atomic(root + "/splits/loco.json", harness::split_plan_json(plans.loco));

    {
        std::ostringstream labels;
        labels << "id,label,center\n";
        for (std::size_t i = 0; i < datasets.front().size(); ++i)
            labels << datasets.front().ids[i] << "," << datasets.front().labels[i] << ","
                   << datasets.front().centers[i] << "\n";
        io::write_file_atomic(root + "/labels.csv", labels.str());
    }

    for (const auto& [split, fold] : all_folds(plans)) {
        (void)split;
        harness::FoldState state = harness::run_fold(cfg, datasets, fold, fold.id);
        std::vector<tabular::PredictionMatrix> mats;
        for (const auto& [cell, pm] : state.val_data.predictions) mats.push_back(pm);
        io::write_file_atomic(root + "/predictions/val_" + fold.id + ".csv",
                              tabular::prediction_csv(mats));
        for (const auto& [cell, net] : state.cell_nets) {
            const std::string stem = root + "/models/" + fold.id + "_" +
                                     state.processed[cell.first].modality + "_" +
                                     cfg.models[cell.second].name;
            nn::save_network(net, stem + ".net");
            io::write_file_atomic(stem + ".log.csv",
                                  harness::training_log_csv(state.cell_logs.at(cell)));
        }
        for (std::size_t q = 0; q < state.processed.size(); ++q)
            io::write_file_atomic(
                root + "/prep/" + fold.id + "_" + state.processed[q].modality + ".json",
                tabular::impute_stats_to_json(state.impute_stats[q], state.scale_stats[q]));
        std::printf("fold %s: trained %zu cell(s)\n", fold.id.c_str(),
                    state.cell_nets.size());
    }
    return 0;
}

// ---- optimize ----

int cmd_optimize(const Options& opt, const std::vector<std::string>& prediction_files,
                 const std::string& labels_path, std::size_t max_size) {
    harness::ExperimentConfig cfg = load_cfg(opt);
    const std::string root = out_root(opt);

    std::vector<std::string> files = prediction_files;
    if (files.empty()) {
        // selection runs on the CV plan only; loco folds reuse its gamma*
        const std::string dir = root + "/predictions";
        if (!fs::is_directory(dir))
            throw io::FileError("no prediction files given and " + dir + " does not exist");
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.path().extension() == ".csv" &&
                entry.path().filename().string().rfind("val_cv", 0) == 0)
                files.push_back(entry.path().string());
        std::sort(files.begin(), files.end());
    }
    if (files.empty()) throw io::FileError("optimize: no prediction files found");

    std::vector<tabular::PredictionMatrix> mats;
    for (const auto& f : files)
        for (auto& pm : tabular::parse_prediction_csv(io::read_file(f)))
            mats.push_back(std::move(pm));

    const std::string lpath = labels_path.empty() ? root + "/labels.csv" : labels_path;
    std::map<std::string, int> label_of;
    {
        std::istringstream in(io::read_file(lpath));
        std::string line;
        if (!std::getline(in, line) || line.rfind("id,label", 0) != 0)
            throw std::invalid_argument(lpath + ": expected header id,label[,center]");
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto f = io::split(line, ',');
            label_of[f[0]] = std::stoi(f[1]);
        }
    }

    // theta discovered from the prediction files themselves, so externally
    // produced matrices work without the bundled trainer
    std::set<std::string> modality_names, model_names;
    for (const auto& pm : mats) {
        modality_names.insert(pm.modality_id);
        model_names.insert(pm.model_id);
    }
    selection::ApplicationMatrix theta;
    theta.modalities.assign(modality_names.begin(), modality_names.end());
    theta.models.assign(model_names.begin(), model_names.end());
    theta.cells.assign(theta.modalities.size() * theta.models.size(), 0);
    auto modality_index = [&](const std::string& name) {
        return static_cast<std::size_t>(
            std::find(theta.modalities.begin(), theta.modalities.end(), name) -
            theta.modalities.begin());
    };
    auto model_index = [&](const std::string& name) {
        return static_cast<std::size_t>(
            std::find(theta.models.begin(), theta.models.end(), name) - theta.models.begin());
    };

    std::map<std::string, selection::FoldData> folds;
    for (auto& pm : mats) {
        const std::size_t mi = modality_index(pm.modality_id);
        const std::size_t ji = model_index(pm.model_id);
        theta.cells[mi * theta.models.size() + ji] = 1;
        selection::FoldData& fold = folds[pm.fold_id];
        fold.fold_id = pm.fold_id;
        if (fold.labels.empty()) {
            for (const auto& id : pm.instance_ids) {
                auto it = label_of.find(id);
                if (it == label_of.end())
                    throw std::invalid_argument("optimize: no label for instance " + id);
                fold.labels.push_back(it->second);
            }
        }
        fold.predictions[{mi, ji}] = std::move(pm);
    }
    std::vector<selection::FoldData> fold_list;
    for (auto& [id, fold] : folds) fold_list.push_back(std::move(fold));

    selection::SelectionResult result =
        selection::run_selection(theta, fold_list, max_size ? max_size : cfg.candidate_cap);
    ensure_dir(root + "/selection");
    io::write_file_atomic(root + "/selection/candidates.csv",
                          selection::selection_csv(theta, result));
    io::write_file_atomic(root + "/selection/summary.json",
                          selection::selection_summary_json(theta, result));
    const auto& star = result.scored[result.gamma_star];
    std::printf("gamma*: %s (eval %.4f, div %.4f, objective %.4f) from %zu candidates\n",
                star.candidate.label(theta).c_str(), star.eval_score, star.div_score,
                selection::ideal_distance_objective(star), result.scored.size());
    return 0;
}

// ---- shared fusion plumbing ----

struct GammaStar {
    fusion::FusionSpec spec;
    std::vector<std::pair<std::string, std::string>> members;  // (modality, model)
};

GammaStar load_gamma_star(const harness::ExperimentConfig& cfg, const std::string& root) {
    json j = json::parse(io::read_file(root + "/selection/summary.json"));
    GammaStar gs;
    gs.spec.n_classes = 2;
    gs.spec.k_soft = cfg.k_soft;
    gs.spec.k_st = cfg.k_st;
    gs.spec.encoding_layer = cfg.encoding_layer;
    for (const auto& jm : j.at("gamma_star").at("members")) {
        const std::string id = jm.get<std::string>();
        const auto colon = id.find(':');
        if (colon == std::string::npos)
            throw std::invalid_argument("selection summary: bad member id " + id);
        const std::string modality = id.substr(0, colon);
        const std::string model = id.substr(colon + 1);
        if (!cfg.ablate_modality.empty() && modality == cfg.ablate_modality) continue;
        std::size_t q = 0;
        while (q < cfg.generator.modalities.size() &&
               cfg.generator.modalities[q].name != modality)
            ++q;
        if (q == cfg.generator.modalities.size())
            throw std::invalid_argument("selection summary names unknown modality " + modality);
        gs.spec.member_modality.push_back(modality);
        gs.spec.member_model.push_back(model);
        gs.spec.member_input.push_back(q);
        gs.members.emplace_back(modality, model);
    }
    if (gs.members.empty()) throw std::invalid_argument("gamma* is empty after ablation");
    return gs;
}

fusion::MultimodalSet rows_of(const std::vector<tabular::TabularDataset>& processed,
                              const std::vector<std::size_t>& rows) {
    fusion::MultimodalSet set;
    for (const auto& ds : processed)
        set.modality_features.push_back(submatrix_rows(ds.features, rows));
    for (std::size_t r : rows) set.labels.push_back(processed.front().labels[r]);
    return set;
}

std::vector<tabular::TabularDataset> preprocess_for_fold(
    const harness::ExperimentConfig& cfg, const std::vector<tabular::TabularDataset>& datasets,
    const harness::Fold& fold) {
    // deterministic refit on the fold's training rows; equals the stats the
    // trainer wrote under prep/
    std::vector<tabular::TabularDataset> out;
    for (const auto& ds : datasets) {
        std::vector<tabular::ColumnKind> kinds(ds.dim(), tabular::ColumnKind::continuous);
        auto it = cfg.column_kinds.find(ds.modality);
        if (it != cfg.column_kinds.end())
            for (std::size_t j = 0; j < ds.dim(); ++j) {
                auto jt = it->second.find(ds.feature_names[j]);
                if (jt != it->second.end() && jt->second == "categorical")
                    kinds[j] = tabular::ColumnKind::categorical;
            }
        auto im = tabular::fit_impute(ds, kinds, fold.train);
        auto filled = tabular::impute(ds, im);
        auto sc = tabular::fit_minmax(filled, fold.train);
        out.push_back(tabular::minmax_scale(filled, sc));
    }
    return out;
}

// ---- fuse ----

int cmd_fuse(const Options& opt, const std::string& only_variant) {
    harness::ExperimentConfig cfg = load_cfg(opt);
    const std::string root = out_root(opt);
    auto datasets = load_datasets(cfg, data_root(opt));
    FoldPlans plans = build_plans(cfg, datasets);
    GammaStar gs = load_gamma_star(cfg, root);
    ensure_dir(root + "/models/fusion");

    std::vector<std::string> variants = cfg.variants;
    if (!only_variant.empty()) {
        if (!fusion::is_known_variant(only_variant))
            throw std::invalid_argument("unknown fusion variant: " + only_variant);
        variants = {only_variant};
    }

    for (const auto& [split, fold] : all_folds(plans)) {
        (void)split;
        auto processed = preprocess_for_fold(cfg, datasets, fold);
        std::vector<nn::DenseNetwork> members;
        for (const auto& [modality, model] : gs.members)
            members.push_back(nn::load_network(net_path(root, fold.id, modality, model)));
        fusion::MultimodalSet train_set = rows_of(processed, fold.train);
        fusion::MultimodalSet val_set = rows_of(processed, fold.val);
        for (std::size_t v = 0; v < variants.size(); ++v) {
            Rng rng(cfg.seed ^ (0xabcd1234ULL + v * 7919ULL +
                                std::hash<std::string>{}(fold.id)));
            fusion::FusionModel model = fusion::make_variant(variants[v], gs.spec, members, rng);
            if (model.spec.kind != fusion::FusionKind::majority) {
                nn::TrainConfig tc = cfg.fusion_training;
                tc.seed = cfg.seed ^ (0x5555ULL + v * 131ULL + std::hash<std::string>{}(fold.id));
                fusion::JointTrainOptions opts;
                opts.update_members = !model.frozen_members;
                model = fusion::train_fusion(model, train_set, val_set, tc, opts).model;
            }
            fusion::save_fusion(model, fusion_path(root, variants[v], fold.id));
        }
        std::printf("fold %s: trained %zu fusion variant(s)\n", fold.id.c_str(),
                    variants.size());
    }
    return 0;
}

// ---- evaluate ----

int cmd_evaluate(const Options& opt) {
    harness::ExperimentConfig cfg = load_cfg(opt);
    const std::string root = out_root(opt);
    auto datasets = load_datasets(cfg, data_root(opt));
    FoldPlans plans = build_plans(cfg, datasets);
    GammaStar gs = load_gamma_star(cfg, root);

    std::vector<tabular::TabularDataset> external;
    if (cfg.run_ev)
        external = load_datasets(cfg, data_root(opt), "external_");

    std::vector<harness::MetricRow> rows;
    auto evaluate_fold = [&](const std::string& split, const harness::Fold& fold,
                             const std::vector<tabular::TabularDataset>& eval_sets,
                             const std::vector<std::size_t>& eval_rows) {
        for (std::size_t q = 0; q < eval_sets.size(); ++q)
            for (const auto& mc : cfg.models) {
                const std::string path =
                    net_path(root, fold.id, eval_sets[q].modality, mc.name);
                if (!io::file_exists(path)) continue;  // inactive theta cell
                nn::DenseNetwork net = nn::load_network(path);
                std::vector<int> predicted, truth;
                for (std::size_t r : eval_rows) {
                    predicted.push_back(static_cast<int>(
                        argmax(nn::forward(net, eval_sets[q].features.row(r)))));
                    truth.push_back(eval_sets[q].labels[r]);
                }
                rows.push_back({"uni:" + eval_sets[q].modality + ":" + mc.name, split, fold.id,
                                fusion::classification_metrics(predicted, truth)});
            }
        for (const auto& variant : cfg.variants) {
            const std::string path = fusion_path(root, variant, fold.id);
            if (!io::file_exists(path)) continue;
            fusion::FusionModel model = fusion::load_fusion(path);
            rows.push_back({variant, split, fold.id,
                            fusion::evaluate_fusion(model, rows_of(eval_sets, eval_rows))});
        }
    };

    for (const auto& [split, fold] : all_folds(plans)) {
        auto processed = preprocess_for_fold(cfg, datasets, fold);
        evaluate_fold(split, fold, processed, fold.test);
    }
    if (cfg.run_ev && !external.empty()) {
        std::vector<std::size_t> ext_rows(external.front().size());
        std::iota(ext_rows.begin(), ext_rows.end(), 0);
        for (const auto& fold : plans.cv.folds) {
            std::vector<tabular::TabularDataset> processed_ext;
            for (std::size_t q = 0; q < external.size(); ++q) {
                std::vector<tabular::ColumnKind> kinds(external[q].dim(),
                                                       tabular::ColumnKind::continuous);
                auto im = tabular::fit_impute(datasets[q], kinds, fold.train);
                auto filled_train = tabular::impute(datasets[q], im);
                auto sc = tabular::fit_minmax(filled_train, fold.train);
                processed_ext.push_back(
                    tabular::minmax_scale(tabular::impute(external[q], im), sc));
            }
            evaluate_fold("ev", fold, processed_ext, ext_rows);
        }
    }
    ensure_dir(root + "/metrics");
    io::write_file_atomic(root + "/metrics/metrics.csv", harness::metrics_csv(rows));
    std::printf("wrote %zu metric row(s)\n", rows.size());
    return 0;
}

// ---- explain ----

int cmd_explain(const Options& opt, const std::string& variant, const std::string& fold_id,
                std::size_t count, std::size_t steps) {
    harness::ExperimentConfig cfg = load_cfg(opt);
    const std::string root = out_root(opt);
    auto datasets = load_datasets(cfg, data_root(opt));
    FoldPlans plans = build_plans(cfg, datasets);
    const harness::Fold* fold = nullptr;
    for (const auto& f : plans.cv.folds)
        if (f.id == fold_id) fold = &f;
    if (!fold) throw std::invalid_argument("explain: unknown cv fold " + fold_id);

    fusion::FusionModel model = fusion::load_fusion(fusion_path(root, variant, fold_id));
    xai::ModelWeightReport weights = xai::model_weights(model);
    ensure_dir(root + "/xai");
    io::write_file_atomic(root + "/xai/weights.json", xai::weight_report_json(weights));

    auto processed = preprocess_for_fold(cfg, datasets, *fold);
    const std::size_t n = std::min<std::size_t>(count, fold->test.size());
    std::vector<std::string> instance_ids;
    std::vector<std::vector<xai::AttributionRecord>> per_instance;
    std::vector<Vec> combined;
    std::string combined_modality;

    // the modality with the most members gets the weighted combination
    std::map<std::string, std::size_t> member_count;
    for (const auto& m : model.spec.member_modality) ++member_count[m];
    combined_modality = member_count.begin()->first;
    for (const auto& [name, c] : member_count)
        if (c > member_count[combined_modality]) combined_modality = name;

    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t row = fold->test[i];
        instance_ids.push_back(datasets.front().ids[row]);
        std::vector<xai::AttributionRecord> recs;
        std::vector<xai::AttributionRecord> combine_recs;
        Vec combine_weights;
        for (std::size_t m = 0; m < model.spec.member_count(); ++m) {
            const std::size_t q = model.spec.member_input[m];
            Vec x = processed[q].features.row(row);
            Vec baseline(x.size(), 0.0);  // scaled-space zero = per-feature training minimum
            Vec logits = nn::forward(model.member_nets[m], x);
            xai::AttributionRecord rec;
            rec.model_id = model.spec.member_id(m);
            rec.baseline = baseline;
            rec.ig_steps = steps;
            rec.feature_importances = xai::integrated_gradients(
                model.member_nets[m], x, baseline, argmax(logits), steps);
            if (model.spec.member_modality[m] == combined_modality) {
                combine_recs.push_back(rec);
                combine_weights.push_back(weights.per_model_weight[m]);
            }
            recs.push_back(std::move(rec));
        }
        combined.push_back(xai::weighted_xai(combine_recs, combine_weights));
        per_instance.push_back(std::move(recs));
    }
    io::write_file_atomic(
        root + "/xai/attributions.csv",
        xai::attribution_csv(instance_ids, per_instance, combined, combined_modality));
    std::printf("explained %zu instance(s); combined modality: %s\n", n,
                combined_modality.c_str());
    return 0;
}

// ---- report ----

int cmd_report(const Options& opt) {
    const std::string root = out_root(opt);
    auto rows = harness::parse_metrics_csv(io::read_file(root + "/metrics/metrics.csv"));
    ensure_dir(root + "/reports");
    io::write_file_atomic(root + "/reports/summary.csv",
                          harness::summary_csv(harness::summarize(rows)));
    std::printf("summarized %zu row(s)\n", rows.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mmfuse: Pareto-optimized multimodal fusion pipeline"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);  // usage text on bad flags

    Options opt;
    app.add_option("--config", opt.config_path, "experiment config (json)");
    app.add_option("--data", opt.data_dir, "input data directory (default <out>/data)");
    app.add_option("--out", opt.out_dir, "output root (default $MMFUSE_OUT or .)");
    app.add_option("--set", opt.overrides, "config override key.path=value (repeatable)");
    app.add_option("--seed", opt.seed, "master seed override")->each([&](const std::string&) {
        opt.seed_set = true;
    });
    app.add_option("--jobs", opt.jobs, "worker threads (0 = all cores)");

    auto* gen = app.add_subcommand("gen-data", "generate synthetic multimodal tables");
    auto* train = app.add_subcommand("train-unimodal", "train every application-matrix cell");
    auto* optimize =
        app.add_subcommand("optimize", "score candidate sets and select gamma*");
    std::vector<std::string> prediction_files;
    std::string labels_path;
    std::size_t max_size = 0;
    optimize->add_option("--predictions", prediction_files,
                         "prediction csv files (default <out>/predictions/val_*.csv)");
    optimize->add_option("--labels", labels_path, "labels csv (default <out>/labels.csv)");
    optimize->add_option("--max-size", max_size, "cap candidate size (0 = uncapped)");
    auto* fuse = app.add_subcommand("fuse", "train fusion variants from gamma*");
    std::string only_variant;
    fuse->add_option("--mode", only_variant, "train a single variant (default: all configured)");
    auto* evaluate = app.add_subcommand("evaluate", "metrics on every fold's test split");
    auto* explain = app.add_subcommand("explain", "head weights and integrated gradients");
    std::string xai_variant = "jlf-c-1";
    std::string xai_fold = "cv0";
    std::size_t xai_count = 5;
    std::size_t xai_steps = 64;
    explain->add_option("--variant", xai_variant, "fusion variant to explain");
    explain->add_option("--fold", xai_fold, "cv fold whose model is explained");
    explain->add_option("--count", xai_count, "number of test instances");
    explain->add_option("--steps", xai_steps, "integrated-gradients steps");
    auto* report = app.add_subcommand("report", "aggregate metrics into mean +- std");

    CLI11_PARSE(app, argc, argv);

    kernels::set_threads(opt.jobs > 0 ? opt.jobs
                                      : static_cast<int>(std::thread::hardware_concurrency()));
    try {
        if (gen->parsed()) return cmd_gen_data(opt);
        if (train->parsed()) return cmd_train_unimodal(opt);
        if (optimize->parsed()) return cmd_optimize(opt, prediction_files, labels_path, max_size);
        if (fuse->parsed()) return cmd_fuse(opt, only_variant);
        if (evaluate->parsed()) return cmd_evaluate(opt);
        if (explain->parsed())
            return cmd_explain(opt, xai_variant, xai_fold, xai_count, xai_steps);
        if (report->parsed()) return cmd_report(opt);
    } catch (const io::FileError& e) {
        std::fprintf(stderr, "mmfuse: missing input: %s\n", e.what());
        return 4;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "mmfuse: bad configuration: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "mmfuse: %s\n", e.what());
        return 1;
    }
    return 0;
}

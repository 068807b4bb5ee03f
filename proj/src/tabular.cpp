#include "mmfuse/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "mmfuse/io.hpp"

namespace mmfuse::tabular {

std::size_t TabularDataset::n_classes() const {
    int top = -1;
    for (int l : labels) top = std::max(top, l);
    return static_cast<std::size_t>(top + 1);
}

void TabularDataset::validate() const {
    const std::size_t n = size();
    if (ids.size() != n || labels.size() != n || centers.size() != n)
        throw std::invalid_argument("dataset " + modality + ": column lengths disagree");
    if (feature_names.size() != dim())
        throw std::invalid_argument("dataset " + modality + ": feature name count mismatch");
    if (!missing_mask.same_shape(features))
        throw std::invalid_argument("dataset " + modality + ": mask shape mismatch");
    for (int l : labels)
        if (l < 0) throw std::invalid_argument("dataset " + modality + ": negative label");
    for (const auto& c : centers)
        if (c.empty()) throw std::invalid_argument("dataset " + modality + ": empty center id");
}

TabularDataset load_csv(const std::string& path, const std::string& modality) {
    std::istringstream in(io::read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty dataset file: " + path);
    auto header = io::split(line, ',');
    int id_col = -1, center_col = -1, label_col = -1;
    std::vector<std::size_t> feature_cols;
    TabularDataset ds;
    ds.modality = modality;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "id")
            id_col = static_cast<int>(i);
        else if (header[i] == "center")
            center_col = static_cast<int>(i);
        else if (header[i] == "label")
            label_col = static_cast<int>(i);
        else {
            feature_cols.push_back(i);
            ds.feature_names.push_back(header[i]);
        }
    }
    if (id_col < 0 || center_col < 0 || label_col < 0)
        throw std::runtime_error(path + ": header must contain id, center and label columns");

    std::vector<Vec> rows;
    std::vector<Vec> mask_rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = io::split(line, ',');
        if (fields.size() != header.size())
            throw std::runtime_error(path + ": row with " + std::to_string(fields.size()) +
                                     " fields, expected " + std::to_string(header.size()));
        ds.ids.push_back(fields[static_cast<std::size_t>(id_col)]);
        ds.centers.push_back(fields[static_cast<std::size_t>(center_col)]);
        const std::string& lab = fields[static_cast<std::size_t>(label_col)];
        try {
            ds.labels.push_back(std::stoi(lab));
        } catch (const std::exception&) {
            throw std::runtime_error(path + ": bad label '" + lab + "'");
        }
        Vec row(feature_cols.size(), 0.0), mask(feature_cols.size(), 0.0);
        for (std::size_t j = 0; j < feature_cols.size(); ++j) {
            const std::string& cell = fields[feature_cols[j]];
            if (cell.empty()) {
                mask[j] = 1.0;
            } else {
                try {
                    row[j] = std::stod(cell);
                } catch (const std::exception&) {
                    throw std::runtime_error(path + ": bad numeric cell '" + cell + "'");
                }
            }
        }
        rows.push_back(std::move(row));
        mask_rows.push_back(std::move(mask));
    }
    ds.features = Matrix(rows.size(), feature_cols.size());
    ds.missing_mask = Matrix(rows.size(), feature_cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ds.features.set_row(i, rows[i]);
        ds.missing_mask.set_row(i, mask_rows[i]);
    }
    ds.validate();
    return ds;
}

void save_csv(const TabularDataset& ds, const std::string& path) {
    ds.validate();
    std::ostringstream out;
    out << "id,center,label";
    for (const auto& f : ds.feature_names) out << "," << f;
    out << "\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out << ds.ids[i] << "," << ds.centers[i] << "," << ds.labels[i];
        for (std::size_t j = 0; j < ds.dim(); ++j) {
            out << ",";
            if (ds.missing_mask(i, j) == 0.0) out << io::format_double(ds.features(i, j));
        }
        out << "\n";
    }
    io::write_file_atomic(path, out.str());
}

// ---- Preprocessing ----

ImputeStats fit_impute(const TabularDataset& ds, const std::vector<ColumnKind>& kinds,
                       const std::vector<std::size_t>& train_rows) {
    if (kinds.size() != ds.dim())
        throw std::invalid_argument("fit_impute: column kind count != feature count");
    if (train_rows.empty()) throw std::invalid_argument("fit_impute: no training rows");
    ImputeStats stats;
    stats.kinds = kinds;
    stats.fill_values.assign(ds.dim(), 0.0);
    for (std::size_t j = 0; j < ds.dim(); ++j) {
        if (kinds[j] == ColumnKind::continuous) {
            double sum = 0.0;
            std::size_t n = 0;
            for (std::size_t r : train_rows) {
                if (ds.missing_mask(r, j) == 0.0) {
                    sum += ds.features(r, j);
                    ++n;
                }
            }
            if (n == 0)
                throw std::runtime_error("impute: column '" + ds.feature_names[j] +
                                         "' entirely missing in the training split");
            stats.fill_values[j] = sum / static_cast<double>(n);
        } else {
            // mode over observed training values; ties take the lower value
            std::map<double, std::size_t> counts;
            for (std::size_t r : train_rows)
                if (ds.missing_mask(r, j) == 0.0) ++counts[ds.features(r, j)];
            if (counts.empty())
                throw std::runtime_error("impute: column '" + ds.feature_names[j] +
                                         "' entirely missing in the training split");
            double best_value = counts.begin()->first;
            std::size_t best_count = counts.begin()->second;
            for (const auto& [value, count] : counts)
                if (count > best_count) {
                    best_value = value;
                    best_count = count;
                }
            stats.fill_values[j] = best_value;
        }
    }
    return stats;
}

TabularDataset impute(const TabularDataset& ds, const ImputeStats& stats) {
    if (stats.fill_values.size() != ds.dim())
        throw std::invalid_argument("impute: stats dimensionality mismatch");
    TabularDataset out = ds;
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t j = 0; j < ds.dim(); ++j)
            if (ds.missing_mask(i, j) != 0.0) out.features(i, j) = stats.fill_values[j];
    return out;
}

ScaleStats fit_minmax(const TabularDataset& ds, const std::vector<std::size_t>& train_rows) {
    if (train_rows.empty()) throw std::invalid_argument("fit_minmax: no training rows");
    ScaleStats stats;
    stats.col_min.assign(ds.dim(), 0.0);
    stats.col_max.assign(ds.dim(), 0.0);
    for (std::size_t j = 0; j < ds.dim(); ++j) {
        double lo = ds.features(train_rows[0], j);
        double hi = lo;
        for (std::size_t r : train_rows) {
            lo = std::min(lo, ds.features(r, j));
            hi = std::max(hi, ds.features(r, j));
        }
        stats.col_min[j] = lo;
        stats.col_max[j] = hi;
    }
    return stats;
}

TabularDataset minmax_scale(const TabularDataset& ds, const ScaleStats& stats) {
    if (stats.col_min.size() != ds.dim())
        throw std::invalid_argument("minmax_scale: stats dimensionality mismatch");
    TabularDataset out = ds;
    for (std::size_t j = 0; j < ds.dim(); ++j) {
        const double lo = stats.col_min[j];
        const double span = stats.col_max[j] - lo;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            double v = span == 0.0 ? 0.0 : (ds.features(i, j) - lo) / span;
            out.features(i, j) = std::clamp(v, 0.0, 1.0);
        }
    }
    return out;
}

std::string impute_stats_to_json(const ImputeStats& im, const ScaleStats& sc) {
    std::ostringstream out;
    out << "{\"fill\":[";
    for (std::size_t j = 0; j < im.fill_values.size(); ++j) {
        if (j) out << ",";
        out << io::format_double(im.fill_values[j]);
    }
    out << "],\"kinds\":[";
    for (std::size_t j = 0; j < im.kinds.size(); ++j) {
        if (j) out << ",";
        out << (im.kinds[j] == ColumnKind::continuous ? "\"continuous\"" : "\"categorical\"");
    }
    out << "],\"min\":[";
    for (std::size_t j = 0; j < sc.col_min.size(); ++j) {
        if (j) out << ",";
        out << io::format_double(sc.col_min[j]);
    }
    out << "],\"max\":[";
    for (std::size_t j = 0; j < sc.col_max.size(); ++j) {
        if (j) out << ",";
        out << io::format_double(sc.col_max[j]);
    }
    out << "]}";
    return out.str();
}

// ---- Model zoo ----

namespace {

const std::map<std::string, std::vector<std::size_t>>& preset_table() {
    static const std::map<std::string, std::vector<std::size_t>> table = {
        {"mlp-1", {64, 64, 32}},
        {"mlp-2", {64, 128, 128, 64, 32}},
        {"mlp-3", {64, 128, 256, 256, 128, 64, 32}},
        {"mlp-4", {64, 128, 256, 512, 512, 256, 128, 64, 32}},
    };
    return table;
}

}  // namespace

bool is_mlp_preset(const std::string& name) { return preset_table().count(name) > 0; }

MlpSpec mlp_preset(const std::string& name, std::size_t input_dim, std::size_t output_dim) {
    auto it = preset_table().find(name);
    if (it == preset_table().end()) throw std::invalid_argument("unknown MLP preset: " + name);
    MlpSpec spec;
    spec.name = name;
    spec.hidden_dims = it->second;
    spec.input_dim = input_dim;
    spec.output_dim = output_dim;
    return spec;
}

nn::DenseNetwork build_mlp(const MlpSpec& spec, Rng& rng) {
    if (spec.input_dim == 0) throw std::invalid_argument("build_mlp: input_dim unset");
    nn::DenseNetwork net = nn::make_network(spec.input_dim, spec.hidden_dims, spec.output_dim);
    nn::init_weights(net, rng);
    return net;
}

nn::LabeledSet subset(const TabularDataset& ds, const std::vector<std::size_t>& rows) {
    nn::LabeledSet set;
    set.features = submatrix_rows(ds.features, rows);
    set.labels.reserve(rows.size());
    for (std::size_t r : rows) set.labels.push_back(ds.labels[r]);
    return set;
}

nn::TrainResult train_unimodal(const MlpSpec& spec, const TabularDataset& ds,
                               const std::vector<std::size_t>& train_rows,
                               const std::vector<std::size_t>& val_rows,
                               const nn::TrainConfig& cfg, double k) {
    if (spec.input_dim != ds.dim())
        throw std::invalid_argument("train_unimodal: spec input dim " +
                                    std::to_string(spec.input_dim) + " != dataset dim " +
                                    std::to_string(ds.dim()));
    Rng rng(cfg.seed);
    nn::DenseNetwork net = build_mlp(spec, rng);
    return nn::train(net, subset(ds, train_rows), subset(ds, val_rows), cfg, k);
}

// ---- Prediction matrices ----

void PredictionMatrix::validate() const {
    if (instance_ids.size() != size() || crisp_labels.size() != size())
        throw std::invalid_argument("prediction matrix: column lengths disagree");
    for (std::size_t i = 0; i < size(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < scores.cols; ++j) sum += scores(i, j);
        if (std::abs(sum - 1.0) > 1e-6)
            throw std::invalid_argument("prediction matrix: row " + std::to_string(i) +
                                        " does not sum to 1");
        if (crisp_labels[i] != static_cast<int>(argmax(scores.row(i))))
            throw std::invalid_argument("prediction matrix: crisp label is not the row argmax");
    }
}

PredictionMatrix predict(const nn::DenseNetwork& net, const TabularDataset& ds,
                         const std::vector<std::size_t>& rows, double k,
                         const std::string& model_id, const std::string& fold_id) {
    net.validate_classifier();
    if (net.input_dim() != ds.dim())
        throw std::invalid_argument("predict: network input dim != dataset dim");
    PredictionMatrix pm;
    pm.model_id = model_id;
    pm.modality_id = ds.modality;
    pm.fold_id = fold_id;
    pm.scores = Matrix(rows.size(), net.output_dim());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        pm.instance_ids.push_back(ds.ids[rows[i]]);
        Vec y = nn::softmax_k(nn::forward(net, ds.features.row(rows[i])), k);
        pm.scores.set_row(i, y);
        pm.crisp_labels.push_back(static_cast<int>(argmax(y)));
    }
    return pm;
}

std::string prediction_csv(const std::vector<PredictionMatrix>& mats) {
    if (mats.empty()) throw std::invalid_argument("prediction_csv: nothing to write");
    const std::size_t c = mats.front().scores.cols;
    std::ostringstream out;
    out << "id,fold,model,modality";
    for (std::size_t j = 0; j < c; ++j) out << ",score_" << j;
    out << ",crisp\n";
    for (const auto& pm : mats) {
        if (pm.scores.cols != c)
            throw std::invalid_argument("prediction_csv: inconsistent class counts");
        for (std::size_t i = 0; i < pm.size(); ++i) {
            out << pm.instance_ids[i] << "," << pm.fold_id << "," << pm.model_id << ","
                << pm.modality_id;
            for (std::size_t j = 0; j < c; ++j) out << "," << io::format_double(pm.scores(i, j));
            out << "," << pm.crisp_labels[i] << "\n";
        }
    }
    return out.str();
}

std::vector<PredictionMatrix> parse_prediction_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("prediction csv: empty document");
    auto header = io::split(line, ',');
    if (header.size() < 6 || header[0] != "id" || header[1] != "fold" || header[2] != "model" ||
        header[3] != "modality" || header.back() != "crisp")
        throw std::runtime_error("prediction csv: unexpected header");
    const std::size_t c = header.size() - 5;

    // group rows by (fold, modality, model), preserving first-seen order
    std::vector<PredictionMatrix> groups;
    std::map<std::string, std::size_t> index;
    std::vector<std::vector<Vec>> score_rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = io::split(line, ',');
        if (f.size() != header.size()) throw std::runtime_error("prediction csv: ragged row");
        std::string key = f[1] + "\x1f" + f[3] + "\x1f" + f[2];
        auto it = index.find(key);
        if (it == index.end()) {
            index.emplace(key, groups.size());
            PredictionMatrix pm;
            pm.fold_id = f[1];
            pm.model_id = f[2];
            pm.modality_id = f[3];
            groups.push_back(std::move(pm));
            score_rows.emplace_back();
            it = index.find(key);
        }
        PredictionMatrix& pm = groups[it->second];
        pm.instance_ids.push_back(f[0]);
        Vec row(c);
        for (std::size_t j = 0; j < c; ++j) row[j] = std::stod(f[4 + j]);
        score_rows[it->second].push_back(std::move(row));
        pm.crisp_labels.push_back(std::stoi(f.back()));
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
        groups[g].scores = Matrix(score_rows[g].size(), c);
        for (std::size_t i = 0; i < score_rows[g].size(); ++i)
            groups[g].scores.set_row(i, score_rows[g][i]);
        groups[g].validate();
    }
    return groups;
}

}  // namespace mmfuse::tabular

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <map>

#include "mmfuse/io.hpp"
#include "mmfuse/tabular.hpp"

using namespace mmfuse;
using namespace mmfuse::tabular;

namespace {

TabularDataset small_dataset(const std::vector<Vec>& rows, const std::vector<Vec>& mask = {}) {
    TabularDataset ds;
    ds.modality = "tab";
    const std::size_t d = rows.empty() ? 0 : rows[0].size();
    ds.features = Matrix(rows.size(), d);
    ds.missing_mask = Matrix(rows.size(), d);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ds.features.set_row(i, rows[i]);
        if (!mask.empty()) ds.missing_mask.set_row(i, mask[i]);
        ds.ids.push_back("r" + std::to_string(i));
        ds.centers.push_back("c0");
        ds.labels.push_back(static_cast<int>(i % 2));
    }
    for (std::size_t j = 0; j < d; ++j) ds.feature_names.push_back("f" + std::to_string(j));
    return ds;
}

std::vector<std::size_t> all_rows(const TabularDataset& ds) {
    std::vector<std::size_t> rows(ds.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return rows;
}

}  // namespace

TEST_CASE("impute: continuous mean fills the gap") {
    TabularDataset ds = small_dataset({{1.0}, {0.0}, {3.0}}, {{0.0}, {1.0}, {0.0}});
    auto stats = fit_impute(ds, {ColumnKind::continuous}, all_rows(ds));
    TabularDataset out = impute(ds, stats);
    CHECK(out.features(0, 0) == 1.0);
    CHECK(out.features(1, 0) == 2.0);
    CHECK(out.features(2, 0) == 3.0);
    CHECK(out.missing_mask(1, 0) == 1.0);  // audit mask preserved
}

TEST_CASE("impute: categorical mode fills the gap") {
    TabularDataset ds =
        small_dataset({{0.0}, {0.0}, {1.0}, {0.0}}, {{0.0}, {0.0}, {0.0}, {1.0}});
    auto stats = fit_impute(ds, {ColumnKind::categorical}, all_rows(ds));
    CHECK(stats.fill_values[0] == 0.0);
    CHECK(impute(ds, stats).features(3, 0) == 0.0);
}

TEST_CASE("impute: mode ties resolve to the lower value, per counting oracle") {
    TabularDataset ds =
        small_dataset({{0.0}, {1.0}, {0.0}, {1.0}, {0.0}},
                      {{0.0}, {0.0}, {0.0}, {0.0}, {1.0}});
    std::vector<std::size_t> train{0, 1, 2, 3};
    auto stats = fit_impute(ds, {ColumnKind::categorical}, train);
    // oracle: explicit counting over the training rows
    std::map<double, int> counts;
    for (std::size_t r : train) ++counts[ds.features(r, 0)];
    CHECK(counts[0.0] == counts[1.0]);
    CHECK(stats.fill_values[0] == 0.0);
}

TEST_CASE("impute: entirely missing training column is an error naming it") {
    TabularDataset ds = small_dataset({{0.0}, {0.0}}, {{1.0}, {1.0}});
    try {
        fit_impute(ds, {ColumnKind::continuous}, all_rows(ds));
        FAIL("expected an imputation error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("f0") != std::string::npos);
    }
}

TEST_CASE("minmax: basic scaling, constant columns, held-out clipping") {
    TabularDataset ds = small_dataset({{0.0, 7.0}, {5.0, 7.0}, {10.0, 7.0}, {12.0, 7.0}});
    std::vector<std::size_t> train{0, 1, 2};  // row 3 is held out
    auto stats = fit_minmax(ds, train);
    TabularDataset out = minmax_scale(ds, stats);
    CHECK(out.features(0, 0) == 0.0);
    CHECK(out.features(1, 0) == 0.5);
    CHECK(out.features(2, 0) == 1.0);
    CHECK(out.features(3, 0) == 1.0);  // 12 > train max 10, clipped
    for (std::size_t i = 0; i < 4; ++i) CHECK(out.features(i, 1) == 0.0);
}

TEST_CASE("preprocessing: statistics never touch held-out rows") {
    Rng rng(3);
    TabularDataset ds = small_dataset({});
    ds.features = Matrix(40, 3);
    ds.missing_mask = Matrix(40, 3);
    for (std::size_t i = 0; i < 40; ++i) {
        for (std::size_t j = 0; j < 3; ++j) ds.features(i, j) = rng.uniform(-5.0, 5.0);
        ds.missing_mask(i, 0) = (i % 7 == 0) ? 1.0 : 0.0;
        ds.ids.push_back("r" + std::to_string(i));
        ds.centers.push_back("c0");
        ds.labels.push_back(static_cast<int>(i % 2));
    }
    ds.feature_names = {"a", "b", "c"};
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < 28; ++i) train.push_back(i);

    std::vector<ColumnKind> kinds{ColumnKind::continuous, ColumnKind::continuous,
                                  ColumnKind::categorical};
    auto im0 = fit_impute(ds, kinds, train);
    auto sc0 = fit_minmax(impute(ds, im0), train);

    TabularDataset mutated = ds;
    for (std::size_t i = 28; i < 40; ++i)
        for (std::size_t j = 0; j < 3; ++j) mutated.features(i, j) = rng.uniform(50.0, 90.0);
    auto im1 = fit_impute(mutated, kinds, train);
    auto sc1 = fit_minmax(impute(mutated, im1), train);

    CHECK(im0.fill_values == im1.fill_values);
    CHECK(sc0.col_min == sc1.col_min);
    CHECK(sc0.col_max == sc1.col_max);
}

TEST_CASE("mlp presets match the reference layouts exactly") {
    using Dims = std::vector<std::size_t>;
    CHECK(mlp_preset("mlp-1", 34, 2).hidden_dims == Dims{64, 64, 32});
    CHECK(mlp_preset("mlp-2", 34, 2).hidden_dims == Dims{64, 128, 128, 64, 32});
    CHECK(mlp_preset("mlp-3", 34, 2).hidden_dims == Dims{64, 128, 256, 256, 128, 64, 32});
    CHECK(mlp_preset("mlp-4", 34, 2).hidden_dims ==
          Dims{64, 128, 256, 512, 512, 256, 128, 64, 32});
    CHECK_THROWS_AS(mlp_preset("mlp-9", 34, 2), std::invalid_argument);

    Rng rng(1);
    nn::DenseNetwork net = build_mlp(mlp_preset("mlp-1", 34, 2), rng);
    REQUIRE(net.layers.size() == 4);
    CHECK(net.input_dim() == 34);
    CHECK(net.layers[0].out_dim() == 64);
    CHECK(net.layers[1].out_dim() == 64);
    CHECK(net.layers[2].out_dim() == 32);
    CHECK(net.output_dim() == 2);
    for (std::size_t l = 0; l + 1 < net.layers.size(); ++l)
        CHECK(net.layers[l].activation == nn::Activation::relu);
    CHECK(net.layers.back().activation == nn::Activation::identity);
}

namespace {

TabularDataset informative_dataset(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    TabularDataset ds = small_dataset({});
    ds.features = Matrix(n, 4);
    ds.missing_mask = Matrix(n, 4);
    ds.feature_names = {"f0", "f1", "f2", "f3"};
    for (std::size_t i = 0; i < n; ++i) {
        int label = static_cast<int>(rng.below(2));
        ds.labels.push_back(label);
        ds.ids.push_back("r" + std::to_string(i));
        ds.centers.push_back("c0");
        ds.features(i, 0) = (label == 1 ? 1.2 : -1.2) + rng.gauss();
        for (std::size_t j = 1; j < 4; ++j) ds.features(i, j) = rng.gauss();
    }
    return ds;
}

}  // namespace

TEST_CASE("train_unimodal: beats the class prior on an informative modality") {
    TabularDataset ds = informative_dataset(400, 99);
    std::vector<std::size_t> train, val;
    for (std::size_t i = 0; i < 300; ++i) train.push_back(i);
    for (std::size_t i = 300; i < 400; ++i) val.push_back(i);

    // class-prior oracle on the validation rows
    std::size_t ones = 0;
    for (std::size_t r : val) ones += static_cast<std::size_t>(ds.labels[r]);
    double majority_rate =
        std::max(ones, val.size() - ones) / static_cast<double>(val.size());

    MlpSpec spec{"tiny", {8, 4}, 4, 2};
    nn::TrainConfig cfg;
    cfg.max_epochs = 60;
    cfg.seed = 11;
    auto result = train_unimodal(spec, ds, train, val, cfg, 1.0);
    double val_acc = nn::dataset_accuracy(result.net, subset(ds, val));
    CHECK(val_acc > majority_rate);

    auto rerun = train_unimodal(spec, ds, train, val, cfg, 1.0);
    CHECK(nn::serialize_network(result.net) == nn::serialize_network(rerun.net));
}

TEST_CASE("train_unimodal: rejects a spec whose input dim disagrees") {
    TabularDataset ds = informative_dataset(30, 5);
    MlpSpec spec{"tiny", {4}, 7, 2};
    nn::TrainConfig cfg;
    CHECK_THROWS_AS(train_unimodal(spec, ds, {0, 1, 2}, {3, 4}, cfg, 1.0),
                    std::invalid_argument);
}

TEST_CASE("predict: rows sum to one, large k approaches the crisp labels") {
    TabularDataset ds = informative_dataset(50, 17);
    Rng rng(2);
    nn::DenseNetwork net = build_mlp(MlpSpec{"tiny", {6}, 4, 2}, rng);
    auto pm = predict(net, ds, all_rows(ds), 1.0, "tiny", "f0");
    pm.validate();
    auto crisp = predict(net, ds, all_rows(ds), 1e4, "tiny", "f0");
    for (std::size_t i = 0; i < crisp.size(); ++i) {
        CHECK(crisp.crisp_labels[i] == pm.crisp_labels[i]);
        Vec z = nn::forward(net, ds.features.row(i));
        if (std::abs(z[0] - z[1]) >= 0.01)  // one-hot limit needs a logit gap
            CHECK(std::abs(crisp.scores(i, static_cast<std::size_t>(crisp.crisp_labels[i])) -
                           1.0) < 1e-6);
    }
}

TEST_CASE("predict: zero-weight network emits uniform scores") {
    TabularDataset ds = informative_dataset(10, 23);
    nn::DenseNetwork net = nn::make_network(4, {3}, 2);  // all-zero weights
    auto pm = predict(net, ds, all_rows(ds), 1.0, "zero", "f0");
    for (std::size_t i = 0; i < pm.size(); ++i) {
        CHECK(pm.scores(i, 0) == doctest::Approx(0.5));
        CHECK(pm.scores(i, 1) == doctest::Approx(0.5));
    }
}

TEST_CASE("csv: dataset round trip preserves values, mask and metadata") {
    TabularDataset ds = small_dataset({{1.5, 2.0}, {0.0, -3.25}}, {{0.0, 0.0}, {1.0, 0.0}});
    const std::string path = "/tmp/mmfuse_test_tab.csv";
    save_csv(ds, path);
    TabularDataset back = load_csv(path, "tab");
    CHECK(back.feature_names == ds.feature_names);
    CHECK(back.ids == ds.ids);
    CHECK(back.centers == ds.centers);
    CHECK(back.labels == ds.labels);
    CHECK(back.missing_mask.data == ds.missing_mask.data);
    CHECK(back.features(0, 0) == 1.5);
    CHECK(back.features(1, 1) == -3.25);
    std::remove(path.c_str());
}

TEST_CASE("csv: prediction matrices round trip through the delimited format") {
    TabularDataset ds = informative_dataset(20, 31);
    Rng rng(4);
    nn::DenseNetwork net = build_mlp(MlpSpec{"tiny", {5}, 4, 2}, rng);
    std::vector<PredictionMatrix> mats;
    mats.push_back(predict(net, ds, {0, 1, 2, 3, 4}, 1.0, "a", "f0"));
    mats.push_back(predict(net, ds, {5, 6, 7}, 1.0, "b", "f0"));
    std::string text = prediction_csv(mats);
    auto back = parse_prediction_csv(text);
    REQUIRE(back.size() == 2);
    CHECK(back[0].model_id == "a");
    CHECK(back[1].model_id == "b");
    CHECK(back[0].scores.data == mats[0].scores.data);
    CHECK(back[1].crisp_labels == mats[1].crisp_labels);
    CHECK(prediction_csv(back) == text);
}

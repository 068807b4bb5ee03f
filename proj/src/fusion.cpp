#include "mmfuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "mmfuse/io.hpp"
#include "mmfuse/kernels.hpp"
#include "mmfuse/selection.hpp"

namespace mmfuse::fusion {

void FusionSpec::validate() const {
    if (member_model.empty()) throw std::invalid_argument("fusion spec: no members");
    if (member_modality.size() != member_model.size() ||
        member_input.size() != member_model.size())
        throw std::invalid_argument("fusion spec: member arrays disagree");
    if (n_classes < 2) throw std::invalid_argument("fusion spec: needs >= 2 classes");
    if (k_soft <= 0.0 || k_st <= 0.0)
        throw std::invalid_argument("fusion spec: temperatures must be positive");
}

void MultimodalSet::validate() const {
    if (modality_features.empty()) throw std::invalid_argument("multimodal set: no modalities");
    for (const auto& m : modality_features)
        if (m.rows != labels.size())
            throw std::invalid_argument("multimodal set: modality rows != label count");
}

void FusionModel::validate() const {
    spec.validate();
    if (member_nets.size() != spec.member_count())
        throw std::invalid_argument("fusion model: member net count mismatch");
    for (const auto& net : member_nets) {
        if (spec.kind == FusionKind::jlf || spec.kind == FusionKind::majority) {
            net.validate_classifier();
            if (net.output_dim() != spec.n_classes)
                throw std::invalid_argument("fusion model: member class count mismatch");
        } else {
            net.validate_chain();
        }
    }
    if (spec.kind == FusionKind::majority) return;
    head_net.validate_classifier();
    if (head_net.output_dim() != spec.n_classes)
        throw std::invalid_argument("fusion model: head class count mismatch");
}

Vec shared_representation(const std::vector<Vec>& member_logits, const FusionSpec& spec) {
    if (member_logits.size() != spec.member_count())
        throw std::invalid_argument("shared_representation: member count mismatch with spec");
    Vec shared;
    shared.reserve(spec.shared_dim());
    for (const Vec& z : member_logits) {
        if (z.size() != spec.n_classes)
            throw std::invalid_argument("shared_representation: member logit length != classes");
        Vec y = spec.mode == Mode::soft ? nn::softmax_k(z, spec.k_soft) : nn::crispify(z);
        shared.insert(shared.end(), y.begin(), y.end());
    }
    return shared;
}

nn::DenseNetwork build_head(const FusionSpec& spec, Rng& rng) {
    spec.validate();
    const std::size_t in = spec.shared_dim();
    std::vector<std::size_t> hidden;
    if (spec.head == HeadKind::head2_hidden4) hidden.push_back(4);
    nn::DenseNetwork head = nn::make_network(in, hidden, spec.n_classes);
    nn::init_weights(head, rng);
    return head;
}

Vec jf_concat(const std::vector<Vec>& member_encodings, const nn::DenseNetwork& head) {
    Vec joined;
    for (const Vec& v : member_encodings) joined.insert(joined.end(), v.begin(), v.end());
    return nn::forward(head, joined);
}

Vec jf_kron(const std::vector<Vec>& member_encodings) {
    if (member_encodings.size() < 2)
        throw std::invalid_argument("jf_kron: outer-product fusion needs >= 2 encodings");
    Vec fused{1.0};
    for (const Vec& v : member_encodings) {
        Vec aug = v;
        aug.push_back(1.0);
        Vec next(fused.size() * aug.size());
        for (std::size_t i = 0; i < fused.size(); ++i)
            for (std::size_t j = 0; j < aug.size(); ++j)
                next[i * aug.size() + j] = fused[i] * aug[j];
        fused = std::move(next);
    }
    return fused;
}

namespace {

/// d fused -> d encodings for the left-fold Kronecker of [v_i; 1].
std::vector<Vec> jf_kron_backward(const std::vector<Vec>& enc, const Vec& d_fused) {
    const std::size_t m = enc.size();
    std::vector<Vec> aug(m);
    std::vector<std::size_t> lens(m);
    for (std::size_t i = 0; i < m; ++i) {
        aug[i] = enc[i];
        aug[i].push_back(1.0);
        lens[i] = aug[i].size();
    }
    std::vector<Vec> d_aug(m);
    for (std::size_t i = 0; i < m; ++i) d_aug[i].assign(lens[i], 0.0);

    std::vector<std::size_t> digit(m);
    for (std::size_t pos = 0; pos < d_fused.size(); ++pos) {
        std::size_t rem = pos;
        for (std::size_t i = m; i-- > 0;) {  // rightmost member varies fastest
            digit[i] = rem % lens[i];
            rem /= lens[i];
        }
        const double g = d_fused[pos];
        if (g == 0.0) continue;
        for (std::size_t i = 0; i < m; ++i) {
            double prod_others = 1.0;
            for (std::size_t l = 0; l < m; ++l)
                if (l != i) prod_others *= aug[l][digit[l]];
            d_aug[i][digit[i]] += g * prod_others;
        }
    }
    std::vector<Vec> d_enc(m);
    for (std::size_t i = 0; i < m; ++i)
        d_enc[i].assign(d_aug[i].begin(), d_aug[i].end() - 1);  // drop the constant slot
    return d_enc;
}

struct BatchCache {
    std::vector<Matrix> member_inputs;          // rows gathered per member
    std::vector<nn::ForwardCache> member_caches;
    Matrix joint;  // shared representation (jlf) or fused features (jf)
    nn::ForwardCache head_cache;
};

Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& rows) {
    Matrix out(rows.size(), src.cols);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < src.cols; ++j) out(i, j) = src(rows[i], j);
    return out;
}

void forward_joint(const FusionModel& model, const MultimodalSet& set,
                   const std::vector<std::size_t>& rows, BatchCache& cache) {
    const auto& spec = model.spec;
    const std::size_t M = spec.member_count();
    cache.member_inputs.resize(M);
    cache.member_caches.resize(M);
    for (std::size_t m = 0; m < M; ++m) {
        if (spec.member_input[m] >= set.modality_features.size())
            throw std::invalid_argument("fusion forward: member modality index out of range");
        cache.member_inputs[m] = gather_rows(set.modality_features[spec.member_input[m]], rows);
        nn::forward_batch(model.member_nets[m], cache.member_inputs[m], cache.member_caches[m]);
    }
    const std::size_t B = rows.size();
    if (spec.kind == FusionKind::jlf) {
        const std::size_t c = spec.n_classes;
        cache.joint = Matrix(B, spec.shared_dim());
        for (std::size_t m = 0; m < M; ++m) {
            const Matrix& logits = cache.member_caches[m].logits();
            for (std::size_t s = 0; s < B; ++s) {
                Vec y = spec.mode == Mode::soft ? nn::softmax_k(logits.row(s), spec.k_soft)
                                                : nn::crispify(logits.row(s));
                for (std::size_t j = 0; j < c; ++j) cache.joint(s, m * c + j) = y[j];
            }
        }
    } else if (spec.kind == FusionKind::jf_concat) {
        std::size_t dim = 0;
        for (std::size_t m = 0; m < M; ++m) dim += model.member_nets[m].output_dim();
        cache.joint = Matrix(B, dim);
        for (std::size_t s = 0; s < B; ++s) {
            std::size_t off = 0;
            for (std::size_t m = 0; m < M; ++m) {
                const Matrix& enc = cache.member_caches[m].post.back();
                for (std::size_t j = 0; j < enc.cols; ++j) cache.joint(s, off + j) = enc(s, j);
                off += enc.cols;
            }
        }
    } else if (spec.kind == FusionKind::jf_kron) {
        std::size_t dim = 1;
        for (std::size_t m = 0; m < M; ++m) dim *= model.member_nets[m].output_dim() + 1;
        cache.joint = Matrix(B, dim);
        for (std::size_t s = 0; s < B; ++s) {
            std::vector<Vec> enc(M);
            for (std::size_t m = 0; m < M; ++m) enc[m] = cache.member_caches[m].post.back().row(s);
            cache.joint.set_row(s, jf_kron(enc));
        }
    } else {
        throw std::invalid_argument("fusion forward: majority voting has no joint layer");
    }
    nn::forward_batch(model.head_net, cache.joint, cache.head_cache);
}

/// dz = k y (ds - y.ds): transpose-Jacobian product of the tempered softmax.
void softmax_jvp(const Vec& z, double k, const double* ds, double* dz, std::size_t c) {
    Vec y = nn::softmax_k(z, k);
    double dot = 0.0;
    for (std::size_t j = 0; j < c; ++j) dot += y[j] * ds[j];
    for (std::size_t j = 0; j < c; ++j) dz[j] = k * y[j] * (ds[j] - dot);
}

}  // namespace

Vec fusion_logits(const FusionModel& model, const std::vector<Vec>& modality_rows) {
    model.validate();
    if (model.spec.kind == FusionKind::majority)
        throw std::invalid_argument("fusion_logits: majority voting emits votes, not logits");
    MultimodalSet one;
    one.labels = {0};
    for (const Vec& row : modality_rows) {
        Matrix m(1, row.size());
        m.set_row(0, row);
        one.modality_features.push_back(std::move(m));
    }
    BatchCache cache;
    forward_joint(model, one, {0}, cache);
    return cache.head_cache.logits().row(0);
}

std::vector<int> predict_classes(const FusionModel& model, const MultimodalSet& set) {
    model.validate();
    set.validate();
    std::vector<std::size_t> rows(set.size());
    std::iota(rows.begin(), rows.end(), 0);
    std::vector<int> out(set.size());
    if (model.spec.kind == FusionKind::majority) {
        const std::size_t M = model.spec.member_count();
        std::vector<nn::ForwardCache> caches(M);
        for (std::size_t m = 0; m < M; ++m) {
            Matrix input = gather_rows(set.modality_features[model.spec.member_input[m]], rows);
            nn::forward_batch(model.member_nets[m], input, caches[m]);
        }
        for (std::size_t s = 0; s < set.size(); ++s) {
            std::vector<int> crisp(M);
            std::vector<Vec> soft(M);
            for (std::size_t m = 0; m < M; ++m) {
                Vec z = caches[m].logits().row(s);
                soft[m] = nn::softmax_k(z, model.spec.k_soft);
                crisp[m] = static_cast<int>(argmax(z));
            }
            out[s] = selection::majority_vote(crisp, &soft);
        }
        return out;
    }
    BatchCache cache;
    forward_joint(model, set, rows, cache);
    for (std::size_t s = 0; s < set.size(); ++s)
        out[s] = static_cast<int>(argmax(cache.head_cache.logits().row(s)));
    return out;
}

Metrics classification_metrics(const std::vector<int>& predicted,
                               const std::vector<int>& labels) {
    if (predicted.size() != labels.size())
        throw std::invalid_argument("classification_metrics: length mismatch");
    if (labels.empty()) throw std::invalid_argument("classification_metrics: empty test set");
    std::size_t correct = 0, tp = 0, fn = 0, tn = 0, fp = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (predicted[i] == labels[i]) ++correct;
        if (labels[i] == 1)
            predicted[i] == 1 ? ++tp : ++fn;
        else if (labels[i] == 0)
            predicted[i] == 0 ? ++tn : ++fp;
    }
    Metrics m;
    m.acc = static_cast<double>(correct) / static_cast<double>(labels.size());
    m.tpr = (tp + fn) == 0 ? std::nan("") : static_cast<double>(tp) / static_cast<double>(tp + fn);
    m.tnr = (tn + fp) == 0 ? std::nan("") : static_cast<double>(tn) / static_cast<double>(tn + fp);
    return m;
}

Metrics evaluate_fusion(const FusionModel& model, const MultimodalSet& test_set) {
    return classification_metrics(predict_classes(model, test_set), test_set.labels);
}

JointGradients joint_backward(const FusionModel& model, const MultimodalSet& set,
                              const std::vector<std::size_t>& rows) {
    model.validate();
    if (model.spec.kind == FusionKind::majority)
        throw std::invalid_argument("joint_backward: majority voting is not trainable");
    const auto& spec = model.spec;
    const std::size_t B = rows.size();
    const std::size_t c = spec.n_classes;
    BatchCache cache;
    forward_joint(model, set, rows, cache);

    Matrix probs;
    kernels::softmax_rows(cache.head_cache.logits(), 1.0, probs);
    JointGradients out;
    Matrix d_head_out(B, c);
    const double inv_b = 1.0 / static_cast<double>(B);
    for (std::size_t s = 0; s < B; ++s) {
        const auto label = static_cast<std::size_t>(set.labels[rows[s]]);
        if (label >= c) throw std::invalid_argument("joint_backward: label out of range");
        out.mean_loss += -std::log(std::max(probs(s, label), 1e-12));
        for (std::size_t j = 0; j < c; ++j)
            d_head_out(s, j) = (probs(s, j) - (j == label ? 1.0 : 0.0)) * inv_b;
    }
    out.mean_loss *= inv_b;

    Matrix d_joint;
    out.head_grads =
        nn::backward_batch(model.head_net, cache.joint, cache.head_cache, d_head_out, &d_joint);

    const std::size_t M = spec.member_count();
    out.member_grads.resize(M);
    for (std::size_t m = 0; m < M; ++m) {
        const Matrix& logits = cache.member_caches[m].logits();
        Matrix d_member_out;
        if (spec.kind == FusionKind::jlf) {
            // route each c-block through the softmax Jacobian; crisp mode
            // substitutes the straight-through temperature k_st
            const double k = spec.mode == Mode::soft ? spec.k_soft : spec.k_st;
            d_member_out = Matrix(B, c);
            for (std::size_t s = 0; s < B; ++s)
                softmax_jvp(logits.row(s), k, d_joint.row_ptr(s) + m * c,
                            d_member_out.row_ptr(s), c);
        } else if (spec.kind == FusionKind::jf_concat) {
            std::size_t off = 0;
            for (std::size_t l = 0; l < m; ++l) off += model.member_nets[l].output_dim();
            const std::size_t dim = model.member_nets[m].output_dim();
            d_member_out = Matrix(B, dim);
            for (std::size_t s = 0; s < B; ++s)
                for (std::size_t j = 0; j < dim; ++j) d_member_out(s, j) = d_joint(s, off + j);
        } else {  // jf_kron
            const std::size_t dim = model.member_nets[m].output_dim();
            d_member_out = Matrix(B, dim);
            for (std::size_t s = 0; s < B; ++s) {
                std::vector<Vec> enc(M);
                for (std::size_t l = 0; l < M; ++l)
                    enc[l] = cache.member_caches[l].post.back().row(s);
                auto d_enc = jf_kron_backward(enc, d_joint.row(s));
                for (std::size_t j = 0; j < dim; ++j) d_member_out(s, j) = d_enc[m][j];
            }
        }
        out.member_grads[m] = nn::backward_batch(model.member_nets[m], cache.member_inputs[m],
                                                 cache.member_caches[m], d_member_out, nullptr);
    }
    return out;
}

double fusion_loss(const FusionModel& model, const MultimodalSet& set) {
    if (set.size() == 0) throw std::invalid_argument("fusion_loss: empty set");
    std::vector<std::size_t> rows(set.size());
    std::iota(rows.begin(), rows.end(), 0);
    BatchCache cache;
    forward_joint(model, set, rows, cache);
    Matrix probs;
    kernels::softmax_rows(cache.head_cache.logits(), 1.0, probs);
    double total = 0.0;
    for (std::size_t s = 0; s < set.size(); ++s)
        total += -std::log(
            std::max(probs(s, static_cast<std::size_t>(set.labels[s])), 1e-12));
    return total / static_cast<double>(set.size());
}

FusionTrainResult train_fusion(const FusionModel& init, const MultimodalSet& train_set,
                               const MultimodalSet& val_set, const nn::TrainConfig& cfg,
                               const JointTrainOptions& opts) {
    cfg.validate();
    init.validate();
    train_set.validate();
    val_set.validate();
    if (train_set.size() == 0 || val_set.size() == 0)
        throw nn::TrainingError("train_fusion: empty training or validation set");
    if (init.spec.kind == FusionKind::majority)
        throw std::invalid_argument("train_fusion: majority voting is not trainable");

    FusionTrainResult result;
    FusionModel model = init;
    std::vector<nn::AdamState> member_states;
    for (const auto& net : model.member_nets)
        member_states.push_back(nn::AdamState::for_network(net));
    nn::AdamState head_state = nn::AdamState::for_network(model.head_net);

    nn::PlateauTracker tracker(cfg.lr_plateau_patience, cfg.early_stop_patience);
    Rng rng(cfg.seed);
    double lr = cfg.learning_rate;

    double val0 = fusion_loss(model, val_set);
    tracker.observe(val0);
    result.model = model;
    result.best_epoch = 0;
    result.best_val_loss = val0;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t bsz = std::min(cfg.batch_size, order.size() - start);
            std::vector<std::size_t> rows(order.begin() + start, order.begin() + start + bsz);
            JointGradients grads = joint_backward(model, train_set, rows);
            loss_sum += grads.mean_loss;
            ++batches;
            if (opts.update_members && !model.frozen_members)
                for (std::size_t m = 0; m < model.member_nets.size(); ++m)
                    nn::adam_step(model.member_nets[m], grads.member_grads[m], member_states[m],
                                  lr);
            if (opts.update_head) nn::adam_step(model.head_net, grads.head_grads, head_state, lr);
        }
        const double train_loss = loss_sum / static_cast<double>(batches);
        const double val_loss = fusion_loss(model, val_set);
        if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
            throw nn::TrainingError("train_fusion: non-finite loss at epoch " +
                                    std::to_string(epoch));
        auto decision = tracker.observe(val_loss);
        if (decision.improved) {
            result.model = model;
            result.best_epoch = epoch;
            result.best_val_loss = val_loss;
        }
        result.log.push_back({epoch, train_loss, val_loss, lr, decision.improved});
        if (decision.reduce_lr) lr *= cfg.lr_decay_factor;
        if (decision.stop) {
            result.stopped_early = true;
            break;
        }
    }
    return result;
}

FusionTrainResult train_jlf(const FusionModel& init, const MultimodalSet& train_set,
                            const MultimodalSet& val_set, const nn::TrainConfig& cfg) {
    if (init.frozen_members)
        throw std::invalid_argument("train_jlf: members must not be frozen");
    return train_fusion(init, train_set, val_set, cfg, {});
}

FusionTrainResult train_lf_frozen(const FusionModel& init, const MultimodalSet& train_set,
                                  const MultimodalSet& val_set, const nn::TrainConfig& cfg) {
    FusionModel frozen = init;
    frozen.frozen_members = true;
    JointTrainOptions opts;
    opts.update_members = false;
    return train_fusion(frozen, train_set, val_set, cfg, opts);
}

// ---- Variants ----

const std::vector<std::string>& all_variants() {
    static const std::vector<std::string> names = {
        "jlf-s-1", "jlf-s-2", "jlf-c-1", "jlf-c-2", "lf-mv", "lf-s-1",
        "lf-s-2",  "lf-c-1",  "lf-c-2",  "jf-c",    "jf-m",
    };
    return names;
}

bool is_known_variant(const std::string& name) {
    const auto& v = all_variants();
    return std::find(v.begin(), v.end(), name) != v.end();
}

FusionModel make_variant(const std::string& name, const FusionSpec& base_spec,
                         const std::vector<nn::DenseNetwork>& member_nets, Rng& rng) {
    if (!is_known_variant(name)) throw std::invalid_argument("unknown fusion variant: " + name);
    if (member_nets.size() != base_spec.member_count())
        throw std::invalid_argument("make_variant: member net count mismatch");
    FusionModel model;
    model.variant = name;
    model.spec = base_spec;

    if (name == "lf-mv") {
        model.spec.kind = FusionKind::majority;
        model.member_nets = member_nets;
        model.frozen_members = true;
        model.validate();
        return model;
    }
    if (name == "jf-c" || name == "jf-m") {
        model.spec.kind = name == "jf-c" ? FusionKind::jf_concat : FusionKind::jf_kron;
        if (name == "jf-m" && member_nets.size() < 2)
            throw std::invalid_argument("jf-m: outer-product fusion needs >= 2 members");
        std::size_t in_dim = name == "jf-m" ? 1 : 0;
        for (const auto& net : member_nets) {
            nn::DenseNetwork enc = nn::truncate(net, model.spec.encoding_layer);
            if (name == "jf-m")
                in_dim *= enc.output_dim() + 1;
            else
                in_dim += enc.output_dim();
            model.member_nets.push_back(std::move(enc));
        }
        model.head_net = nn::make_network(in_dim, {}, model.spec.n_classes);
        nn::init_weights(model.head_net, rng);
        model.validate();
        return model;
    }

    // jlf-*/lf-* share the shared-representation architecture
    model.spec.kind = FusionKind::jlf;
    model.spec.mode = name[name.size() - 3] == 's' ? Mode::soft : Mode::crisp;
    model.spec.head = name.back() == '1' ? HeadKind::head1_linear : HeadKind::head2_hidden4;
    model.frozen_members = name[0] == 'l';
    model.member_nets = member_nets;
    model.head_net = build_head(model.spec, rng);
    model.validate();
    return model;
}

// ---- Serialization ----

namespace {

std::string mode_name(Mode m) { return m == Mode::soft ? "soft" : "crisp"; }
std::string head_name(HeadKind h) { return h == HeadKind::head1_linear ? "head1" : "head2"; }
std::string kind_name(FusionKind k) {
    switch (k) {
        case FusionKind::jlf: return "jlf";
        case FusionKind::jf_concat: return "jf-concat";
        case FusionKind::jf_kron: return "jf-kron";
        case FusionKind::majority: return "majority";
    }
    return "jlf";
}

}  // namespace

std::string serialize_fusion(const FusionModel& model) {
    model.validate();
    std::ostringstream out;
    out << "mmfuse-fusion-v1\n";
    out << "variant " << model.variant << "\n";
    out << "kind " << kind_name(model.spec.kind) << "\n";
    out << "mode " << mode_name(model.spec.mode) << "\n";
    out << "head " << head_name(model.spec.head) << "\n";
    out << "k_soft " << io::format_double(model.spec.k_soft) << "\n";
    out << "k_st " << io::format_double(model.spec.k_st) << "\n";
    out << "encoding_layer " << model.spec.encoding_layer << "\n";
    out << "classes " << model.spec.n_classes << "\n";
    out << "frozen " << (model.frozen_members ? 1 : 0) << "\n";
    out << "members " << model.spec.member_count() << "\n";
    for (std::size_t m = 0; m < model.spec.member_count(); ++m)
        out << "member " << model.spec.member_modality[m] << " " << model.spec.member_model[m]
            << " " << model.spec.member_input[m] << "\n";
    for (const auto& net : model.member_nets) out << nn::serialize_network(net);
    out << "head-net " << (model.spec.kind == FusionKind::majority ? 0 : 1) << "\n";
    if (model.spec.kind != FusionKind::majority) out << nn::serialize_network(model.head_net);
    return out.str();
}

FusionModel parse_fusion(std::istream& in) {
    auto expect_line = [&in](const std::string& key) {
        std::string line;
        if (!std::getline(in, line) || line.rfind(key, 0) != 0)
            throw std::runtime_error("fusion parse: expected '" + key + "'");
        return line.size() > key.size() + 1 ? line.substr(key.size() + 1) : std::string();
    };
    if (expect_line("mmfuse-fusion-v1") != "")
        throw std::runtime_error("fusion parse: bad magic");
    FusionModel model;
    model.variant = expect_line("variant");
    std::string kind = expect_line("kind");
    if (kind == "jlf")
        model.spec.kind = FusionKind::jlf;
    else if (kind == "jf-concat")
        model.spec.kind = FusionKind::jf_concat;
    else if (kind == "jf-kron")
        model.spec.kind = FusionKind::jf_kron;
    else if (kind == "majority")
        model.spec.kind = FusionKind::majority;
    else
        throw std::runtime_error("fusion parse: unknown kind " + kind);
    model.spec.mode = expect_line("mode") == "soft" ? Mode::soft : Mode::crisp;
    model.spec.head =
        expect_line("head") == "head1" ? HeadKind::head1_linear : HeadKind::head2_hidden4;
    model.spec.k_soft = std::stod(expect_line("k_soft"));
    model.spec.k_st = std::stod(expect_line("k_st"));
    model.spec.encoding_layer = std::stoi(expect_line("encoding_layer"));
    model.spec.n_classes = static_cast<std::size_t>(std::stoul(expect_line("classes")));
    model.frozen_members = expect_line("frozen") == "1";
    const std::size_t members = std::stoul(expect_line("members"));
    for (std::size_t m = 0; m < members; ++m) {
        std::istringstream ms(expect_line("member"));
        std::string modality, mdl;
        std::size_t input = 0;
        ms >> modality >> mdl >> input;
        model.spec.member_modality.push_back(modality);
        model.spec.member_model.push_back(mdl);
        model.spec.member_input.push_back(input);
    }
    for (std::size_t m = 0; m < members; ++m) model.member_nets.push_back(nn::parse_network(in));
    if (expect_line("head-net") == "1") model.head_net = nn::parse_network(in);
    model.validate();
    return model;
}

void save_fusion(const FusionModel& model, const std::string& path) {
    io::write_file_atomic(path, serialize_fusion(model));
}

FusionModel load_fusion(const std::string& path) {
    std::istringstream in(io::read_file(path));
    return parse_fusion(in);
}

}  // namespace mmfuse::fusion

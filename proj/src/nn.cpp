#include "mmfuse/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "mmfuse/io.hpp"
#include "mmfuse/kernels.hpp"

namespace mmfuse::nn {

std::string activation_name(Activation a) {
    return a == Activation::relu ? "relu" : "identity";
}

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "identity") return Activation::identity;
    throw std::invalid_argument("unknown activation: " + name);
}

std::size_t DenseNetwork::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.data.size() + l.bias.size();
    return n;
}

void DenseNetwork::validate_chain() const {
    if (layers.empty()) throw std::invalid_argument("network has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.bias.size() != l.out_dim())
            throw std::invalid_argument("layer " + std::to_string(i) + ": bias length mismatch");
        if (i > 0 && layers[i - 1].out_dim() != l.in_dim())
            throw std::invalid_argument("layer " + std::to_string(i) + ": input dim " +
                                        std::to_string(l.in_dim()) + " != previous output dim " +
                                        std::to_string(layers[i - 1].out_dim()));
    }
}

void DenseNetwork::validate_classifier() const {
    validate_chain();
    if (layers.back().activation != Activation::identity)
        throw std::invalid_argument("classification layer must carry the identity activation");
    if (output_dim() < 2) throw std::invalid_argument("classifier needs at least 2 outputs");
}

void TrainConfig::validate() const {
    if (learning_rate <= 0.0 || batch_size == 0 || max_epochs == 0 || early_stop_patience == 0 ||
        lr_plateau_patience == 0)
        throw std::invalid_argument("train config: all quantities must be positive");
    if (lr_decay_factor <= 0.0 || lr_decay_factor >= 1.0)
        throw std::invalid_argument("train config: lr_decay_factor must be in (0,1)");
}

AdamState AdamState::for_network(const DenseNetwork& net) {
    AdamState st;
    for (const auto& l : net.layers) {
        st.m_w.emplace_back(l.weights.rows, l.weights.cols);
        st.v_w.emplace_back(l.weights.rows, l.weights.cols);
        st.m_b.emplace_back(l.bias.size(), 0.0);
        st.v_b.emplace_back(l.bias.size(), 0.0);
    }
    return st;
}

Gradients Gradients::zeros_like(const DenseNetwork& net) {
    Gradients g;
    for (const auto& l : net.layers) {
        g.d_weights.emplace_back(l.weights.rows, l.weights.cols);
        g.d_bias.emplace_back(l.bias.size(), 0.0);
    }
    return g;
}

// ---- Forward-path operations ----

Vec forward(const DenseNetwork& net, const Vec& x) {
    net.validate_chain();
    if (x.size() != net.input_dim())
        throw std::invalid_argument("forward: input length " + std::to_string(x.size()) +
                                    " != expected " + std::to_string(net.input_dim()));
    Matrix row(1, x.size());
    row.set_row(0, x);
    ForwardCache cache;
    forward_batch(net, row, cache);
    return cache.logits().row(0);
}

Vec forward_hidden(const DenseNetwork& net, const Vec& x, std::size_t layer_index) {
    net.validate_chain();
    if (layer_index >= net.layers.size())
        throw std::out_of_range("forward_hidden: layer index " + std::to_string(layer_index) +
                                " out of range");
    if (x.size() != net.input_dim())
        throw std::invalid_argument("forward_hidden: input length mismatch");
    Matrix row(1, x.size());
    row.set_row(0, x);
    ForwardCache cache;
    forward_batch(net, row, cache);
    return cache.post[layer_index].row(0);
}

Vec softmax_k(const Vec& z, double k) {
    if (k <= 0.0) throw std::invalid_argument("softmax_k: k must be > 0");
    if (z.empty()) throw std::invalid_argument("softmax_k: empty input");
    Matrix m(1, z.size());
    m.set_row(0, z);
    Matrix y;
    kernels::serial::softmax_rows(m, k, y);
    return y.row(0);
}

Vec crispify(const Vec& z) {
    if (z.empty()) throw std::invalid_argument("crispify: empty input");
    Vec y(z.size(), 0.0);
    y[argmax(z)] = 1.0;
    return y;
}

double cross_entropy(const Vec& y_pred, std::size_t label) {
    if (label >= y_pred.size())
        throw std::invalid_argument("cross_entropy: label " + std::to_string(label) +
                                    " out of range for " + std::to_string(y_pred.size()) +
                                    " classes");
    double sum = std::accumulate(y_pred.begin(), y_pred.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-6)
        throw std::invalid_argument("cross_entropy: prediction does not sum to 1");
    return -std::log(std::max(y_pred[label], 1e-12));
}

// ---- Batch plumbing ----

void forward_batch(const DenseNetwork& net, const Matrix& X, ForwardCache& cache) {
    const std::size_t L = net.layers.size();
    cache.pre.resize(L);
    cache.post.resize(L);
    const Matrix* input = &X;
    for (std::size_t l = 0; l < L; ++l) {
        const auto& layer = net.layers[l];
        kernels::linear_forward(*input, layer.weights, layer.bias, cache.pre[l]);
        if (layer.activation == Activation::relu)
            kernels::relu_forward(cache.pre[l], cache.post[l]);
        else
            cache.post[l] = cache.pre[l];
        input = &cache.post[l];
    }
}

Gradients backward_batch(const DenseNetwork& net, const Matrix& X, const ForwardCache& cache,
                         const Matrix& d_out, Matrix* dX) {
    const std::size_t L = net.layers.size();
    if (!d_out.same_shape(cache.post.back()))
        throw std::invalid_argument("backward_batch: gradient shape mismatch");
    Gradients grads = Gradients::zeros_like(net);
    Matrix d_post = d_out;
    Matrix d_pre;
    for (std::size_t l = L; l-- > 0;) {
        const auto& layer = net.layers[l];
        if (layer.activation == Activation::relu)
            kernels::relu_backward(cache.pre[l], d_post, d_pre);
        else
            d_pre = d_post;
        const Matrix& input = l == 0 ? X : cache.post[l - 1];
        kernels::linear_backward_params(d_pre, input, grads.d_weights[l], grads.d_bias[l]);
        if (l > 0 || dX != nullptr) {
            Matrix d_in;
            kernels::linear_backward_input(d_pre, layer.weights, d_in);
            if (l == 0) {
                if (dX) *dX = std::move(d_in);
            } else {
                d_post = std::move(d_in);
            }
        }
    }
    return grads;
}

Gradients backward(const DenseNetwork& net, const Vec& x, std::size_t label, double k) {
    net.validate_classifier();
    if (label >= net.output_dim()) throw std::invalid_argument("backward: label out of range");
    Matrix row(1, x.size());
    if (x.size() != net.input_dim()) throw std::invalid_argument("backward: input length mismatch");
    row.set_row(0, x);
    ForwardCache cache;
    forward_batch(net, row, cache);
    Vec y = softmax_k(cache.logits().row(0), k);
    // d loss / d logit = k (y - onehot(label))
    Matrix d_out(1, y.size());
    for (std::size_t j = 0; j < y.size(); ++j)
        d_out(0, j) = k * (y[j] - (j == label ? 1.0 : 0.0));
    return backward_batch(net, row, cache, d_out, nullptr);
}

Vec input_gradient(const DenseNetwork& net, const Vec& x, std::size_t target_class) {
    net.validate_chain();
    if (target_class >= net.output_dim())
        throw std::invalid_argument("input_gradient: target class out of range");
    if (x.size() != net.input_dim())
        throw std::invalid_argument("input_gradient: input length mismatch");
    Matrix row(1, x.size());
    row.set_row(0, x);
    ForwardCache cache;
    forward_batch(net, row, cache);
    Matrix d_out(1, net.output_dim());
    d_out(0, target_class) = 1.0;
    Matrix dX;
    backward_batch(net, row, cache, d_out, &dX);
    return dX.row(0);
}

void adam_step(DenseNetwork& net, const Gradients& grads, AdamState& state, double lr) {
    if (grads.d_weights.size() != net.layers.size())
        throw std::invalid_argument("adam_step: gradient/parameter layer count mismatch");
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& layer = net.layers[l];
        const Matrix& gw = grads.d_weights[l];
        if (!gw.same_shape(layer.weights) || grads.d_bias[l].size() != layer.bias.size())
            throw std::invalid_argument("adam_step: gradient shape mismatch at layer " +
                                        std::to_string(l));
        Matrix& mw = state.m_w[l];
        Matrix& vw = state.v_w[l];
        for (std::size_t i = 0; i < gw.data.size(); ++i) {
            const double g = gw.data[i];
            mw.data[i] = state.beta1 * mw.data[i] + (1.0 - state.beta1) * g;
            vw.data[i] = state.beta2 * vw.data[i] + (1.0 - state.beta2) * g * g;
            const double mhat = mw.data[i] / bc1;
            const double vhat = vw.data[i] / bc2;
            layer.weights.data[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
        }
        Vec& mb = state.m_b[l];
        Vec& vb = state.v_b[l];
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
            const double g = grads.d_bias[l][i];
            mb[i] = state.beta1 * mb[i] + (1.0 - state.beta1) * g;
            vb[i] = state.beta2 * vb[i] + (1.0 - state.beta2) * g * g;
            const double mhat = mb[i] / bc1;
            const double vhat = vb[i] / bc2;
            layer.bias[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

// ---- Training ----

PlateauTracker::PlateauTracker(std::size_t plateau_patience, std::size_t stop_patience)
    : plateau_patience_(plateau_patience),
      stop_patience_(stop_patience),
      best_(std::numeric_limits<double>::infinity()) {}

PlateauTracker::Decision PlateauTracker::observe(double val_loss) {
    Decision d;
    if (!seen_any_ || val_loss < best_) {
        seen_any_ = true;
        best_ = val_loss;
        since_improve_plateau_ = 0;
        since_improve_stop_ = 0;
        d.improved = true;
        return d;
    }
    ++since_improve_plateau_;
    ++since_improve_stop_;
    if (since_improve_plateau_ >= plateau_patience_) {
        d.reduce_lr = true;
        since_improve_plateau_ = 0;
    }
    if (since_improve_stop_ >= stop_patience_) d.stop = true;
    return d;
}

double dataset_loss(const DenseNetwork& net, const LabeledSet& set, double k) {
    if (set.size() == 0) throw std::invalid_argument("dataset_loss: empty set");
    ForwardCache cache;
    forward_batch(net, set.features, cache);
    Matrix probs;
    kernels::softmax_rows(cache.logits(), k, probs);
    double total = 0.0;
    for (std::size_t s = 0; s < probs.rows; ++s) {
        const int label = set.labels[s];
        if (label < 0 || static_cast<std::size_t>(label) >= probs.cols)
            throw std::invalid_argument("dataset_loss: label out of range");
        total += -std::log(std::max(probs(s, static_cast<std::size_t>(label)), 1e-12));
    }
    return total / static_cast<double>(probs.rows);
}

double dataset_accuracy(const DenseNetwork& net, const LabeledSet& set) {
    if (set.size() == 0) throw std::invalid_argument("dataset_accuracy: empty set");
    ForwardCache cache;
    forward_batch(net, set.features, cache);
    std::size_t hits = 0;
    for (std::size_t s = 0; s < set.size(); ++s)
        if (argmax(cache.logits().row(s)) == static_cast<std::size_t>(set.labels[s])) ++hits;
    return static_cast<double>(hits) / static_cast<double>(set.size());
}

TrainResult train(const DenseNetwork& init, const LabeledSet& train_set,
                  const LabeledSet& val_set, const TrainConfig& cfg, double k) {
    cfg.validate();
    init.validate_classifier();
    if (train_set.size() == 0 || val_set.size() == 0)
        throw TrainingError("train: empty training or validation set");
    if (train_set.features.cols != init.input_dim())
        throw std::invalid_argument("train: feature dim != network input dim");
    if (train_set.labels.size() != train_set.size() || val_set.labels.size() != val_set.size())
        throw std::invalid_argument("train: label count mismatch");

    TrainResult result;
    DenseNetwork net = init;
    AdamState state = AdamState::for_network(net);
    PlateauTracker tracker(cfg.lr_plateau_patience, cfg.early_stop_patience);
    Rng rng(cfg.seed);
    double lr = cfg.learning_rate;

    // The untouched initialization counts as the epoch-0 candidate, so a run
    // that never improves validation loss hands back its starting weights.
    double val0 = dataset_loss(net, val_set, k);
    tracker.observe(val0);
    result.net = net;
    result.best_epoch = 0;
    result.best_val_loss = val0;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    const std::size_t c = net.output_dim();
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        rng.shuffle(order);
        double train_loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t bsz = std::min(cfg.batch_size, order.size() - start);
            Matrix X(bsz, train_set.features.cols);
            std::vector<int> labels(bsz);
            for (std::size_t i = 0; i < bsz; ++i) {
                const std::size_t src = order[start + i];
                for (std::size_t j = 0; j < X.cols; ++j) X(i, j) = train_set.features(src, j);
                labels[i] = train_set.labels[src];
            }
            ForwardCache cache;
            forward_batch(net, X, cache);
            Matrix probs;
            kernels::softmax_rows(cache.logits(), k, probs);
            Matrix d_out(bsz, c);
            const double inv_b = 1.0 / static_cast<double>(bsz);
            for (std::size_t s = 0; s < bsz; ++s) {
                const auto label = static_cast<std::size_t>(labels[s]);
                if (label >= c) throw std::invalid_argument("train: label out of range");
                train_loss_sum += -std::log(std::max(probs(s, label), 1e-12));
                for (std::size_t j = 0; j < c; ++j)
                    d_out(s, j) = k * (probs(s, j) - (j == label ? 1.0 : 0.0)) * inv_b;
            }
            seen += bsz;
            Gradients grads = backward_batch(net, X, cache, d_out, nullptr);
            adam_step(net, grads, state, lr);
        }
        const double train_loss = train_loss_sum / static_cast<double>(seen);
        const double val_loss = dataset_loss(net, val_set, k);
        if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
            throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch));

        auto decision = tracker.observe(val_loss);
        if (decision.improved) {
            result.net = net;
            result.best_epoch = epoch;
            result.best_val_loss = val_loss;
        }
        result.log.push_back({epoch, train_loss, val_loss, lr, decision.improved});
        if (decision.reduce_lr) {
            lr *= cfg.lr_decay_factor;
            ++result.lr_reductions;
        }
        if (decision.stop) {
            result.stopped_early = true;
            break;
        }
    }
    return result;
}

// ---- Construction and serialization ----

DenseNetwork make_network(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims,
                          std::size_t output_dim) {
    if (input_dim == 0 || output_dim < 2)
        throw std::invalid_argument("make_network: input_dim must be > 0, output_dim >= 2");
    DenseNetwork net;
    std::size_t prev = input_dim;
    for (std::size_t h : hidden_dims) {
        if (h == 0) throw std::invalid_argument("make_network: zero-width hidden layer");
        DenseLayer l;
        l.weights = Matrix(h, prev);
        l.bias.assign(h, 0.0);
        l.activation = Activation::relu;
        net.layers.push_back(std::move(l));
        prev = h;
    }
    DenseLayer out;
    out.weights = Matrix(output_dim, prev);
    out.bias.assign(output_dim, 0.0);
    out.activation = Activation::identity;
    net.layers.push_back(std::move(out));
    return net;
}

void init_weights(DenseNetwork& net, Rng& rng) {
    for (auto& layer : net.layers) {
        const double fan_in = static_cast<double>(layer.in_dim());
        const double fan_out = static_cast<double>(layer.out_dim());
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (auto& w : layer.weights.data) w = rng.uniform(-limit, limit);
        for (auto& b : layer.bias) b = 0.0;
    }
}

DenseNetwork truncate(const DenseNetwork& net, int layer_index) {
    net.validate_chain();
    const int n = static_cast<int>(net.layers.size());
    int idx = layer_index < 0 ? n + layer_index : layer_index;
    if (idx < 0 || idx >= n) throw std::out_of_range("truncate: layer index out of range");
    DenseNetwork enc;
    enc.layers.assign(net.layers.begin(), net.layers.begin() + idx + 1);
    return enc;
}

std::string serialize_network(const DenseNetwork& net) {
    net.validate_chain();
    std::ostringstream out;
    out << "mmfuse-net-v1\n";
    out << "layers " << net.layers.size() << "\n";
    for (const auto& l : net.layers) {
        out << "layer " << l.out_dim() << " " << l.in_dim() << " " << activation_name(l.activation)
            << "\n";
        for (std::size_t r = 0; r < l.weights.rows; ++r) {
            for (std::size_t c = 0; c < l.weights.cols; ++c) {
                if (c) out << " ";
                out << io::format_double(l.weights(r, c));
            }
            out << "\n";
        }
        for (std::size_t i = 0; i < l.bias.size(); ++i) {
            if (i) out << " ";
            out << io::format_double(l.bias[i]);
        }
        out << "\n";
    }
    return out.str();
}

namespace {

std::string next_line(std::istream& in, const char* what) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(std::string("network parse: missing ") + what);
    return line;
}

Vec parse_reals(const std::string& line, std::size_t expect, const char* what) {
    Vec out;
    out.reserve(expect);
    std::istringstream ss(line);
    double v;
    while (ss >> v) out.push_back(v);
    if (out.size() != expect)
        throw std::runtime_error(std::string("network parse: bad ") + what + " count");
    return out;
}

}  // namespace

DenseNetwork parse_network(std::istream& in) {
    if (next_line(in, "magic") != "mmfuse-net-v1")
        throw std::runtime_error("network parse: bad magic, expected mmfuse-net-v1");
    std::istringstream hdr(next_line(in, "layer count"));
    std::string tag;
    std::size_t n_layers = 0;
    hdr >> tag >> n_layers;
    if (tag != "layers" || n_layers == 0) throw std::runtime_error("network parse: bad layer count");
    DenseNetwork net;
    for (std::size_t l = 0; l < n_layers; ++l) {
        std::istringstream lh(next_line(in, "layer header"));
        std::size_t out_dim = 0, in_dim = 0;
        std::string act;
        lh >> tag >> out_dim >> in_dim >> act;
        if (tag != "layer" || out_dim == 0 || in_dim == 0)
            throw std::runtime_error("network parse: bad layer header");
        DenseLayer layer;
        layer.activation = activation_from_name(act);
        layer.weights = Matrix(out_dim, in_dim);
        for (std::size_t r = 0; r < out_dim; ++r) {
            Vec row = parse_reals(next_line(in, "weight row"), in_dim, "weight");
            layer.weights.set_row(r, row);
        }
        layer.bias = parse_reals(next_line(in, "bias row"), out_dim, "bias");
        net.layers.push_back(std::move(layer));
    }
    net.validate_chain();
    if (!std::all_of(net.layers.begin(), net.layers.end(),
                     [](const DenseLayer& l) { return l.weights.all_finite(); }))
        throw std::runtime_error("network parse: non-finite weights");
    return net;
}

void save_network(const DenseNetwork& net, const std::string& path) {
    io::write_file_atomic(path, serialize_network(net));
}

DenseNetwork load_network(const std::string& path) {
    std::istringstream in(io::read_file(path));
    return parse_network(in);
}

}  // namespace mmfuse::nn

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mmfuse/matrix.hpp"
#include "mmfuse/rng.hpp"

namespace mmfuse::nn {

enum class Activation { relu, identity };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct DenseLayer {
    Matrix weights;  // out x in
    Vec bias;        // out
    Activation activation = Activation::identity;

    std::size_t in_dim() const { return weights.cols; }
    std::size_t out_dim() const { return weights.rows; }
};

/// Feed-forward network. The last layer is the classification layer and
/// carries the identity activation; forward() returns its pre-activations
/// (logits).
struct DenseNetwork {
    std::vector<DenseLayer> layers;

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }
    std::size_t parameter_count() const;

    /// Adjacent layer dims chain and all bias lengths match.
    void validate_chain() const;
    /// Chain plus classifier rules: identity last layer, >= 2 outputs.
    void validate_classifier() const;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 300;
    std::size_t early_stop_patience = 25;
    std::size_t lr_plateau_patience = 10;
    double lr_decay_factor = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Per-parameter Adam buffers, one pair of moment tensors per layer.
struct AdamState {
    std::vector<Matrix> m_w, v_w;
    std::vector<Vec> m_b, v_b;
    std::size_t step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState for_network(const DenseNetwork& net);
};

struct Gradients {
    std::vector<Matrix> d_weights;
    std::vector<Vec> d_bias;

    static Gradients zeros_like(const DenseNetwork& net);
};

struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

// ---- Pure forward-path operations ----

/// Logits of the network at x (last-layer pre-activations).
Vec forward(const DenseNetwork& net, const Vec& x);

/// Post-activation output of the indexed layer (0-based).
Vec forward_hidden(const DenseNetwork& net, const Vec& x, std::size_t layer_index);

/// y_p = exp(k z_p) / sum_t exp(k z_t), computed with max subtraction.
Vec softmax_k(const Vec& z, double k);

/// One-hot of argmax(z); ties break toward the lowest index.
Vec crispify(const Vec& z);

/// -ln(y_pred[label]) with the log argument floored at 1e-12.
double cross_entropy(const Vec& y_pred, std::size_t label);

// ---- Gradients and updates ----

/// Exact gradients of cross_entropy(softmax_k(forward(x)), label) w.r.t.
/// every weight and bias.
Gradients backward(const DenseNetwork& net, const Vec& x, std::size_t label, double k);

/// Gradient of the target-class logit w.r.t. the input vector.
Vec input_gradient(const DenseNetwork& net, const Vec& x, std::size_t target_class);

void adam_step(DenseNetwork& net, const Gradients& grads, AdamState& state, double lr);

// ---- Batch-level plumbing shared with the fusion trainer ----

struct ForwardCache {
    std::vector<Matrix> pre;   // z per layer, batch x out
    std::vector<Matrix> post;  // activation(z) per layer
    const Matrix& logits() const { return pre.back(); }
};

void forward_batch(const DenseNetwork& net, const Matrix& X, ForwardCache& cache);

/// Backpropagate d_out (gradient w.r.t. the last layer's post-activation
/// output, batch x out) through the network. Returns parameter gradients
/// summed over the batch; writes the input gradient to dX when non-null.
Gradients backward_batch(const DenseNetwork& net, const Matrix& X, const ForwardCache& cache,
                         const Matrix& d_out, Matrix* dX);

// ---- Training ----

struct LabeledSet {
    Matrix features;          // N x d
    std::vector<int> labels;  // N, values in [0, c)

    std::size_t size() const { return features.rows; }
};

/// Tracks the running-minimum validation loss; reports when to decay the
/// learning rate and when to stop. Kept separate from train() so schedule
/// behaviour is testable against scripted loss sequences.
class PlateauTracker {
public:
    PlateauTracker(std::size_t plateau_patience, std::size_t stop_patience);

    struct Decision {
        bool improved = false;
        bool reduce_lr = false;
        bool stop = false;
    };

    Decision observe(double val_loss);

    double best_loss() const { return best_; }

private:
    std::size_t plateau_patience_;
    std::size_t stop_patience_;
    double best_;
    std::size_t since_improve_plateau_ = 0;
    std::size_t since_improve_stop_ = 0;
    bool seen_any_ = false;
};

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
    bool improved = false;
};

struct TrainResult {
    DenseNetwork net;  // parameters at minimum validation loss
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    std::size_t lr_reductions = 0;
    bool stopped_early = false;
};

/// Mini-batch Adam training with plateau LR decay and early stopping.
/// Deterministic given (seed, data, config). Losses use softmax_k with the
/// supplied temperature.
TrainResult train(const DenseNetwork& init, const LabeledSet& train_set,
                  const LabeledSet& val_set, const TrainConfig& cfg, double k);

/// Mean cross-entropy of softmax_k(logits) over a labeled set.
double dataset_loss(const DenseNetwork& net, const LabeledSet& set, double k);

/// Fraction of rows whose argmax logit equals the label.
double dataset_accuracy(const DenseNetwork& net, const LabeledSet& set);

// ---- Construction and serialization ----

DenseNetwork make_network(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims,
                          std::size_t output_dim);

/// Glorot-uniform initialization: each layer drawn from
/// +- sqrt(6 / (fan_in + fan_out)).
void init_weights(DenseNetwork& net, Rng& rng);

/// First layers.size() layers of net, for use as an encoder. layer_index may
/// be negative to count from the end (-1 = full network, -2 = drop the
/// classification layer).
DenseNetwork truncate(const DenseNetwork& net, int layer_index);

/// "mmfuse-net-v1" text format; decimals carry 17 significant digits so the
/// round trip is bit-exact.
std::string serialize_network(const DenseNetwork& net);
DenseNetwork parse_network(std::istream& in);
void save_network(const DenseNetwork& net, const std::string& path);
DenseNetwork load_network(const std::string& path);

}  // namespace mmfuse::nn

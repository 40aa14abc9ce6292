#pragma once

#include "callplan/calllog.hpp"
#include "callplan/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace callplan {

// ---------------------------------------------------------------------------
// Convolutional disengagement predictor: two 1-D conv layers over the padded
// call sequence, a masked time-average pool over the valid steps, a two-layer
// static-feature encoder, and a two-layer head ending in a logistic unit.
// Batch normalization follows every feed-forward layer except the output.
// ---------------------------------------------------------------------------

struct CondipConfig {
    int t_max = kMaxCallsPerWindow;
    int dyn_channels = kDynamicChannels;
    int static_dim = 22; // encoded profile (16) + six scalar call features
    int conv_channels = 20;
    int kernel_width = 3;
    int static_hidden1 = 50;
    int static_hidden2 = 100;
    int head_hidden = 100;
    // Small enough that normalized batch variance is 1 to within 1e-5 for
    // any batch with non-degenerate spread.
    double bn_eps = 1e-9;
    double bn_momentum = 0.9;
};

struct TrainConfig {
    int epochs = 40;
    int batch_size = 32;
    double learning_rate = 0.05;
    double class_weight_low = 1.0;
    double class_weight_high = 1.75;
    std::uint64_t seed = 0;
    int early_stop_patience = 8;
};

struct LinearLayer {
    int in_dim = 0, out_dim = 0;
    std::vector<double> weights; // out x in, row-major
    std::vector<double> bias;
    std::vector<double> grad_weights, grad_bias;
};

struct Conv1dLayer {
    int in_channels = 0, out_channels = 0, width = 0; // same-padded
    std::vector<double> kernels;                      // out x in x width
    std::vector<double> bias;
    std::vector<double> grad_kernels, grad_bias;
};

struct BatchNormLayer {
    int dim = 0;
    double eps = 1e-9, momentum = 0.9;
    std::vector<double> scale, shift;
    std::vector<double> running_mean, running_var; // biased variance
    bool initialized = false; // first train-mode pass copies batch stats
    std::vector<double> grad_scale, grad_shift;
};

/// One example in network form. `dynamic` holds t_len rows of dyn_channels
/// values; rows at and beyond valid_len are zero padding.
struct CondipExample {
    std::vector<double> dynamic;
    int t_len = 0;
    int valid_len = 0;
    std::vector<double> static_input;
};

CondipExample to_condip_example(const SequenceFeatures &features);

enum class RunMode { Train, Infer };

/// Intermediates of one forward pass, retained for backward.
struct CondipCache;

/// Handle on one parameter array and its gradient buffer. `group` is one of
/// "conv", "static_encoder", "head", "batch_norm".
struct ParamRef {
    std::string name;
    std::string group;
    std::vector<double> *value = nullptr;
    std::vector<double> *grad = nullptr;
};

class CondipNetwork {
  public:
    CondipNetwork() = default;
    CondipNetwork(const CondipConfig &config, std::uint64_t seed);

    const CondipConfig &config() const { return config_; }

    /// All parameter arrays with their gradient buffers, in a fixed order.
    std::vector<ParamRef> parameters();

    void zero_gradients();

    /// SGD step: p -= learning_rate * grad.
    void apply_gradients(double learning_rate);

    Conv1dLayer conv1, conv2;
    LinearLayer static1, static2;
    LinearLayer head1, head2, output;
    BatchNormLayer bn_static1, bn_static2, bn_head1, bn_head2;

  private:
    CondipConfig config_;
};

/// Forward pass over a batch. Train mode normalizes with batch statistics
/// and updates running statistics; infer mode uses running statistics.
/// Returns one probability per example. `cache`, when non-null, is filled for
/// a subsequent backward pass.
std::vector<double> condip_forward(CondipNetwork &net,
                                   const std::vector<CondipExample> &batch, RunMode mode,
                                   CondipCache *cache);

/// Weighted binary cross-entropy, mean over the batch. Labels are 0/1 with 1
/// the positive class; the positive class carries weight_high.
double condip_loss(const std::vector<double> &probabilities, const std::vector<int> &labels,
                   double weight_low, double weight_high);

/// Exact gradients of the weighted BCE loss w.r.t. every parameter,
/// accumulated into the network's gradient buffers (zeroed first).
/// The cache must come from a matching train-mode forward pass.
void condip_backward(CondipNetwork &net, const CondipCache &cache,
                     const std::vector<int> &labels, double weight_low, double weight_high);

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    int best_epoch = -1;
    bool stopped_early = false;
};

/// Mini-batch gradient descent with seeded shuffling and early stopping on
/// validation loss (kept parameters are the best-validation snapshot).
/// Throws TrainingDivergedError if the loss goes non-finite.
TrainHistory condip_train(CondipNetwork &net, const std::vector<LabeledExample> &train,
                          const std::vector<LabeledExample> &validation,
                          const TrainConfig &config);

/// Single-example inference probability.
double condip_predict(CondipNetwork &net, const SequenceFeatures &features);

// Exposed for tests: masked time-average over the first valid_len steps of a
// (channels x t_len) row-major activation map. valid_len == 0 gives zeros.
std::vector<double> masked_average_pool(const std::vector<double> &activations, int channels,
                                        int t_len, int valid_len);

struct CondipCache {
    RunMode mode = RunMode::Train;
    int batch_size = 0;
    std::vector<CondipExample> inputs;

    // Dynamic path, per example: conv pre-activations and activations,
    // (channels x t_len) row-major.
    std::vector<std::vector<double>> conv1_pre, conv1_act;
    std::vector<std::vector<double>> conv2_pre, conv2_act;
    std::vector<std::vector<double>> pooled; // conv_channels

    // Static path and head, batch-major (batch x dim).
    struct DenseStage {
        std::vector<std::vector<double>> pre;        // linear output
        std::vector<std::vector<double>> normalized; // BN x-hat
        std::vector<std::vector<double>> scaled;     // BN output
        std::vector<std::vector<double>> act;        // tanh output
        std::vector<double> mean, inv_std;           // stats used
    };
    DenseStage s1, s2, h1, h2;
    std::vector<std::vector<double>> concat;
    std::vector<double> logits;
    std::vector<double> probabilities;
};

} // namespace callplan

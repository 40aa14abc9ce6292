#include "callplan/condip.hpp"

#include "callplan/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace callplan {

namespace {

double uniform_init(Rng &rng, double bound) { return rng.uniform(-bound, bound); }

void init_linear(LinearLayer &layer, int in_dim, int out_dim, Rng &rng) {
    layer.in_dim = in_dim;
    layer.out_dim = out_dim;
    layer.weights.resize(static_cast<std::size_t>(in_dim) * out_dim);
    layer.bias.assign(static_cast<std::size_t>(out_dim), 0.0);
    layer.grad_weights.assign(layer.weights.size(), 0.0);
    layer.grad_bias.assign(layer.bias.size(), 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (double &w : layer.weights) {
        w = uniform_init(rng, bound);
    }
}

void init_conv(Conv1dLayer &layer, int in_channels, int out_channels, int width, Rng &rng) {
    layer.in_channels = in_channels;
    layer.out_channels = out_channels;
    layer.width = width;
    layer.kernels.resize(static_cast<std::size_t>(out_channels) * in_channels * width);
    layer.bias.assign(static_cast<std::size_t>(out_channels), 0.0);
    layer.grad_kernels.assign(layer.kernels.size(), 0.0);
    layer.grad_bias.assign(layer.bias.size(), 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * width));
    for (double &k : layer.kernels) {
        k = uniform_init(rng, bound);
    }
}

void init_batch_norm(BatchNormLayer &layer, int dim, const CondipConfig &config) {
    layer.dim = dim;
    layer.eps = config.bn_eps;
    layer.momentum = config.bn_momentum;
    layer.scale.assign(static_cast<std::size_t>(dim), 1.0);
    layer.shift.assign(static_cast<std::size_t>(dim), 0.0);
    layer.running_mean.assign(static_cast<std::size_t>(dim), 0.0);
    layer.running_var.assign(static_cast<std::size_t>(dim), 1.0);
    layer.initialized = false;
    layer.grad_scale.assign(static_cast<std::size_t>(dim), 0.0);
    layer.grad_shift.assign(static_cast<std::size_t>(dim), 0.0);
}

std::vector<double> linear_apply(const LinearLayer &layer, const std::vector<double> &in) {
    std::vector<double> out(static_cast<std::size_t>(layer.out_dim));
    for (int o = 0; o < layer.out_dim; ++o) {
        double sum = layer.bias[static_cast<std::size_t>(o)];
        const double *w = &layer.weights[static_cast<std::size_t>(o) * layer.in_dim];
        for (int i = 0; i < layer.in_dim; ++i) {
            sum += w[i] * in[static_cast<std::size_t>(i)];
        }
        out[static_cast<std::size_t>(o)] = sum;
    }
    return out;
}

/// Linear -> batch norm -> tanh over a batch, filling one DenseStage.
void dense_stage_forward(const LinearLayer &linear, BatchNormLayer &bn,
                         const std::vector<std::vector<double>> &inputs, RunMode mode,
                         CondipCache::DenseStage &stage) {
    const std::size_t batch = inputs.size();
    const std::size_t dim = static_cast<std::size_t>(linear.out_dim);
    stage.pre.resize(batch);
    for (std::size_t e = 0; e < batch; ++e) {
        stage.pre[e] = linear_apply(linear, inputs[e]);
    }

    stage.mean.assign(dim, 0.0);
    stage.inv_std.assign(dim, 0.0);
    if (mode == RunMode::Train) {
        std::vector<double> var(dim, 0.0);
        for (std::size_t j = 0; j < dim; ++j) {
            double m = 0.0;
            for (std::size_t e = 0; e < batch; ++e) {
                m += stage.pre[e][j];
            }
            m /= static_cast<double>(batch);
            double v = 0.0;
            for (std::size_t e = 0; e < batch; ++e) {
                const double d = stage.pre[e][j] - m;
                v += d * d;
            }
            v /= static_cast<double>(batch); // biased, matching running stats
            stage.mean[j] = m;
            var[j] = v;
            stage.inv_std[j] = 1.0 / std::sqrt(v + bn.eps);
        }
        if (!bn.initialized) {
            bn.running_mean = stage.mean;
            bn.running_var = var;
            bn.initialized = true;
        } else {
            for (std::size_t j = 0; j < dim; ++j) {
                bn.running_mean[j] = bn.momentum * bn.running_mean[j] +
                                     (1.0 - bn.momentum) * stage.mean[j];
                bn.running_var[j] = bn.momentum * bn.running_var[j] +
                                    (1.0 - bn.momentum) * var[j];
            }
        }
    } else {
        for (std::size_t j = 0; j < dim; ++j) {
            stage.mean[j] = bn.running_mean[j];
            stage.inv_std[j] = 1.0 / std::sqrt(bn.running_var[j] + bn.eps);
        }
    }

    stage.normalized.resize(batch);
    stage.scaled.resize(batch);
    stage.act.resize(batch);
    for (std::size_t e = 0; e < batch; ++e) {
        stage.normalized[e].resize(dim);
        stage.scaled[e].resize(dim);
        stage.act[e].resize(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            const double xhat = (stage.pre[e][j] - stage.mean[j]) * stage.inv_std[j];
            stage.normalized[e][j] = xhat;
            stage.scaled[e][j] = bn.scale[j] * xhat + bn.shift[j];
            stage.act[e][j] = std::tanh(stage.scaled[e][j]);
        }
    }
}

/// Backward through tanh -> batch norm -> linear for one DenseStage.
/// `d_act` is the loss gradient at the tanh output; returns the gradient at
/// the stage input and accumulates parameter gradients.
std::vector<std::vector<double>>
dense_stage_backward(LinearLayer &linear, BatchNormLayer &bn,
                     const std::vector<std::vector<double>> &inputs,
                     const CondipCache::DenseStage &stage, RunMode mode,
                     const std::vector<std::vector<double>> &d_act) {
    const std::size_t batch = inputs.size();
    const std::size_t dim = static_cast<std::size_t>(linear.out_dim);

    // tanh
    std::vector<std::vector<double>> d_scaled(batch, std::vector<double>(dim));
    for (std::size_t e = 0; e < batch; ++e) {
        for (std::size_t j = 0; j < dim; ++j) {
            const double a = stage.act[e][j];
            d_scaled[e][j] = d_act[e][j] * (1.0 - a * a);
        }
    }

    // batch norm
    std::vector<std::vector<double>> d_pre(batch, std::vector<double>(dim));
    for (std::size_t j = 0; j < dim; ++j) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t e = 0; e < batch; ++e) {
            sum_dy += d_scaled[e][j];
            sum_dy_xhat += d_scaled[e][j] * stage.normalized[e][j];
        }
        bn.grad_scale[j] += sum_dy_xhat;
        bn.grad_shift[j] += sum_dy;
        const double g = bn.scale[j] * stage.inv_std[j];
        if (mode == RunMode::Train) {
            const double inv_b = 1.0 / static_cast<double>(batch);
            for (std::size_t e = 0; e < batch; ++e) {
                d_pre[e][j] = g * (d_scaled[e][j] - sum_dy * inv_b -
                                   stage.normalized[e][j] * sum_dy_xhat * inv_b);
            }
        } else {
            for (std::size_t e = 0; e < batch; ++e) {
                d_pre[e][j] = g * d_scaled[e][j];
            }
        }
    }

    // linear
    std::vector<std::vector<double>> d_in(
        batch, std::vector<double>(static_cast<std::size_t>(linear.in_dim), 0.0));
    for (std::size_t e = 0; e < batch; ++e) {
        for (int o = 0; o < linear.out_dim; ++o) {
            const double d = d_pre[e][static_cast<std::size_t>(o)];
            double *gw = &linear.grad_weights[static_cast<std::size_t>(o) * linear.in_dim];
            const double *w = &linear.weights[static_cast<std::size_t>(o) * linear.in_dim];
            linear.grad_bias[static_cast<std::size_t>(o)] += d;
            for (int i = 0; i < linear.in_dim; ++i) {
                gw[i] += d * inputs[e][static_cast<std::size_t>(i)];
                d_in[e][static_cast<std::size_t>(i)] += d * w[i];
            }
        }
    }
    return d_in;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

} // namespace

CondipExample to_condip_example(const SequenceFeatures &features) {
    CondipExample example;
    example.t_len = static_cast<int>(features.dynamic.rows.size());
    example.valid_len = features.dynamic.valid_len;
    example.dynamic.reserve(static_cast<std::size_t>(example.t_len) * kDynamicChannels);
    for (const auto &row : features.dynamic.rows) {
        example.dynamic.insert(example.dynamic.end(), row.begin(), row.end());
    }
    example.static_input = features.static_with_scalars();
    return example;
}

CondipNetwork::CondipNetwork(const CondipConfig &config, std::uint64_t seed) : config_(config) {
    Rng rng(derive_seed(seed, "condip.init"));
    init_conv(conv1, config.dyn_channels, config.conv_channels, config.kernel_width, rng);
    init_conv(conv2, config.conv_channels, config.conv_channels, config.kernel_width, rng);
    init_linear(static1, config.static_dim, config.static_hidden1, rng);
    init_linear(static2, config.static_hidden1, config.static_hidden2, rng);
    init_linear(head1, config.static_hidden2 + config.conv_channels, config.head_hidden, rng);
    init_linear(head2, config.head_hidden, config.head_hidden, rng);
    init_linear(output, config.head_hidden, 1, rng);
    init_batch_norm(bn_static1, config.static_hidden1, config);
    init_batch_norm(bn_static2, config.static_hidden2, config);
    init_batch_norm(bn_head1, config.head_hidden, config);
    init_batch_norm(bn_head2, config.head_hidden, config);
}

std::vector<ParamRef> CondipNetwork::parameters() {
    std::vector<ParamRef> refs;
    auto conv = [&](const std::string &name, Conv1dLayer &layer) {
        refs.push_back({name + ".kernels", "conv", &layer.kernels, &layer.grad_kernels});
        refs.push_back({name + ".bias", "conv", &layer.bias, &layer.grad_bias});
    };
    auto linear = [&](const std::string &name, const std::string &group, LinearLayer &layer) {
        refs.push_back({name + ".weights", group, &layer.weights, &layer.grad_weights});
        refs.push_back({name + ".bias", group, &layer.bias, &layer.grad_bias});
    };
    auto bn = [&](const std::string &name, BatchNormLayer &layer) {
        refs.push_back({name + ".scale", "batch_norm", &layer.scale, &layer.grad_scale});
        refs.push_back({name + ".shift", "batch_norm", &layer.shift, &layer.grad_shift});
    };
    conv("conv1", conv1);
    conv("conv2", conv2);
    linear("static1", "static_encoder", static1);
    linear("static2", "static_encoder", static2);
    linear("head1", "head", head1);
    linear("head2", "head", head2);
    linear("output", "head", output);
    bn("bn_static1", bn_static1);
    bn("bn_static2", bn_static2);
    bn("bn_head1", bn_head1);
    bn("bn_head2", bn_head2);
    return refs;
}

void CondipNetwork::zero_gradients() {
    for (ParamRef &ref : parameters()) {
        std::fill(ref.grad->begin(), ref.grad->end(), 0.0);
    }
}

void CondipNetwork::apply_gradients(double learning_rate) {
    for (ParamRef &ref : parameters()) {
        for (std::size_t i = 0; i < ref.value->size(); ++i) {
            (*ref.value)[i] -= learning_rate * (*ref.grad)[i];
        }
    }
}

std::vector<double> masked_average_pool(const std::vector<double> &activations, int channels,
                                        int t_len, int valid_len) {
    std::vector<double> pooled(static_cast<std::size_t>(channels), 0.0);
    if (valid_len <= 0) {
        return pooled;
    }
    for (int c = 0; c < channels; ++c) {
        double sum = 0.0;
        for (int t = 0; t < valid_len; ++t) {
            sum += activations[static_cast<std::size_t>(c) * t_len + t];
        }
        pooled[static_cast<std::size_t>(c)] = sum / valid_len;
    }
    return pooled;
}

namespace {

/// Same-padded 1-D convolution. `in_at(ic, t)` must return 0-padded input.
template <typename InAt>
void conv_forward(const Conv1dLayer &layer, int t_len, InAt in_at, std::vector<double> &pre) {
    const int pad = layer.width / 2;
    pre.assign(static_cast<std::size_t>(layer.out_channels) * t_len, 0.0);
    for (int c = 0; c < layer.out_channels; ++c) {
        for (int t = 0; t < t_len; ++t) {
            double sum = layer.bias[static_cast<std::size_t>(c)];
            for (int ic = 0; ic < layer.in_channels; ++ic) {
                const double *k =
                    &layer.kernels[(static_cast<std::size_t>(c) * layer.in_channels + ic) *
                                   layer.width];
                for (int w = 0; w < layer.width; ++w) {
                    const int tt = t + w - pad;
                    if (tt >= 0 && tt < t_len) {
                        sum += k[w] * in_at(ic, tt);
                    }
                }
            }
            pre[static_cast<std::size_t>(c) * t_len + t] = sum;
        }
    }
}

/// Kernel/bias gradients plus input gradient for a same-padded convolution.
template <typename InAt, typename DInAdd>
void conv_backward(Conv1dLayer &layer, int t_len, InAt in_at,
                   const std::vector<double> &d_pre, DInAdd d_in_add) {
    const int pad = layer.width / 2;
    for (int c = 0; c < layer.out_channels; ++c) {
        double db = 0.0;
        for (int t = 0; t < t_len; ++t) {
            db += d_pre[static_cast<std::size_t>(c) * t_len + t];
        }
        layer.grad_bias[static_cast<std::size_t>(c)] += db;
        for (int ic = 0; ic < layer.in_channels; ++ic) {
            const std::size_t kbase =
                (static_cast<std::size_t>(c) * layer.in_channels + ic) * layer.width;
            for (int w = 0; w < layer.width; ++w) {
                double dk = 0.0;
                for (int t = 0; t < t_len; ++t) {
                    const int tt = t + w - pad;
                    if (tt >= 0 && tt < t_len) {
                        const double d = d_pre[static_cast<std::size_t>(c) * t_len + t];
                        dk += d * in_at(ic, tt);
                        d_in_add(ic, tt, d * layer.kernels[kbase + w]);
                    }
                }
                layer.grad_kernels[kbase + w] += dk;
            }
        }
    }
}

} // namespace

std::vector<double> condip_forward(CondipNetwork &net, const std::vector<CondipExample> &batch,
                                   RunMode mode, CondipCache *cache) {
    if (batch.empty()) {
        throw Error("condip_forward: empty batch");
    }
    const CondipConfig &config = net.config();
    const std::size_t b = batch.size();

    CondipCache local;
    CondipCache &c = cache ? *cache : local;
    c = CondipCache{};
    c.mode = mode;
    c.batch_size = static_cast<int>(b);
    c.inputs = batch;

    // Dynamic path, per example.
    c.conv1_pre.resize(b);
    c.conv1_act.resize(b);
    c.conv2_pre.resize(b);
    c.conv2_act.resize(b);
    c.pooled.resize(b);
    for (std::size_t e = 0; e < b; ++e) {
        const CondipExample &ex = batch[e];
        const int t_len = ex.t_len;
        // Steps at and beyond valid_len are padding: activations there are
        // masked to zero after each conv layer, so appended zero rows can
        // never leak into the valid steps through the second layer's
        // receptive field.
        auto mask_padding = [&](std::vector<double> &act, int channels) {
            for (int ch = 0; ch < channels; ++ch) {
                for (int t = ex.valid_len; t < t_len; ++t) {
                    act[static_cast<std::size_t>(ch) * t_len + t] = 0.0;
                }
            }
        };
        auto dyn_at = [&](int ic, int t) {
            return ex.dynamic[static_cast<std::size_t>(t) * config.dyn_channels + ic];
        };
        conv_forward(net.conv1, t_len, dyn_at, c.conv1_pre[e]);
        c.conv1_act[e].resize(c.conv1_pre[e].size());
        for (std::size_t i = 0; i < c.conv1_pre[e].size(); ++i) {
            c.conv1_act[e][i] = std::tanh(c.conv1_pre[e][i]);
        }
        mask_padding(c.conv1_act[e], net.conv1.out_channels);
        auto act1_at = [&](int ic, int t) {
            return c.conv1_act[e][static_cast<std::size_t>(ic) * t_len + t];
        };
        conv_forward(net.conv2, t_len, act1_at, c.conv2_pre[e]);
        c.conv2_act[e].resize(c.conv2_pre[e].size());
        for (std::size_t i = 0; i < c.conv2_pre[e].size(); ++i) {
            c.conv2_act[e][i] = std::tanh(c.conv2_pre[e][i]);
        }
        mask_padding(c.conv2_act[e], net.conv2.out_channels);
        c.pooled[e] =
            masked_average_pool(c.conv2_act[e], config.conv_channels, t_len, ex.valid_len);
    }

    // Static encoder.
    std::vector<std::vector<double>> static_inputs(b);
    for (std::size_t e = 0; e < b; ++e) {
        static_inputs[e] = batch[e].static_input;
    }
    dense_stage_forward(net.static1, net.bn_static1, static_inputs, mode, c.s1);
    dense_stage_forward(net.static2, net.bn_static2, c.s1.act, mode, c.s2);

    // Head over [g, pooled].
    c.concat.resize(b);
    for (std::size_t e = 0; e < b; ++e) {
        c.concat[e] = c.s2.act[e];
        c.concat[e].insert(c.concat[e].end(), c.pooled[e].begin(), c.pooled[e].end());
    }
    dense_stage_forward(net.head1, net.bn_head1, c.concat, mode, c.h1);
    dense_stage_forward(net.head2, net.bn_head2, c.h1.act, mode, c.h2);

    c.logits.resize(b);
    c.probabilities.resize(b);
    for (std::size_t e = 0; e < b; ++e) {
        c.logits[e] = linear_apply(net.output, c.h2.act[e])[0];
        c.probabilities[e] = sigmoid(c.logits[e]);
    }
    return c.probabilities;
}

double condip_loss(const std::vector<double> &probabilities, const std::vector<int> &labels,
                   double weight_low, double weight_high) {
    if (probabilities.size() != labels.size() || probabilities.empty()) {
        throw Error("condip_loss: size mismatch or empty");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        const double p = std::clamp(probabilities[i], 1e-12, 1.0 - 1e-12);
        const double w = labels[i] != 0 ? weight_high : weight_low;
        total += -w * (labels[i] != 0 ? std::log(p) : std::log(1.0 - p));
    }
    return total / static_cast<double>(probabilities.size());
}

void condip_backward(CondipNetwork &net, const CondipCache &cache,
                     const std::vector<int> &labels, double weight_low, double weight_high) {
    const std::size_t b = static_cast<std::size_t>(cache.batch_size);
    if (labels.size() != b) {
        throw Error("condip_backward: labels do not match cached batch");
    }
    const CondipConfig &config = net.config();
    net.zero_gradients();

    // d loss / d logit for the weighted mean BCE.
    std::vector<std::vector<double>> d_h2act(b);
    for (std::size_t e = 0; e < b; ++e) {
        const double w = labels[e] != 0 ? weight_high : weight_low;
        const double dz =
            w * (cache.probabilities[e] - (labels[e] != 0 ? 1.0 : 0.0)) / static_cast<double>(b);
        net.output.grad_bias[0] += dz;
        d_h2act[e].resize(static_cast<std::size_t>(net.output.in_dim));
        for (int i = 0; i < net.output.in_dim; ++i) {
            net.output.grad_weights[static_cast<std::size_t>(i)] +=
                dz * cache.h2.act[e][static_cast<std::size_t>(i)];
            d_h2act[e][static_cast<std::size_t>(i)] =
                dz * net.output.weights[static_cast<std::size_t>(i)];
        }
    }

    auto d_h1act =
        dense_stage_backward(net.head2, net.bn_head2, cache.h1.act, cache.h2, cache.mode, d_h2act);
    auto d_concat =
        dense_stage_backward(net.head1, net.bn_head1, cache.concat, cache.h1, cache.mode, d_h1act);

    // Split concat gradient into static-encoder part and pooled part.
    const std::size_t g_dim = static_cast<std::size_t>(config.static_hidden2);
    std::vector<std::vector<double>> d_s2act(b), d_pooled(b);
    for (std::size_t e = 0; e < b; ++e) {
        d_s2act[e].assign(d_concat[e].begin(), d_concat[e].begin() + static_cast<long>(g_dim));
        d_pooled[e].assign(d_concat[e].begin() + static_cast<long>(g_dim), d_concat[e].end());
    }

    auto d_s1act =
        dense_stage_backward(net.static2, net.bn_static2, cache.s1.act, cache.s2, cache.mode,
                             d_s2act);
    std::vector<std::vector<double>> static_inputs(b);
    for (std::size_t e = 0; e < b; ++e) {
        static_inputs[e] = cache.inputs[e].static_input;
    }
    dense_stage_backward(net.static1, net.bn_static1, static_inputs, cache.s1, cache.mode,
                         d_s1act);

    // Dynamic path.
    for (std::size_t e = 0; e < b; ++e) {
        const CondipExample &ex = cache.inputs[e];
        const int t_len = ex.t_len;
        const int channels = config.conv_channels;

        // Pool backward: each valid step shares the pooled gradient.
        std::vector<double> d_conv2_act(static_cast<std::size_t>(channels) * t_len, 0.0);
        if (ex.valid_len > 0) {
            for (int ch = 0; ch < channels; ++ch) {
                const double g = d_pooled[e][static_cast<std::size_t>(ch)] / ex.valid_len;
                for (int t = 0; t < ex.valid_len; ++t) {
                    d_conv2_act[static_cast<std::size_t>(ch) * t_len + t] = g;
                }
            }
        }
        std::vector<double> d_conv2_pre(d_conv2_act.size());
        for (std::size_t i = 0; i < d_conv2_act.size(); ++i) {
            const double a = cache.conv2_act[e][i];
            d_conv2_pre[i] = d_conv2_act[i] * (1.0 - a * a);
        }

        std::vector<double> d_conv1_act(
            static_cast<std::size_t>(net.conv1.out_channels) * t_len, 0.0);
        auto act1_at = [&](int ic, int t) {
            return cache.conv1_act[e][static_cast<std::size_t>(ic) * t_len + t];
        };
        conv_backward(net.conv2, t_len, act1_at, d_conv2_pre, [&](int ic, int t, double v) {
            d_conv1_act[static_cast<std::size_t>(ic) * t_len + t] += v;
        });

        // Masked padding steps are constants; no gradient flows through them.
        for (int ch = 0; ch < net.conv1.out_channels; ++ch) {
            for (int t = ex.valid_len; t < t_len; ++t) {
                d_conv1_act[static_cast<std::size_t>(ch) * t_len + t] = 0.0;
            }
        }
        std::vector<double> d_conv1_pre(d_conv1_act.size());
        for (std::size_t i = 0; i < d_conv1_act.size(); ++i) {
            const double a = cache.conv1_act[e][i];
            d_conv1_pre[i] = d_conv1_act[i] * (1.0 - a * a);
        }
        auto dyn_at = [&](int ic, int t) {
            return ex.dynamic[static_cast<std::size_t>(t) * config.dyn_channels + ic];
        };
        conv_backward(net.conv1, t_len, dyn_at, d_conv1_pre, [](int, int, double) {});
    }
}

TrainHistory condip_train(CondipNetwork &net, const std::vector<LabeledExample> &train,
                          const std::vector<LabeledExample> &validation,
                          const TrainConfig &config) {
    if (train.empty()) {
        throw DataError("condip_train: empty training set");
    }
    if (config.class_weight_low <= 0.0 || config.class_weight_high <= 0.0) {
        throw ConfigError("condip_train: class weights must be positive");
    }

    std::vector<CondipExample> train_x;
    std::vector<int> train_y;
    train_x.reserve(train.size());
    for (const LabeledExample &example : train) {
        train_x.push_back(to_condip_example(example.features));
        train_y.push_back(is_positive_label(example.label) ? 1 : 0);
    }
    std::vector<CondipExample> val_x;
    std::vector<int> val_y;
    for (const LabeledExample &example : validation) {
        val_x.push_back(to_condip_example(example.features));
        val_y.push_back(is_positive_label(example.label) ? 1 : 0);
    }

    TrainHistory history;
    double best_val = std::numeric_limits<double>::infinity();
    int epochs_since_best = 0;
    std::vector<std::vector<double>> best_params;

    const int batch_size = std::max(1, config.batch_size);
    std::vector<std::size_t> order(train_x.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(config.seed, "condip.shuffle",
                                    static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t seen = 0;
        CondipCache cache;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(batch_size));
            std::vector<CondipExample> batch;
            std::vector<int> labels;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(train_x[order[i]]);
                labels.push_back(train_y[order[i]]);
            }
            std::vector<double> probs = condip_forward(net, batch, RunMode::Train, &cache);
            const double loss =
                condip_loss(probs, labels, config.class_weight_low, config.class_weight_high);
            if (!std::isfinite(loss)) {
                throw TrainingDivergedError("condip_train: non-finite loss at epoch " +
                                            std::to_string(epoch));
            }
            condip_backward(net, cache, labels, config.class_weight_low,
                            config.class_weight_high);
            net.apply_gradients(config.learning_rate);
            epoch_loss += loss * static_cast<double>(end - start);
            seen += end - start;
        }
        history.train_loss.push_back(epoch_loss / static_cast<double>(seen));

        if (!val_x.empty()) {
            std::vector<double> val_probs = condip_forward(net, val_x, RunMode::Infer, nullptr);
            const double val_loss =
                condip_loss(val_probs, val_y, config.class_weight_low, config.class_weight_high);
            if (!std::isfinite(val_loss)) {
                throw TrainingDivergedError("condip_train: non-finite validation loss at epoch " +
                                            std::to_string(epoch));
            }
            history.val_loss.push_back(val_loss);
            if (val_loss < best_val) {
                best_val = val_loss;
                history.best_epoch = epoch;
                epochs_since_best = 0;
                best_params.clear();
                for (ParamRef &ref : net.parameters()) {
                    best_params.push_back(*ref.value);
                }
            } else if (++epochs_since_best >= config.early_stop_patience &&
                       config.early_stop_patience > 0) {
                history.stopped_early = true;
                break;
            }
        }
    }

    if (!best_params.empty()) {
        std::vector<ParamRef> refs = net.parameters();
        for (std::size_t i = 0; i < refs.size(); ++i) {
            *refs[i].value = best_params[i];
        }
    }
    return history;
}

double condip_predict(CondipNetwork &net, const SequenceFeatures &features) {
    std::vector<CondipExample> batch{to_condip_example(features)};
    return condip_forward(net, batch, RunMode::Infer, nullptr)[0];
}

} // namespace callplan

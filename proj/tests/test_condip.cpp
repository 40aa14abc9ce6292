#include <doctest.h>

#include "callplan/condip.hpp"
#include "callplan/error.hpp"
#include "callplan/model_io.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace callplan;
using namespace callplan::testutil;

TEST_CASE("masked average pool matches the worked example") {
    // f[i][j]: feature 0 over time {1,3}; feature 1 over time {2,4}; T = 2.
    std::vector<double> activations{1.0, 3.0, 2.0, 4.0}; // channel-major, t_len 2
    auto pooled = masked_average_pool(activations, 2, 2, 2);
    REQUIRE(pooled.size() == 2);
    CHECK(pooled[0] == 2.0);
    CHECK(pooled[1] == 3.0);
}

TEST_CASE("masked average pool divides by the valid length only") {
    // Same two valid steps embedded in a longer padded map.
    std::vector<double> activations{1.0, 3.0, 9.0, 9.0, 2.0, 4.0, 9.0, 9.0}; // t_len 4
    auto pooled = masked_average_pool(activations, 2, 4, 2);
    CHECK(pooled[0] == 2.0);
    CHECK(pooled[1] == 3.0);

    auto empty = masked_average_pool(activations, 2, 4, 0);
    CHECK(empty[0] == 0.0);
    CHECK(empty[1] == 0.0);
}

TEST_CASE("all-zero parameters produce probability one half") {
    CondipConfig config = reduced_condip_config();
    CondipNetwork net(config, 3);
    for (ParamRef &ref : net.parameters()) {
        std::fill(ref.value->begin(), ref.value->end(), 0.0);
    }
    Rng rng(5);
    auto batch = random_batch(config, 4, rng);
    auto probs = condip_forward(net, batch, RunMode::Infer, nullptr);
    for (double p : probs) {
        CHECK(p == doctest::Approx(0.5));
    }
}

TEST_CASE("appending zero padding never changes the forward pass") {
    CondipConfig config = reduced_condip_config();
    CondipNetwork net(config, 11);
    Rng rng(6);
    auto batch = random_batch(config, 3, rng);
    auto base = condip_forward(net, batch, RunMode::Infer, nullptr);

    auto padded = batch;
    for (CondipExample &example : padded) {
        example.dynamic.resize(example.dynamic.size() +
                                   4 * static_cast<std::size_t>(config.dyn_channels),
                               0.0);
        example.t_len += 4;
    }
    auto with_padding = condip_forward(net, padded, RunMode::Infer, nullptr);
    for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK(base[i] == with_padding[i]); // bitwise
    }
}

TEST_CASE("train and infer probabilities match after a warm-up pass") {
    CondipConfig config = reduced_condip_config();
    CondipNetwork net(config, 17);
    Rng rng(8);
    auto batch = random_batch(config, 6, rng);

    // First train-mode pass initializes running statistics to batch stats.
    auto train_first = condip_forward(net, batch, RunMode::Train, nullptr);
    auto train_again = condip_forward(net, batch, RunMode::Train, nullptr);
    auto infer = condip_forward(net, batch, RunMode::Infer, nullptr);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        CHECK(train_first[i] == doctest::Approx(infer[i]).epsilon(1e-6));
        CHECK(train_again[i] == doctest::Approx(infer[i]).epsilon(1e-6));
    }
}

TEST_CASE("batch norm train mode normalizes to zero mean unit variance") {
    CondipConfig config = reduced_condip_config();
    CondipNetwork net(config, 23);
    Rng rng(9);
    auto batch = random_batch(config, 16, rng);
    CondipCache cache;
    condip_forward(net, batch, RunMode::Train, &cache);

    auto check_stage = [&](const CondipCache::DenseStage &stage) {
        const std::size_t dim = stage.normalized.front().size();
        for (std::size_t j = 0; j < dim; ++j) {
            double mean = 0.0;
            for (std::size_t e = 0; e < batch.size(); ++e) {
                mean += stage.normalized[e][j];
            }
            mean /= static_cast<double>(batch.size());
            double var = 0.0;
            for (std::size_t e = 0; e < batch.size(); ++e) {
                var += (stage.normalized[e][j] - mean) * (stage.normalized[e][j] - mean);
            }
            var /= static_cast<double>(batch.size());
            CHECK(std::fabs(mean) < 1e-6);
            CHECK(std::fabs(var - 1.0) < 1e-5);
        }
    };
    check_stage(cache.s1);
    check_stage(cache.s2);
    check_stage(cache.h1);
    check_stage(cache.h2);
}

TEST_CASE("analytic gradients match central finite differences") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        CondipConfig config = reduced_condip_config();
        CondipNetwork net(config, derive_seed(seed, "gradcheck.net"));
        Rng rng(derive_seed(seed, "gradcheck.data"));
        auto batch = random_batch(config, 16, rng);
        std::vector<int> labels;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            labels.push_back(rng.bernoulli(0.5) ? 1 : 0);
        }
        auto result = gradient_check(net, batch, labels, 0.7, 1.3);
        // Relative error 1e-4 per parameter, with a 1e-6 absolute allowance
        // for finite-difference noise on near-zero gradients.
        CHECK(result.worst_param_mixed <= 1.0);
        for (const auto &[group, rel] : result.group_rel) {
            INFO("group ", group);
            CHECK(rel < 1e-4);
        }
    }
}

TEST_CASE("zero class weight on the true class zeroes loss and gradients") {
    CondipConfig config = reduced_condip_config();
    CondipNetwork net(config, 31);
    Rng rng(12);
    auto batch = random_batch(config, 4, rng);
    std::vector<int> labels(batch.size(), 1); // all positive

    CondipCache cache;
    auto probs = condip_forward(net, batch, RunMode::Train, &cache);
    CHECK(condip_loss(probs, labels, 1.0, 0.0) == 0.0);
    condip_backward(net, cache, labels, 1.0, 0.0);
    for (ParamRef &ref : net.parameters()) {
        for (double g : *ref.grad) {
            CHECK(g == 0.0);
        }
    }
}

TEST_CASE("doubling the class weight doubles loss and gradients exactly") {
    CondipConfig config = reduced_condip_config();
    CondipNetwork net(config, 37);
    Rng rng(13);
    auto batch = random_batch(config, 5, rng);
    std::vector<int> labels{1, 0, 1, 1, 0};

    CondipCache cache;
    auto probs = condip_forward(net, batch, RunMode::Train, &cache);
    const double loss_once = condip_loss(probs, labels, 1.0, 1.3);
    const double loss_twice = condip_loss(probs, labels, 2.0, 2.6);
    CHECK(loss_twice == doctest::Approx(2.0 * loss_once).epsilon(1e-12));

    condip_backward(net, cache, labels, 1.0, 1.3);
    std::vector<std::vector<double>> grads_once;
    for (ParamRef &ref : net.parameters()) {
        grads_once.push_back(*ref.grad);
    }
    condip_backward(net, cache, labels, 2.0, 2.6);
    std::vector<ParamRef> refs = net.parameters();
    for (std::size_t r = 0; r < refs.size(); ++r) {
        for (std::size_t i = 0; i < refs[r].grad->size(); ++i) {
            CHECK((*refs[r].grad)[i] == doctest::Approx(2.0 * grads_once[r][i]).epsilon(1e-12));
        }
    }
}

namespace {

std::vector<LabeledExample> toy_examples(int n, std::uint64_t seed) {
    // Positive class: strong scalar signal; negative: the opposite.
    std::vector<LabeledExample> examples;
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        const bool positive = i % 2 == 0;
        LabeledExample example;
        example.beneficiary_id = i;
        example.label = positive ? EngagementLabel::ShortTermHighRisk
                                 : EngagementLabel::ShortTermLowRisk;
        example.features.static_features.assign(16, 0.0);
        for (double &v : example.features.static_features) {
            v = rng.uniform(-0.2, 0.2) + (positive ? 0.8 : -0.8);
        }
        example.features.dynamic.rows.assign(kMaxCallsPerWindow, {});
        example.features.dynamic.valid_len = 4;
        for (int t = 0; t < 4; ++t) {
            example.features.dynamic.rows[static_cast<std::size_t>(t)] = {
                positive ? 0.1 : 0.9, 1.0, positive ? 0.0 : 1.0, t / 7.0, 1.0};
        }
        example.features.scalar_calls = {8, positive ? 2.0 : 7.0, positive ? 0.0 : 6.0,
                                         1,  positive ? 14.0 : 2.0, positive ? 29.0 : 2.0};
        examples.push_back(std::move(example));
    }
    return examples;
}

} // namespace

TEST_CASE("training is deterministic and learning rate zero is a no-op") {
    auto examples = toy_examples(64, 91);
    std::vector<LabeledExample> train(examples.begin(), examples.begin() + 48);
    std::vector<LabeledExample> val(examples.begin() + 48, examples.end());

    CondipConfig config = reduced_condip_config();
    config.dyn_channels = kDynamicChannels;
    config.t_max = kMaxCallsPerWindow;
    config.static_dim = 22;

    TrainConfig train_config;
    train_config.epochs = 6;
    train_config.batch_size = 16;
    train_config.learning_rate = 0.05;
    train_config.class_weight_high = 1.0;
    train_config.seed = 7;

    CondipNetwork net_a(config, 7);
    TrainHistory history_a = condip_train(net_a, train, val, train_config);
    CondipNetwork net_b(config, 7);
    TrainHistory history_b = condip_train(net_b, train, val, train_config);
    REQUIRE(history_a.train_loss.size() == history_b.train_loss.size());
    for (std::size_t e = 0; e < history_a.train_loss.size(); ++e) {
        CHECK(history_a.train_loss[e] == history_b.train_loss[e]); // bit-identical
        CHECK(history_a.val_loss[e] == history_b.val_loss[e]);
    }
    CHECK(history_a.train_loss.back() < history_a.train_loss.front());

    // learning_rate 0: parameters unchanged.
    CondipNetwork frozen(config, 7);
    std::vector<std::vector<double>> before;
    for (ParamRef &ref : frozen.parameters()) {
        before.push_back(*ref.value);
    }
    TrainConfig zero_lr = train_config;
    zero_lr.learning_rate = 0.0;
    zero_lr.epochs = 3;
    condip_train(frozen, train, {}, zero_lr);
    std::vector<ParamRef> refs = frozen.parameters();
    for (std::size_t r = 0; r < refs.size(); ++r) {
        for (std::size_t i = 0; i < refs[r].value->size(); ++i) {
            CHECK((*refs[r].value)[i] == before[r][i]);
        }
    }
}

TEST_CASE("training aborts with a diagnostic when the loss goes non-finite") {
    auto examples = toy_examples(16, 17);
    CondipConfig config = reduced_condip_config();
    config.dyn_channels = kDynamicChannels;
    config.t_max = kMaxCallsPerWindow;
    config.static_dim = 22;
    CondipNetwork net(config, 3);
    net.static1.weights[0] = std::numeric_limits<double>::quiet_NaN();
    TrainConfig train_config;
    train_config.epochs = 1;
    CHECK_THROWS_AS(condip_train(net, examples, {}, train_config), TrainingDivergedError);
}

TEST_CASE("condip model serialization round-trips bit-exactly") {
    auto examples = toy_examples(32, 21);
    CondipConfig config = reduced_condip_config();
    config.dyn_channels = kDynamicChannels;
    config.t_max = kMaxCallsPerWindow;
    config.static_dim = 22;

    Model model;
    model.kind = Model::Kind::Condip;
    model.task = Task::ShortTerm;
    model.seed = 5;
    model.condip_config = config;
    model.condip = CondipNetwork(config, 5);
    model.condip_train_config.epochs = 3;
    model.condip_train_config.class_weight_high = 1.0;
    condip_train(model.condip, examples, {}, model.condip_train_config);

    const std::string text = model_to_json(model, "prov");
    Model loaded = model_from_json(text);
    REQUIRE(loaded.kind == Model::Kind::Condip);

    auto batch_example = examples.front().features;
    CHECK(condip_predict(loaded.condip, batch_example) ==
          condip_predict(model.condip, batch_example));
    CHECK(model_to_json(loaded, "prov") == text);
}

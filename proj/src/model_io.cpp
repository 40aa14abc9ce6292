#include "callplan/model_io.hpp"

#include "callplan/error.hpp"

#include <json.hpp>

#include <fstream>

namespace callplan {

using nlohmann::json;

namespace {

constexpr int kModelFormatVersion = 1;

json linear_to_json(const LinearLayer &layer) {
    return json{{"in", layer.in_dim},
                {"out", layer.out_dim},
                {"weights", layer.weights},
                {"bias", layer.bias}};
}

void linear_from_json(const json &j, LinearLayer &layer) {
    layer.in_dim = j.at("in").get<int>();
    layer.out_dim = j.at("out").get<int>();
    layer.weights = j.at("weights").get<std::vector<double>>();
    layer.bias = j.at("bias").get<std::vector<double>>();
    layer.grad_weights.assign(layer.weights.size(), 0.0);
    layer.grad_bias.assign(layer.bias.size(), 0.0);
}

json conv_to_json(const Conv1dLayer &layer) {
    return json{{"in_channels", layer.in_channels},
                {"out_channels", layer.out_channels},
                {"width", layer.width},
                {"kernels", layer.kernels},
                {"bias", layer.bias}};
}

void conv_from_json(const json &j, Conv1dLayer &layer) {
    layer.in_channels = j.at("in_channels").get<int>();
    layer.out_channels = j.at("out_channels").get<int>();
    layer.width = j.at("width").get<int>();
    layer.kernels = j.at("kernels").get<std::vector<double>>();
    layer.bias = j.at("bias").get<std::vector<double>>();
    layer.grad_kernels.assign(layer.kernels.size(), 0.0);
    layer.grad_bias.assign(layer.bias.size(), 0.0);
}

json bn_to_json(const BatchNormLayer &layer) {
    return json{{"dim", layer.dim},           {"eps", layer.eps},
                {"momentum", layer.momentum}, {"scale", layer.scale},
                {"shift", layer.shift},       {"running_mean", layer.running_mean},
                {"running_var", layer.running_var}, {"initialized", layer.initialized}};
}

void bn_from_json(const json &j, BatchNormLayer &layer) {
    layer.dim = j.at("dim").get<int>();
    layer.eps = j.at("eps").get<double>();
    layer.momentum = j.at("momentum").get<double>();
    layer.scale = j.at("scale").get<std::vector<double>>();
    layer.shift = j.at("shift").get<std::vector<double>>();
    layer.running_mean = j.at("running_mean").get<std::vector<double>>();
    layer.running_var = j.at("running_var").get<std::vector<double>>();
    layer.initialized = j.at("initialized").get<bool>();
    layer.grad_scale.assign(layer.scale.size(), 0.0);
    layer.grad_shift.assign(layer.shift.size(), 0.0);
}

json condip_config_to_json(const CondipConfig &c) {
    return json{{"t_max", c.t_max},
                {"dyn_channels", c.dyn_channels},
                {"static_dim", c.static_dim},
                {"conv_channels", c.conv_channels},
                {"kernel_width", c.kernel_width},
                {"static_hidden1", c.static_hidden1},
                {"static_hidden2", c.static_hidden2},
                {"head_hidden", c.head_hidden},
                {"bn_eps", c.bn_eps},
                {"bn_momentum", c.bn_momentum}};
}

CondipConfig condip_config_from_json(const json &j) {
    CondipConfig c;
    c.t_max = j.at("t_max").get<int>();
    c.dyn_channels = j.at("dyn_channels").get<int>();
    c.static_dim = j.at("static_dim").get<int>();
    c.conv_channels = j.at("conv_channels").get<int>();
    c.kernel_width = j.at("kernel_width").get<int>();
    c.static_hidden1 = j.at("static_hidden1").get<int>();
    c.static_hidden2 = j.at("static_hidden2").get<int>();
    c.head_hidden = j.at("head_hidden").get<int>();
    c.bn_eps = j.at("bn_eps").get<double>();
    c.bn_momentum = j.at("bn_momentum").get<double>();
    return c;
}

json tree_to_json(const DecisionTree &tree) {
    json nodes = json::array();
    for (const TreeNode &n : tree.nodes()) {
        nodes.push_back(json::array({n.feature, n.threshold, n.left, n.right, n.n_pos, n.n_neg}));
    }
    return nodes;
}

DecisionTree tree_from_json(const json &j) {
    DecisionTree tree;
    for (const json &n : j) {
        tree.nodes_.push_back(TreeNode{n.at(0).get<int>(), n.at(1).get<double>(),
                                       n.at(2).get<int>(), n.at(3).get<int>(),
                                       n.at(4).get<long>(), n.at(5).get<long>()});
    }
    return tree;
}

json mdp_to_json(const MdpParams &params) {
    json rows = json::array();
    for (int s = 0; s < 2; ++s) {
        for (int a = 0; a < 2; ++a) {
            rows.push_back(json::array({params.p[s][a][0], params.p[s][a][1]}));
        }
    }
    return json{{"rows", rows}, {"discount", params.discount}};
}

MdpParams mdp_from_json(const json &j) {
    MdpParams params;
    const json &rows = j.at("rows");
    int i = 0;
    for (int s = 0; s < 2; ++s) {
        for (int a = 0; a < 2; ++a, ++i) {
            params.p[s][a][0] = rows.at(static_cast<std::size_t>(i)).at(0).get<double>();
            params.p[s][a][1] = rows.at(static_cast<std::size_t>(i)).at(1).get<double>();
        }
    }
    params.discount = j.at("discount").get<double>();
    return params;
}

} // namespace

std::string model_to_json(const Model &model, const std::string &provenance) {
    json j;
    j["format"] = "callplan-model";
    j["version"] = kModelFormatVersion;
    j["provenance"] = provenance;
    j["kind"] = Model::kind_name(model.kind);
    j["task"] = task_name(model.task);
    j["seed"] = model.seed;
    switch (model.kind) {
    case Model::Kind::Rule:
        j["rule"] = json{{"e2c_threshold", model.rule.e2c_threshold},
                         {"window_days", model.rule.window_days}};
        break;
    case Model::Kind::Forest: {
        j["forest_config"] = json{{"n_trees", model.forest_config.n_trees},
                                  {"max_depth", model.forest_config.max_depth},
                                  {"min_samples_split", model.forest_config.min_samples_split},
                                  {"features_per_split", model.forest_config.features_per_split},
                                  {"seed", model.forest_config.seed}};
        json trees = json::array();
        for (const DecisionTree &tree : model.forest.trees()) {
            trees.push_back(tree_to_json(tree));
        }
        j["trees"] = trees;
        break;
    }
    case Model::Kind::Condip: {
        j["condip_config"] = condip_config_to_json(model.condip_config);
        j["train_config"] = json{{"epochs", model.condip_train_config.epochs},
                                 {"batch_size", model.condip_train_config.batch_size},
                                 {"learning_rate", model.condip_train_config.learning_rate},
                                 {"class_weight_low", model.condip_train_config.class_weight_low},
                                 {"class_weight_high", model.condip_train_config.class_weight_high},
                                 {"seed", model.condip_train_config.seed},
                                 {"early_stop_patience",
                                  model.condip_train_config.early_stop_patience}};
        const CondipNetwork &net = model.condip;
        j["layers"] = json{{"conv1", conv_to_json(net.conv1)},
                           {"conv2", conv_to_json(net.conv2)},
                           {"static1", linear_to_json(net.static1)},
                           {"static2", linear_to_json(net.static2)},
                           {"head1", linear_to_json(net.head1)},
                           {"head2", linear_to_json(net.head2)},
                           {"output", linear_to_json(net.output)},
                           {"bn_static1", bn_to_json(net.bn_static1)},
                           {"bn_static2", bn_to_json(net.bn_static2)},
                           {"bn_head1", bn_to_json(net.bn_head1)},
                           {"bn_head2", bn_to_json(net.bn_head2)}};
        break;
    }
    }
    return j.dump(2);
}

Model model_from_json(const std::string &text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception &e) {
        throw DataError(std::string("model: invalid JSON: ") + e.what());
    }
    try {
        if (j.value("format", "") != "callplan-model") {
            throw DataError("model: not a callplan model file");
        }
        if (j.at("version").get<int>() != kModelFormatVersion) {
            throw DataError("model: unsupported version");
        }
        Model model;
        model.kind = Model::parse_kind(j.at("kind").get<std::string>());
        const auto task = parse_task(j.at("task").get<std::string>());
        if (!task) {
            throw DataError("model: bad task");
        }
        model.task = *task;
        model.seed = j.at("seed").get<std::uint64_t>();
        switch (model.kind) {
        case Model::Kind::Rule:
            model.rule.e2c_threshold = j.at("rule").at("e2c_threshold").get<double>();
            model.rule.window_days = j.at("rule").at("window_days").get<int>();
            break;
        case Model::Kind::Forest: {
            const json &fc = j.at("forest_config");
            model.forest_config.n_trees = fc.at("n_trees").get<int>();
            model.forest_config.max_depth = fc.at("max_depth").get<int>();
            model.forest_config.min_samples_split = fc.at("min_samples_split").get<int>();
            model.forest_config.features_per_split = fc.at("features_per_split").get<int>();
            model.forest_config.seed = fc.at("seed").get<std::uint64_t>();
            std::vector<DecisionTree> trees;
            for (const json &tree : j.at("trees")) {
                trees.push_back(tree_from_json(tree));
            }
            model.forest = RandomForest(model.forest_config, std::move(trees));
            break;
        }
        case Model::Kind::Condip: {
            model.condip_config = condip_config_from_json(j.at("condip_config"));
            const json &tc = j.at("train_config");
            model.condip_train_config.epochs = tc.at("epochs").get<int>();
            model.condip_train_config.batch_size = tc.at("batch_size").get<int>();
            model.condip_train_config.learning_rate = tc.at("learning_rate").get<double>();
            model.condip_train_config.class_weight_low = tc.at("class_weight_low").get<double>();
            model.condip_train_config.class_weight_high =
                tc.at("class_weight_high").get<double>();
            model.condip_train_config.seed = tc.at("seed").get<std::uint64_t>();
            model.condip_train_config.early_stop_patience =
                tc.at("early_stop_patience").get<int>();
            model.condip = CondipNetwork(model.condip_config, model.seed);
            const json &layers = j.at("layers");
            conv_from_json(layers.at("conv1"), model.condip.conv1);
            conv_from_json(layers.at("conv2"), model.condip.conv2);
            linear_from_json(layers.at("static1"), model.condip.static1);
            linear_from_json(layers.at("static2"), model.condip.static2);
            linear_from_json(layers.at("head1"), model.condip.head1);
            linear_from_json(layers.at("head2"), model.condip.head2);
            linear_from_json(layers.at("output"), model.condip.output);
            bn_from_json(layers.at("bn_static1"), model.condip.bn_static1);
            bn_from_json(layers.at("bn_static2"), model.condip.bn_static2);
            bn_from_json(layers.at("bn_head1"), model.condip.bn_head1);
            bn_from_json(layers.at("bn_head2"), model.condip.bn_head2);
            break;
        }
        }
        return model;
    } catch (const json::exception &e) {
        throw DataError(std::string("model: bad field: ") + e.what());
    }
}

void save_model(const std::filesystem::path &path, const Model &model,
                const std::string &provenance) {
    write_text_file(path, model_to_json(model, provenance));
}

Model load_model(const std::filesystem::path &path) {
    return model_from_json(read_text_file(path));
}

std::string cluster_model_to_json(const ClusterModel &model, const std::string &provenance) {
    json j;
    j["format"] = "callplan-cluster-model";
    j["version"] = kModelFormatVersion;
    j["provenance"] = provenance;
    j["config"] = json{{"grouping",
                        json{{"by_education", model.config.grouping.by_education},
                             {"by_income", model.config.grouping.by_income},
                             {"by_phone_owner", model.config.grouping.by_phone_owner},
                             {"by_age_bucket", model.config.grouping.by_age_bucket},
                             {"age_bucket_years", model.config.grouping.age_bucket_years}}},
                       {"n_clusters", model.config.n_clusters},
                       {"alpha", model.config.alpha},
                       {"discount", model.config.discount},
                       {"whittle_tol", model.config.whittle_tol},
                       {"vi_tol", model.config.vi_tol},
                       {"seed", model.config.seed}};
    j["centroids"] = model.centroids;
    json params = json::array();
    for (const MdpParams &p : model.cluster_params) {
        params.push_back(mdp_to_json(p));
    }
    j["cluster_params"] = params;
    json whittle = json::array();
    for (const auto &w : model.whittle) {
        whittle.push_back(json::array({w[0], w[1]}));
    }
    j["whittle"] = whittle;
    j["whittle_warning"] = model.whittle_warning;
    json groups = json::array();
    for (const auto &[key, cluster] : model.group_to_cluster) {
        groups.push_back(json::array({key, cluster}));
    }
    j["group_to_cluster"] = groups;
    j["fallback_cluster"] = model.fallback_cluster;
    return j.dump(2);
}

ClusterModel cluster_model_from_json(const std::string &text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception &e) {
        throw DataError(std::string("cluster model: invalid JSON: ") + e.what());
    }
    try {
        if (j.value("format", "") != "callplan-cluster-model") {
            throw DataError("cluster model: wrong format tag");
        }
        ClusterModel model;
        const json &c = j.at("config");
        const json &g = c.at("grouping");
        model.config.grouping.by_education = g.at("by_education").get<bool>();
        model.config.grouping.by_income = g.at("by_income").get<bool>();
        model.config.grouping.by_phone_owner = g.at("by_phone_owner").get<bool>();
        model.config.grouping.by_age_bucket = g.at("by_age_bucket").get<bool>();
        model.config.grouping.age_bucket_years = g.at("age_bucket_years").get<int>();
        model.config.n_clusters = c.at("n_clusters").get<int>();
        model.config.alpha = c.at("alpha").get<double>();
        model.config.discount = c.at("discount").get<double>();
        model.config.whittle_tol = c.at("whittle_tol").get<double>();
        model.config.vi_tol = c.at("vi_tol").get<double>();
        model.config.seed = c.at("seed").get<std::uint64_t>();
        model.centroids = j.at("centroids").get<std::vector<std::vector<double>>>();
        for (const json &p : j.at("cluster_params")) {
            model.cluster_params.push_back(mdp_from_json(p));
        }
        for (const json &w : j.at("whittle")) {
            model.whittle.push_back({w.at(0).get<double>(), w.at(1).get<double>()});
        }
        model.whittle_warning = j.at("whittle_warning").get<std::vector<bool>>();
        for (const json &pair : j.at("group_to_cluster")) {
            model.group_to_cluster[pair.at(0).get<long>()] = pair.at(1).get<int>();
        }
        model.fallback_cluster = j.at("fallback_cluster").get<int>();
        return model;
    } catch (const json::exception &e) {
        throw DataError(std::string("cluster model: bad field: ") + e.what());
    }
}

void save_cluster_model(const std::filesystem::path &path, const ClusterModel &model,
                        const std::string &provenance) {
    write_text_file(path, cluster_model_to_json(model, provenance));
}

ClusterModel load_cluster_model(const std::filesystem::path &path) {
    return cluster_model_from_json(read_text_file(path));
}

std::string metric_report_to_json(const MetricReport &report, const std::string &provenance) {
    json j;
    j["provenance"] = provenance;
    j["confusion"] = json{{"tp", report.tp}, {"fp", report.fp}, {"fn", report.fn},
                          {"tn", report.tn}};
    j["accuracy"] = report.accuracy;
    j["precision"] = report.precision; // NaN serializes as null
    j["recall"] = report.recall;
    j["f1"] = report.f1;
    j["auc"] = report.auc;
    j["n_roc_points"] = report.roc_points.size();
    return j.dump(2);
}

std::string ground_truth_to_json(const Cohort &cohort, const std::string &provenance) {
    json j;
    j["provenance"] = provenance;
    j["registration_date"] = format_date(cohort.registration_date);
    json archetypes = json::array();
    for (const ArchetypeSpec &a : cohort.archetypes) {
        json behavior = mdp_to_json(a.behavior);
        archetypes.push_back(json{{"name", a.name},
                                  {"behavior", behavior},
                                  {"connection_prob", a.connection_prob},
                                  {"initial_engaging_prob", a.initial_engaging_prob},
                                  {"weight", a.weight}});
    }
    j["archetypes"] = archetypes;
    json members = json::array();
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        members.push_back(
            json::array({cohort.profiles[i].beneficiary_id, cohort.archetype[i]}));
    }
    j["memberships"] = members;
    return j.dump();
}

std::string psqis_result_to_json(const PsqisResult &result, const std::string &provenance) {
    json j;
    j["provenance"] = provenance;
    json arms = json::array();
    for (int a = 0; a < 4; ++a) {
        const auto i = static_cast<std::size_t>(a);
        arms.push_back(json{{"arm", arm_name(static_cast<Arm>(a))},
                            {"size", result.arm_sizes[i]},
                            {"evaluable", result.evaluable[i]},
                            {"high_engagement", result.high_engagement[i]},
                            {"high_engagement_pct", result.high_engagement_pct[i]}});
    }
    j["arms"] = arms;
    return j.dump(2);
}

std::string policy_eval_to_json(const std::vector<PolicyEvalRow> &rows,
                                const std::string &provenance) {
    json j;
    j["provenance"] = provenance;
    json table = json::array();
    for (const PolicyEvalRow &row : rows) {
        table.push_back(json{{"policy", plan_policy_name(row.policy)},
                             {"call_mean", row.call_mean},
                             {"call_std", row.call_std},
                             {"control_mean", row.control_mean},
                             {"control_std", row.control_std},
                             {"call_samples", row.call_samples},
                             {"control_samples", row.control_samples}});
    }
    j["policies"] = table;
    return j.dump(2);
}

void write_text_file(const std::filesystem::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw DataError("failed writing " + path.string());
    }
}

std::string read_text_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

} // namespace callplan

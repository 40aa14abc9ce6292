#include "callplan/error.hpp"
#include "callplan/metrics.hpp"
#include "callplan/model_io.hpp"
#include "callplan/pipeline.hpp"
#include "callplan/scenario.hpp"
#include "callplan/sim.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace callplan;

namespace {

// Exit codes: 0 success, 1 I/O or data error, 2 configuration error.
constexpr int kExitData = 1;
constexpr int kExitConfig = 2;

struct GlobalOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
    bool strict = false;
};

Scenario resolve_scenario(const GlobalOptions &options) {
    Scenario scenario =
        options.config_path.empty() ? default_scenario() : load_scenario(options.config_path);
    if (options.seed) {
        apply_root_seed(scenario, *options.seed);
    }
    return scenario;
}

std::string scenario_provenance(const Scenario &scenario) {
    return provenance_line(scenario.seed, scenario_to_json(scenario));
}

void warn_on_bracket(const ClusterModel &model) {
    long warned = 0;
    for (bool w : model.whittle_warning) {
        warned += w ? 1 : 0;
    }
    if (warned > 0) {
        std::cerr << "warning: " << warned
                  << " cluster(s) had no active/passive crossing inside the subsidy bracket; "
                     "boundary value used (indexability is unproven)\n";
    }
}

fs::path ensure_out_dir(const GlobalOptions &options) {
    fs::path dir(options.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
    }
    return dir;
}

struct LoadedData {
    std::vector<BeneficiaryProfile> profiles;
    std::map<BeneficiaryId, CallHistory> histories;
    std::vector<CallRecord> calls;
    std::vector<InterventionRecord> interventions;
};

void report_issues(const std::vector<CsvIssue> &issues, bool strict) {
    for (const CsvIssue &issue : issues) {
        std::cerr << (strict ? "error: " : "warning: ") << issue.to_string() << "\n";
    }
    if (strict && !issues.empty()) {
        throw DataError(std::to_string(issues.size()) + " rejected row(s) with --strict");
    }
}

LoadedData load_data(const std::string &dir, bool strict, bool need_interventions) {
    LoadedData data;
    auto beneficiaries = load_beneficiaries(fs::path(dir) / "beneficiaries.csv");
    report_issues(beneficiaries.issues, strict);
    data.profiles = std::move(beneficiaries.rows);

    auto calls = load_calls(fs::path(dir) / "calls.csv");
    report_issues(calls.issues, strict);
    data.calls = std::move(calls.rows);
    data.histories = build_histories(data.calls);

    const fs::path interventions_path = fs::path(dir) / "interventions.csv";
    if (need_interventions || fs::exists(interventions_path)) {
        auto interventions = load_interventions(interventions_path);
        report_issues(interventions.issues, strict);
        data.interventions = std::move(interventions.rows);
    }
    return data;
}

std::vector<LabeledExample> build_examples(const LoadedData &data, Task task,
                                           std::uint64_t seed) {
    FeatureConfig config;
    if (task == Task::LongTerm) {
        config.gap_sentinel_days = kLongTermFeatureDays + 1;
    }
    return task == Task::ShortTerm
               ? build_short_term_examples(data.profiles, data.histories, seed, config)
               : build_long_term_examples(data.profiles, data.histories, config);
}

// ---------------------------------------------------------------------------
// generate / simulate
// ---------------------------------------------------------------------------

void write_dataset(const fs::path &dir, const Cohort &cohort, const SimOutcome &outcome,
                   const std::string &provenance) {
    write_beneficiaries(dir / "beneficiaries.csv", cohort.profiles, provenance);
    write_calls(dir / "calls.csv", outcome.calls, provenance);
    write_interventions(dir / "interventions.csv", outcome.interventions, provenance);
    write_text_file(dir / "ground_truth.json", ground_truth_to_json(cohort, provenance));
}

int cmd_generate(const GlobalOptions &options, int n_override) {
    Scenario scenario = resolve_scenario(options);
    if (n_override > 0) {
        scenario.cohort.n_beneficiaries = n_override;
    }
    const fs::path dir = ensure_out_dir(options);
    const Cohort cohort = generate_cohort(scenario.cohort);

    // Random call interventions so the transition data covers both actions.
    const int months = (scenario.cohort.weeks * 7 + 29) / 30;
    std::vector<PlannedIntervention> planned;
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        Rng rng(derive_seed(scenario.seed, "generate.interventions",
                            static_cast<std::uint64_t>(i)));
        for (int m = 0; m < months; ++m) {
            if (rng.bernoulli(scenario.train_intervention_prob)) {
                planned.push_back(PlannedIntervention{i, m, InterventionKind::Call});
            }
        }
    }
    const SimOutcome outcome =
        simulate_program(cohort, scenario.sim, derive_seed(scenario.seed, "generate.sim"),
                         scenario.cohort.weeks, planned);
    write_dataset(dir, cohort, outcome, scenario_provenance(scenario));
    std::cout << "generated " << cohort.size() << " beneficiaries, " << outcome.calls.size()
              << " call records, " << outcome.interventions.size() << " interventions -> "
              << dir.string() << "\n";
    return 0;
}

int cmd_simulate(const GlobalOptions &options) {
    Scenario scenario = resolve_scenario(options);
    const fs::path dir = ensure_out_dir(options);
    const Cohort cohort = generate_cohort(scenario.cohort);
    const PsqisResult result = run_psqis(cohort, scenario.sim, scenario.psqis);

    const std::string provenance = scenario_provenance(scenario);
    write_dataset(dir, cohort, result.outcome, provenance);
    write_text_file(dir / "psqis.json", psqis_result_to_json(result, provenance));
    for (int a = 0; a < 4; ++a) {
        std::printf("%-8s n=%-5ld high-engagement %.1f%%\n", arm_name(static_cast<Arm>(a)),
                    result.arm_sizes[static_cast<std::size_t>(a)],
                    result.high_engagement_pct[static_cast<std::size_t>(a)]);
    }
    std::cout << "wrote " << (dir / "psqis.json").string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// featurize
// ---------------------------------------------------------------------------

int cmd_featurize(const GlobalOptions &options, const std::string &data_dir,
                  const std::string &task_name_arg) {
    Scenario scenario = resolve_scenario(options);
    const auto task = parse_task(task_name_arg);
    if (!task) {
        throw ConfigError("featurize: unknown task '" + task_name_arg + "' (short|long)");
    }
    const fs::path dir = ensure_out_dir(options);
    LoadedData data = load_data(data_dir, options.strict, false);
    const auto examples =
        build_examples(data, *task, derive_seed(scenario.seed, "featurize.anchors"));
    if (examples.empty()) {
        throw DataError("featurize: no examples could be built from " + data_dir);
    }

    std::vector<std::string> header{"beneficiary_id", "feature_end", "label"};
    const std::size_t n_static = examples.front().features.static_features.size();
    for (std::size_t i = 0; i < n_static; ++i) {
        header.push_back("static_" + std::to_string(i));
    }
    for (const char *name :
         {"attempts", "connections", "engagements", "days_since_attempt",
          "days_since_connection", "days_since_engagement"}) {
        header.push_back(std::string("calls_") + name);
    }
    for (int t = 0; t < kMaxCallsPerWindow; ++t) {
        for (int c = 0; c < kDynamicChannels; ++c) {
            header.push_back("dyn_t" + std::to_string(t) + "_c" + std::to_string(c));
        }
    }
    CsvWriter writer(dir / "features.csv", header, scenario_provenance(scenario));
    for (const LabeledExample &example : examples) {
        std::vector<std::string> row{std::to_string(example.beneficiary_id),
                                     format_date(example.feature_end),
                                     label_name(example.label)};
        for (double v : example.features.static_features) {
            row.push_back(format_double(v));
        }
        for (double v : example.features.scalar_calls) {
            row.push_back(format_double(v));
        }
        for (const auto &dyn_row : example.features.dynamic.rows) {
            for (double v : dyn_row) {
                row.push_back(format_double(v));
            }
        }
        writer.write_row(row);
    }
    std::cout << "featurized " << examples.size() << " examples -> "
              << (dir / "features.csv").string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOptions {
    std::string data_dir;
    std::string model = "rule";
    std::string task = "short";
    int epochs = 60;
    int batch_size = 32;
    double learning_rate = 0.05;
    int n_trees = 200;
    int max_depth = 30;
};

int cmd_train(const GlobalOptions &options, const TrainOptions &train_options) {
    Scenario scenario = resolve_scenario(options);
    const auto task = parse_task(train_options.task);
    if (!task) {
        throw ConfigError("train: unknown task '" + train_options.task + "' (short|long)");
    }
    const Model::Kind kind = Model::parse_kind(train_options.model);
    const fs::path dir = ensure_out_dir(options);

    LoadedData data = load_data(train_options.data_dir, options.strict, false);
    const std::uint64_t seed = derive_seed(scenario.seed, "train");
    auto examples = build_examples(data, *task, derive_seed(seed, "anchors"));
    if (examples.empty()) {
        throw DataError("train: no usable examples in " + train_options.data_dir);
    }
    const SplitIndices split = split_examples(examples.size(), derive_seed(seed, "split"));
    if (split.test.empty() || split.train.empty()) {
        throw DataError("train: dataset too small to split");
    }

    auto subset = [&](const std::vector<std::size_t> &idx) {
        std::vector<LabeledExample> out;
        out.reserve(idx.size());
        for (std::size_t i : idx) {
            out.push_back(examples[i]);
        }
        return out;
    };
    std::vector<LabeledExample> train_set = subset(split.train);
    std::vector<LabeledExample> val_set = subset(split.validation);
    std::vector<LabeledExample> test_set = subset(split.test);

    Model model;
    model.kind = kind;
    model.task = *task;
    model.seed = seed;
    model.rule.window_days = *task == Task::ShortTerm ? 28 : kLongTermFeatureDays;

    switch (kind) {
    case Model::Kind::Rule:
        break; // nothing to fit
    case Model::Kind::Forest: {
        model.forest_config.n_trees = train_options.n_trees;
        model.forest_config.max_depth = train_options.max_depth;
        model.forest_config.seed = derive_seed(seed, "forest");
        std::vector<LabeledExample> fit_set = train_set;
        fit_set.insert(fit_set.end(), val_set.begin(), val_set.end());
        model.forest = train_forest(to_dataset(fit_set), model.forest_config);
        break;
    }
    case Model::Kind::Condip: {
        model.condip_config.static_dim =
            static_cast<int>(examples.front().features.static_with_scalars().size());
        model.condip_train_config.epochs = train_options.epochs;
        model.condip_train_config.batch_size = train_options.batch_size;
        model.condip_train_config.learning_rate = train_options.learning_rate;
        // Class weights follow the long-term setup; the short task is
        // unweighted by default.
        model.condip_train_config.class_weight_low = 1.0;
        model.condip_train_config.class_weight_high = *task == Task::LongTerm ? 1.75 : 1.0;
        model.condip_train_config.seed = derive_seed(seed, "condip");
        model.condip = CondipNetwork(model.condip_config, model.condip_train_config.seed);
        condip_train(model.condip, train_set, val_set, model.condip_train_config);
        break;
    }
    }

    // Test-set evaluation.
    std::vector<double> probabilities;
    std::vector<int> labels;
    for (LabeledExample &example : test_set) {
        probabilities.push_back(model.predict_proba(data.histories.at(example.beneficiary_id),
                                                    example.feature_end, example.features));
        labels.push_back(is_positive_label(example.label) ? 1 : 0);
    }
    const MetricReport report = evaluate(probabilities, labels);

    const std::string provenance = scenario_provenance(scenario);
    save_model(dir / "model.json", model, provenance);
    write_text_file(dir / "metrics.json", metric_report_to_json(report, provenance));
    write_roc_csv(dir / "roc.csv", report, provenance);
    std::printf("%s/%s on %zu train / %zu test: accuracy %.3f precision %.3f recall %.3f "
                "f1 %.3f auc %.3f\n",
                train_options.model.c_str(), train_options.task.c_str(), train_set.size(),
                test_set.size(), report.accuracy, report.precision, report.recall, report.f1,
                report.auc);
    return 0;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

int cmd_predict(const GlobalOptions &options, const std::string &data_dir,
                const std::string &model_file, const std::string &as_of_text) {
    Scenario scenario = resolve_scenario(options);
    const fs::path dir = ensure_out_dir(options);
    Model model = load_model(model_file);
    LoadedData data = load_data(data_dir, options.strict, false);

    std::optional<Date> as_of;
    if (!as_of_text.empty()) {
        as_of = parse_date(as_of_text);
    }

    FeatureConfig config;
    const int window_days = model.task == Task::LongTerm ? kLongTermFeatureDays : 28;
    if (model.task == Task::LongTerm) {
        config.gap_sentinel_days = kLongTermFeatureDays + 1;
    }

    CsvWriter writer(dir / "predictions.csv",
                     {"beneficiary_id", "feature_end", "probability", "predicted_label"},
                     scenario_provenance(scenario));
    std::size_t written = 0;
    for (const BeneficiaryProfile &profile : data.profiles) {
        auto it = data.histories.find(profile.beneficiary_id);
        if (it == data.histories.end() || it->second.empty()) {
            continue;
        }
        Date feature_end;
        if (model.task == Task::LongTerm) {
            feature_end = profile.registration_date + std::chrono::days{kLongTermFeatureDays};
        } else {
            feature_end = as_of ? *as_of : it->second.last_date() + std::chrono::days{1};
        }
        SequenceFeatures features;
        features.static_features = encode_profile(profile);
        features.dynamic = build_sequence(it->second, feature_end, window_days,
                                          config.engagement_seconds);
        features.scalar_calls =
            extract_scalar_features(it->second, feature_end, config.gap_sentinel_days);
        const double probability =
            model.predict_proba(it->second, feature_end, features);
        const bool positive = probability >= 0.5;
        const char *label = model.task == Task::LongTerm ? (positive ? "LLTE" : "HLTE")
                                                         : (positive ? "high_risk" : "low_risk");
        writer.write_row({std::to_string(profile.beneficiary_id), format_date(feature_end),
                          format_double(probability), label});
        ++written;
    }
    std::cout << "predicted " << written << " beneficiaries -> "
              << (dir / "predictions.csv").string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// plan
// ---------------------------------------------------------------------------

int cmd_plan(const GlobalOptions &options, const std::string &data_dir,
             const std::string &model_file, int k, int n_clusters,
             const std::string &as_of_text) {
    Scenario scenario = resolve_scenario(options);
    const fs::path dir = ensure_out_dir(options);
    Model model = load_model(model_file);

    LoadedData data = load_data(data_dir, options.strict, true);
    PlanConfig config;
    config.cluster = scenario.cluster;
    if (n_clusters > 0) {
        config.cluster.n_clusters = n_clusters;
    }
    config.cluster.seed = derive_seed(scenario.seed, "plan.cluster");
    config.k = k;
    if (!as_of_text.empty()) {
        config.as_of = parse_date(as_of_text);
    }

    const PlanOutput output =
        run_plan(data.profiles, data.histories, data.interventions, model, config);

    const std::string provenance = scenario_provenance(scenario);
    CsvWriter writer(dir / "plan.csv",
                     {"beneficiary_id", "cluster_id", "state", "whittle_index", "selected"},
                     provenance);
    for (const PlanRow &row : output.rows) {
        writer.write_row({std::to_string(row.beneficiary_id), std::to_string(row.cluster),
                          row.state == BehaviorState::Engaging ? "E" : "NE",
                          format_double(row.whittle), row.selected ? "1" : "0"});
    }
    save_cluster_model(dir / "cluster_model.json", output.model, provenance);
    warn_on_bracket(output.model);
    std::cout << "pool " << output.pool_size << " beneficiaries as of "
              << format_date(output.as_of) << ", selected "
              << std::min<std::size_t>(output.pool_size, static_cast<std::size_t>(k)) << " -> "
              << (dir / "plan.csv").string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

int cmd_evaluate(const GlobalOptions &options, const std::string &train_data_dir,
                 const std::string &cluster_model_file, int runs, int k, int replan_interval,
                 const std::string &policies_text) {
    Scenario scenario = resolve_scenario(options);
    const fs::path dir = ensure_out_dir(options);

    ClusterModel model;
    if (!cluster_model_file.empty()) {
        model = load_cluster_model(cluster_model_file);
    } else if (!train_data_dir.empty()) {
        LoadedData data = load_data(train_data_dir, options.strict, true);
        ClusterModelConfig config = scenario.cluster;
        config.seed = derive_seed(scenario.seed, "evaluate.cluster");
        model = fit_cluster_model(data.profiles, data.histories, data.interventions, config);
    } else {
        throw DataError("evaluate: need --train-data or --cluster-model");
    }

    std::vector<PlanPolicy> policies;
    std::string rest = policies_text;
    while (!rest.empty()) {
        const std::size_t comma = rest.find(',');
        const std::string name = rest.substr(0, comma);
        rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
        const auto policy = parse_plan_policy(name);
        if (!policy) {
            throw ConfigError("evaluate: unknown policy '" + name + "'");
        }
        policies.push_back(*policy);
    }

    PolicyEvalConfig config = scenario.eval;
    if (runs > 0) {
        config.runs = runs;
    }
    if (k > 0) {
        config.k = k;
    }
    config.replan_interval_months = replan_interval;
    const auto rows = evaluate_policy(scenario.cohort, scenario.sim, model, policies, config);

    const std::string provenance = scenario_provenance(scenario);
    write_text_file(dir / "evaluation.json", policy_eval_to_json(rows, provenance));
    save_cluster_model(dir / "cluster_model.json", model, provenance);
    warn_on_bracket(model);
    std::printf("%-16s %-18s %-18s\n", "policy", "call", "control");
    for (const PolicyEvalRow &row : rows) {
        char call[32], control[32];
        std::snprintf(call, sizeof(call), "%.1f +- %.1f", row.call_mean, row.call_std);
        std::snprintf(control, sizeof(control), "%.1f +- %.1f", row.control_mean,
                      row.control_std);
        std::printf("%-16s %-18s %-18s\n", plan_policy_name(row.policy), call, control);
    }
    std::cout << "wrote " << (dir / "evaluation.json").string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"call-program engagement prediction and intervention planning"};
    app.require_subcommand(1);

    GlobalOptions options;
    app.add_option("--config", options.config_path, "scenario config JSON");
    app.add_option("--seed", options.seed, "root seed (overrides the config)");
    app.add_option("--out", options.out_dir, "output directory");
    app.add_flag("--strict", options.strict, "treat rejected rows as errors");

    auto *generate = app.add_subcommand("generate", "simulate a cohort and write the dataset");
    int generate_n = 0;
    generate->add_option("--n", generate_n, "override cohort size");

    auto *simulate = app.add_subcommand("simulate", "run the four-arm intervention study");

    auto *featurize = app.add_subcommand("featurize", "emit the feature table");
    std::string featurize_data, featurize_task = "short";
    featurize->add_option("--data", featurize_data, "dataset directory")->required();
    featurize->add_option("--task", featurize_task, "short|long");

    auto *train = app.add_subcommand("train", "train and evaluate a predictor");
    TrainOptions train_options;
    train->add_option("--data", train_options.data_dir, "dataset directory")->required();
    train->add_option("--model", train_options.model, "rule|forest|condip");
    train->add_option("--task", train_options.task, "short|long");
    train->add_option("--epochs", train_options.epochs, "training epochs");
    train->add_option("--batch-size", train_options.batch_size, "mini-batch size");
    train->add_option("--learning-rate", train_options.learning_rate, "gradient step");
    train->add_option("--trees", train_options.n_trees, "forest size");
    train->add_option("--max-depth", train_options.max_depth, "tree depth cap");

    auto *predict = app.add_subcommand("predict", "score beneficiaries with a saved model");
    std::string predict_data, predict_model, predict_as_of;
    predict->add_option("--data", predict_data, "dataset directory")->required();
    predict->add_option("--model-file", predict_model, "model JSON")->required();
    predict->add_option("--as-of", predict_as_of, "prediction date (short task)");

    auto *plan = app.add_subcommand("plan", "select the top-k beneficiaries to call");
    std::string plan_data, plan_model, plan_as_of;
    int plan_k = 100, plan_clusters = 0;
    plan->add_option("--data", plan_data, "dataset directory")->required();
    plan->add_option("--model-file", plan_model, "long-term model JSON")->required();
    plan->add_option("--k", plan_k, "intervention budget");
    plan->add_option("--clusters", plan_clusters, "number of behavior clusters");
    plan->add_option("--as-of", plan_as_of, "planning date");

    auto *eval = app.add_subcommand("evaluate", "retrospective policy evaluation");
    std::string eval_train_data, eval_cluster_model;
    std::string eval_policies = "whittle,random,myopic-ne-first,no-op";
    int eval_runs = 0, eval_k = 0, eval_replan = 0;
    eval->add_option("--train-data", eval_train_data, "dataset to fit the cluster model");
    eval->add_option("--cluster-model", eval_cluster_model, "saved cluster model JSON");
    eval->add_option("--runs", eval_runs, "number of seeded runs");
    eval->add_option("--k", eval_k, "top-k size");
    eval->add_option("--replan-interval", eval_replan,
                     "re-plan every N months (exploratory; 0 = plan once)");
    eval->add_option("--policies", eval_policies, "comma-separated policy list");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (generate->parsed()) {
            return cmd_generate(options, generate_n);
        }
        if (simulate->parsed()) {
            return cmd_simulate(options);
        }
        if (featurize->parsed()) {
            return cmd_featurize(options, featurize_data, featurize_task);
        }
        if (train->parsed()) {
            return cmd_train(options, train_options);
        }
        if (predict->parsed()) {
            return cmd_predict(options, predict_data, predict_model, predict_as_of);
        }
        if (plan->parsed()) {
            return cmd_plan(options, plan_data, plan_model, plan_k, plan_clusters, plan_as_of);
        }
        if (eval->parsed()) {
            return cmd_evaluate(options, eval_train_data, eval_cluster_model, eval_runs, eval_k,
                                eval_replan, eval_policies);
        }
    } catch (const ConfigError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return 0;
}

// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Run through ctest as `acceptance --cli <path-to-cli-binary>`.

#include "callplan/error.hpp"
#include "callplan/kmeans.hpp"
#include "callplan/metrics.hpp"
#include "callplan/model_io.hpp"
#include "callplan/pipeline.hpp"
#include "callplan/scenario.hpp"
#include "callplan/sim.hpp"
#include "test_util.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace callplan;
using namespace callplan::testutil;

namespace {

int failures = 0;

class Criterion {
  public:
    Criterion(int number, std::string name)
        : number_(number), name_(std::move(name)),
          start_(std::chrono::steady_clock::now()) {}

    void check(bool ok, const std::string &detail) {
        if (!ok) {
            ok_ = false;
            if (detail_.empty()) {
                detail_ = detail;
            }
        }
    }

    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

    ~Criterion() {
        std::printf("%s  %2d  %s (%.1fs)%s%s\n", ok_ ? "PASS" : "FAIL", number_, name_.c_str(),
                    seconds(), detail_.empty() ? "" : " -- ", detail_.c_str());
        std::fflush(stdout);
        if (!ok_) {
            ++failures;
        }
    }

  private:
    int number_;
    std::string name_;
    bool ok_ = true;
    std::string detail_;
    std::chrono::steady_clock::time_point start_;
};

MdpParams make_mdp(double stay_e_passive, double stay_ne_passive, double stay_e_active,
                   double stay_ne_active, double discount = 0.95) {
    MdpParams mdp;
    mdp.discount = discount;
    mdp.p[0][0][0] = stay_e_passive;
    mdp.p[0][0][1] = 1.0 - stay_e_passive;
    mdp.p[1][0][1] = stay_ne_passive;
    mdp.p[1][0][0] = 1.0 - stay_ne_passive;
    mdp.p[0][1][0] = stay_e_active;
    mdp.p[0][1][1] = 1.0 - stay_e_active;
    mdp.p[1][1][1] = stay_ne_active;
    mdp.p[1][1][0] = 1.0 - stay_ne_active;
    return mdp;
}

MdpParams random_mdp(Rng &rng) {
    return make_mdp(rng.next_double(), rng.next_double(), rng.next_double(), rng.next_double());
}

/// Brute-force subsidy-grid oracle: linear coarse scan for the sign change of
/// Q_m(s,I) - Q_m(s,A), then a linear fine scan at step 1e-4 across the
/// bracketing interval.
double grid_whittle(const MdpParams &mdp, BehaviorState state, double step) {
    const double bound = 2.0 / (1.0 - mdp.discount) + 1.0;
    auto advantage = [&](double m) {
        const SubsidizedQ q = value_iteration(mdp, m, 1e-9);
        return q.action_value(state, Action::Intervene) - q.action_value(state, Action::Abstain);
    };
    const double coarse_step = 0.1;
    double coarse = -bound;
    while (coarse <= bound && advantage(coarse) > 0.0) {
        coarse += coarse_step;
    }
    double m = coarse - coarse_step;
    while (m <= coarse && advantage(m) > 0.0) {
        m += step;
    }
    return m - step / 2.0;
}

std::array<double, 2> linear_solve_policy_value(const MdpParams &mdp,
                                                const std::array<Action, 2> &policy,
                                                double subsidy) {
    const double beta = mdp.discount;
    double p[2][2];
    double r[2];
    for (int s = 0; s < 2; ++s) {
        const int a = static_cast<int>(policy[static_cast<std::size_t>(s)]);
        p[s][0] = mdp.p[s][a][0];
        p[s][1] = mdp.p[s][a][1];
        r[s] = state_reward(static_cast<BehaviorState>(s)) +
               (a == static_cast<int>(Action::Abstain) ? subsidy : 0.0);
    }
    const double a11 = 1.0 - beta * p[0][0], a12 = -beta * p[0][1];
    const double a21 = -beta * p[1][0], a22 = 1.0 - beta * p[1][1];
    const double det = a11 * a22 - a12 * a21;
    return {(a22 * r[0] - a12 * r[1]) / det, (a11 * r[1] - a21 * r[0]) / det};
}

double normal_two_sided_p(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

// ---------------------------------------------------------------------------

void criterion_1_whittle_oracle() {
    Criterion c(1, "Whittle binary search matches the 1e-4 subsidy-grid oracle within 2e-4");
    Rng rng(101);
    for (int trial = 0; trial < 100; ++trial) {
        MdpParams mdp = random_mdp(rng);
        for (BehaviorState s : {BehaviorState::Engaging, BehaviorState::NotEngaging}) {
            const WhittleResult result = whittle_index(mdp, s, 1e-6);
            const double oracle = grid_whittle(mdp, s, 1e-4);
            c.check(!result.bracket_warning, "bracket warning on a random MDP");
            c.check(std::fabs(result.value - oracle) <= 2e-4,
                    "index " + std::to_string(result.value) + " vs grid " +
                        std::to_string(oracle));
        }
    }
    c.check(c.seconds() < 60.0, "runtime above one minute");
}

void criterion_2_value_iteration() {
    Criterion c(2, "value iteration matches the 2x2 linear solve; sweeps contract at beta");
    Rng rng(202);
    for (int trial = 0; trial < 100; ++trial) {
        MdpParams mdp = random_mdp(rng);
        const std::array<Action, 2> policy{static_cast<Action>(rng.next_index(2)),
                                           static_cast<Action>(rng.next_index(2))};
        const double subsidy = rng.uniform(-2.0, 2.0);
        std::vector<std::array<double, 2>> sweeps;
        const auto iterated = policy_evaluation(mdp, policy, subsidy, 1e-9, &sweeps);
        const auto exact = linear_solve_policy_value(mdp, policy, subsidy);
        c.check(std::fabs(iterated[0] - exact[0]) <= 1e-6 &&
                    std::fabs(iterated[1] - exact[1]) <= 1e-6,
                "fixed point off by more than 1e-6");

        double previous = std::max(std::fabs(exact[0]), std::fabs(exact[1])); // from V_0 = 0
        for (const auto &v : sweeps) {
            const double err =
                std::max(std::fabs(v[0] - exact[0]), std::fabs(v[1] - exact[1]));
            if (previous < 1e-13) {
                break;
            }
            // (1 + 1e-9) and 1e-13 allow Bellman-operator rounding at the
            // 1/(1-beta) value scale.
            c.check(err <= mdp.discount * previous * (1.0 + 1e-9) + 1e-13,
                    "sweep contracted slower than beta");
            previous = err;
        }
    }
}

void criterion_3_zero_effect_index() {
    Criterion c(3, "identical active/passive transitions give W(s) = 0 +- 1e-5");
    Rng rng(303);
    for (int trial = 0; trial < 100; ++trial) {
        const double stay_e = rng.next_double();
        const double stay_ne = rng.next_double();
        MdpParams mdp = make_mdp(stay_e, stay_ne, stay_e, stay_ne);
        for (BehaviorState s : {BehaviorState::Engaging, BehaviorState::NotEngaging}) {
            const WhittleResult result = whittle_index(mdp, s, 1e-6);
            c.check(std::fabs(result.value) <= 1e-5,
                    "zero-effect index " + std::to_string(result.value));
        }
    }
}

void criterion_4_gradient_check() {
    Criterion c(4, "analytic gradients match central differences (h=1e-4) per group, 30 seeds");
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        CondipConfig config = reduced_condip_config();
        CondipNetwork net(config, derive_seed(seed, "acc.gradcheck.net"));
        Rng rng(derive_seed(seed, "acc.gradcheck.data"));
        auto batch = random_batch(config, 16, rng);
        std::vector<int> labels;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            labels.push_back(rng.bernoulli(0.5) ? 1 : 0);
        }
        const GradientCheckResult result = gradient_check(net, batch, labels, 1.0, 1.75);
        for (const char *group : {"conv", "static_encoder", "head", "batch_norm"}) {
            auto it = result.group_rel.find(group);
            c.check(it != result.group_rel.end() && it->second < 1e-4,
                    std::string("group ") + group + " relative error at seed " +
                        std::to_string(seed));
        }
        c.check(result.worst_param_mixed <= 1.0,
                "per-parameter mixed tolerance exceeded at seed " + std::to_string(seed));
    }
}

void criterion_5_pooling() {
    Criterion c(5, "masked average pooling is exact and invariant to appended zero padding");
    // Hand-built tensor: feature 0 over time {1,3}, feature 1 over {2,4}.
    const std::vector<double> activations{1.0, 3.0, 2.0, 4.0};
    const auto pooled = masked_average_pool(activations, 2, 2, 2);
    c.check(pooled[0] == 2.0 && pooled[1] == 3.0, "hand-built average wrong");

    const std::vector<double> longer{5.0, 7.0, 9.0, 99.0, 2.0, 4.0, 6.0, 99.0};
    const auto masked = masked_average_pool(longer, 2, 4, 3);
    c.check(masked[0] == 7.0 && masked[1] == 4.0, "masking leaked padding steps");
    const auto empty = masked_average_pool(longer, 2, 4, 0);
    c.check(empty[0] == 0.0 && empty[1] == 0.0, "valid_len 0 must pool to zero");

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        CondipConfig config = reduced_condip_config();
        CondipNetwork net(config, derive_seed(seed, "acc.pool.net"));
        Rng rng(derive_seed(seed, "acc.pool.data"));
        auto batch = random_batch(config, 4, rng);
        const auto base = condip_forward(net, batch, RunMode::Infer, nullptr);
        auto padded = batch;
        for (CondipExample &example : padded) {
            example.dynamic.resize(example.dynamic.size() +
                                       5 * static_cast<std::size_t>(config.dyn_channels),
                                   0.0);
            example.t_len += 5;
        }
        const auto shifted = condip_forward(net, padded, RunMode::Infer, nullptr);
        for (std::size_t i = 0; i < base.size(); ++i) {
            c.check(base[i] == shifted[i], "appended padding changed the forward pass");
        }
    }
}

void criterion_6_predictor_sanity() {
    Criterion c(6, "separable cohort: rule exact, forest and condip held-out accuracy >= 0.95");
    Scenario s = separable_scenario();
    const Cohort cohort = generate_cohort(s.cohort);
    const SimOutcome out = simulate_program(cohort, s.sim, derive_seed(s.seed, "generate.sim"),
                                            s.cohort.weeks, {});
    const auto histories = build_histories(out.calls);
    const auto examples = build_short_term_examples(cohort.profiles, histories,
                                                    derive_seed(s.seed, "anchors"), {});
    c.check(examples.size() == 2000, "expected one example per beneficiary");

    const SplitIndices split = split_examples(examples.size(), derive_seed(s.seed, "split"));
    auto subset = [&](const std::vector<std::size_t> &idx) {
        std::vector<LabeledExample> v;
        for (std::size_t i : idx) {
            v.push_back(examples[i]);
        }
        return v;
    };
    const auto train = subset(split.train);
    const auto val = subset(split.validation);
    const auto test = subset(split.test);

    auto held_out_accuracy = [&](auto &&score) {
        long ok = 0;
        for (const LabeledExample &e : test) {
            ok += (score(e) >= 0.5 ? 1 : 0) == (is_positive_label(e.label) ? 1 : 0) ? 1 : 0;
        }
        return static_cast<double>(ok) / static_cast<double>(test.size());
    };

    // Rule baseline versus an independently hand-counted E2C threshold.
    RulePredictorConfig rule_config;
    long mismatches = 0;
    for (const LabeledExample &e : test) {
        const CallHistory &history = histories.at(e.beneficiary_id);
        int connections = 0, engagements = 0;
        for (const CallEvent &event : history.events) {
            if (event.date >= e.feature_end - std::chrono::days{28} &&
                event.date < e.feature_end) {
                connections += event.kind != EventKind::Attempt ? 1 : 0;
                engagements += event.kind == EventKind::Engagement ? 1 : 0;
            }
        }
        const bool oracle =
            connections == 0 ||
            static_cast<double>(engagements) / connections < rule_config.e2c_threshold;
        const bool predicted = rule_predict_high_risk(history, e.feature_end, rule_config);
        mismatches += predicted != oracle ? 1 : 0;
    }
    c.check(mismatches == 0, std::to_string(mismatches) + " rule/oracle mismatches");

    ForestConfig forest_config;
    forest_config.seed = 11;
    std::vector<LabeledExample> fit = train;
    fit.insert(fit.end(), val.begin(), val.end());
    const RandomForest forest = train_forest(to_dataset(fit), forest_config);
    const double forest_accuracy = held_out_accuracy([&](const LabeledExample &e) {
        return forest.predict_proba(e.features.static_with_scalars());
    });
    c.check(forest_accuracy >= 0.95,
            "forest held-out accuracy " + std::to_string(forest_accuracy));

    CondipConfig condip_config;
    condip_config.static_dim =
        static_cast<int>(examples.front().features.static_with_scalars().size());
    CondipNetwork net(condip_config, 13);
    TrainConfig train_config;
    train_config.epochs = 50;
    train_config.seed = 13;
    train_config.class_weight_high = 1.0;
    condip_train(net, train, val, train_config);
    const double condip_accuracy = held_out_accuracy(
        [&](const LabeledExample &e) { return condip_predict(net, e.features); });
    c.check(condip_accuracy >= 0.95,
            "condip held-out accuracy " + std::to_string(condip_accuracy));
    c.check(c.seconds() < 300.0, "runtime above five minutes");
}

void criterion_7_metric_arithmetic() {
    Criterion c(7, "confusion-matrix metrics exact; AUC 1.0 perfect, 0.5 +- 0.02 random");
    std::vector<double> probs;
    std::vector<int> labels;
    for (int i = 0; i < 9; ++i) {
        probs.push_back(0.9);
        labels.push_back(1);
    }
    probs.push_back(0.8);
    labels.push_back(0);
    for (int i = 0; i < 3; ++i) {
        probs.push_back(0.2);
        labels.push_back(1);
    }
    for (int i = 0; i < 7; ++i) {
        probs.push_back(0.1);
        labels.push_back(0);
    }
    const MetricReport report = evaluate(probs, labels);
    c.check(report.precision == 0.9, "precision not exactly 0.9");
    c.check(report.recall == 0.75, "recall not exactly 0.75");
    c.check(std::fabs(report.f1 - 0.8182) < 5e-5, "f1 not 0.8182");
    c.check(report.accuracy == 0.8, "accuracy not exactly 0.8");

    const MetricReport perfect = evaluate({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
    c.check(perfect.auc == 1.0, "perfect scorer AUC not 1");

    Rng rng(707);
    std::vector<double> random_probs;
    std::vector<int> random_labels;
    for (int i = 0; i < 10000; ++i) {
        random_probs.push_back(rng.next_double());
        random_labels.push_back(rng.bernoulli(0.5) ? 1 : 0);
    }
    const MetricReport random_report = evaluate(random_probs, random_labels);
    c.check(std::fabs(random_report.auc - 0.5) <= 0.02,
            "random scorer AUC " + std::to_string(random_report.auc));
}

void criterion_8_transition_estimation() {
    Criterion c(8, "10k-beneficiary frequencies recover planted MDP +-0.02; k-means exact");
    Scenario s = default_scenario();
    CohortSpec spec = s.cohort;
    spec.n_beneficiaries = 10000;
    spec.seed = 808;
    spec.archetypes.resize(1);
    spec.archetypes[0].weight = 1.0;
    spec.archetypes[0].education_tilt.clear();
    spec.archetypes[0].behavior = make_mdp(0.7, 0.8, 0.9, 0.4);
    spec.archetypes[0].initial_engaging_prob = 0.5;

    SimParams params = s.sim;
    params.call_success_prob = 1.0; // logged interventions are the actions taken
    Rng schedule_rng(809);
    std::vector<PlannedIntervention> planned;
    for (std::size_t i = 0; i < 10000; ++i) {
        for (int month = 0; month < 7; ++month) {
            if (schedule_rng.bernoulli(0.4)) {
                planned.push_back(PlannedIntervention{i, month, InterventionKind::Call});
            }
        }
    }
    const Cohort cohort = generate_cohort(spec);
    const SimOutcome out = simulate_program(cohort, params, 810, 35, planned);

    std::map<BeneficiaryId, std::vector<InterventionRecord>> per_id;
    for (const InterventionRecord &r : out.interventions) {
        per_id[r.beneficiary_id].push_back(r);
    }
    TransitionCounts counts;
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        const auto &states = out.true_states[i];
        const auto intervened =
            call_intervention_months(per_id[cohort.profiles[i].beneficiary_id],
                                     cohort.registration_date, static_cast<int>(states.size()));
        for (const TransitionTuple &t : build_tuples(states, intervened)) {
            counts.add(t);
        }
    }
    const MdpParams estimated = estimate_params(counts, 0.0);
    for (int st = 0; st < 2; ++st) {
        for (int a = 0; a < 2; ++a) {
            for (int n = 0; n < 2; ++n) {
                c.check(std::fabs(estimated.p[st][a][n] -
                                  spec.archetypes[0].behavior.p[st][a][n]) <= 0.02,
                        "cell off by more than 0.02");
            }
        }
    }

    // Planted parameter clusters.
    Rng rng(811);
    std::vector<std::vector<double>> points;
    std::vector<int> truth;
    const std::vector<std::vector<double>> centers{
        {0.9, 0.9, 0.9, 0.1}, {0.4, 0.5, 0.5, 0.5}, {0.1, 0.95, 0.2, 0.9}};
    for (int i = 0; i < 90; ++i) {
        const int which = i % 3;
        truth.push_back(which);
        std::vector<double> p = centers[static_cast<std::size_t>(which)];
        for (double &v : p) {
            v += rng.uniform(-0.02, 0.02);
        }
        points.push_back(std::move(p));
    }
    const KMeansResult clustering = kmeans(points, 3, 812);
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = 0; j < points.size(); ++j) {
            c.check((clustering.assignment[i] == clustering.assignment[j]) ==
                        (truth[i] == truth[j]),
                    "planted partition not recovered");
        }
    }
    for (std::size_t i = 1; i < clustering.inertia_trace.size(); ++i) {
        c.check(clustering.inertia_trace[i] <= clustering.inertia_trace[i - 1] + 1e-12,
                "inertia increased across a Lloyd iteration");
    }
}

void criterion_9_planning_overlap() {
    Criterion c(9, "whittle top-100 call-control gap >= 5pp and above random, >= 45/50 runs");
    Scenario s = default_scenario();

    // Training phase: program logs with random call interventions.
    const Cohort train_cohort = generate_cohort(s.cohort);
    const int months = (s.cohort.weeks * 7 + 29) / 30;
    std::vector<PlannedIntervention> planned;
    for (std::size_t i = 0; i < train_cohort.size(); ++i) {
        Rng rng(derive_seed(s.seed, "generate.interventions", static_cast<std::uint64_t>(i)));
        for (int m = 0; m < months; ++m) {
            if (rng.bernoulli(s.train_intervention_prob)) {
                planned.push_back(PlannedIntervention{i, m, InterventionKind::Call});
            }
        }
    }
    const SimOutcome out = simulate_program(train_cohort, s.sim,
                                            derive_seed(s.seed, "generate.sim"),
                                            s.cohort.weeks, planned);
    const auto histories = build_histories(out.calls);
    ClusterModelConfig cluster_config = s.cluster;
    cluster_config.seed = derive_seed(s.seed, "evaluate.cluster");
    const ClusterModel model =
        fit_cluster_model(train_cohort.profiles, histories, out.interventions, cluster_config);

    PolicyEvalConfig eval_config = s.eval;
    eval_config.runs = 50;
    eval_config.k = 100;
    const auto rows = evaluate_policy(s.cohort, s.sim, model,
                                      {PlanPolicy::Whittle, PlanPolicy::Random}, eval_config);
    int good_runs = 0;
    for (int run = 0; run < 50; ++run) {
        const double whittle_gap = rows[0].call_samples[static_cast<std::size_t>(run)] -
                                   rows[0].control_samples[static_cast<std::size_t>(run)];
        const double random_gap = rows[1].call_samples[static_cast<std::size_t>(run)] -
                                  rows[1].control_samples[static_cast<std::size_t>(run)];
        if (whittle_gap >= 5.0 && whittle_gap > random_gap) {
            ++good_runs;
        }
    }
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "whittle %.1f+-%.1f vs %.1f+-%.1f (random gap %.1f), good runs %d/50",
                  rows[0].call_mean, rows[0].call_std, rows[0].control_mean, rows[0].control_std,
                  rows[1].call_mean - rows[1].control_mean, good_runs);
    c.check(good_runs >= 45, detail);
    c.check(c.seconds() < 600.0, "runtime above ten minutes");
}

void criterion_10_psqis_ordering() {
    Criterion c(10, "arm ordering control < sms < hybrid < call over 20 seeds; null collapses");
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Scenario s = default_scenario();
        apply_root_seed(s, seed);
        const Cohort cohort = generate_cohort(s.cohort);
        const PsqisResult r = run_psqis(cohort, s.sim, s.psqis);
        const auto &p = r.high_engagement_pct;
        const bool ordered = p[0] < p[1] && p[1] < p[3] && p[3] < p[2];
        char detail[120];
        std::snprintf(detail, sizeof(detail),
                      "seed %llu: control %.1f sms %.1f hybrid %.1f call %.1f",
                      static_cast<unsigned long long>(seed), p[0], p[1], p[3], p[2]);
        c.check(ordered, detail);
    }

    // Zero-effect configuration: counts pooled over the same 20 seeds, all
    // six pairwise two-proportion tests must keep p > 0.01.
    std::array<long, 4> high{}, evaluable{};
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Scenario s = default_scenario();
        make_zero_effect(s);
        apply_root_seed(s, seed);
        const Cohort cohort = generate_cohort(s.cohort);
        const PsqisResult r = run_psqis(cohort, s.sim, s.psqis);
        for (std::size_t a = 0; a < 4; ++a) {
            high[a] += r.high_engagement[a];
            evaluable[a] += r.evaluable[a];
        }
    }
    for (std::size_t a = 0; a < 4; ++a) {
        for (std::size_t b = a + 1; b < 4; ++b) {
            const double pa = static_cast<double>(high[a]) / static_cast<double>(evaluable[a]);
            const double pb = static_cast<double>(high[b]) / static_cast<double>(evaluable[b]);
            const double pooled = static_cast<double>(high[a] + high[b]) /
                                  static_cast<double>(evaluable[a] + evaluable[b]);
            const double se =
                std::sqrt(pooled * (1.0 - pooled) *
                          (1.0 / static_cast<double>(evaluable[a]) +
                           1.0 / static_cast<double>(evaluable[b])));
            const double p_value = normal_two_sided_p((pa - pb) / se);
            c.check(p_value > 0.01, "null arms differ: pair p-value " + std::to_string(p_value));
        }
    }
}

// ---------------------------------------------------------------------------
// Criterion 11: CLI determinism
// ---------------------------------------------------------------------------

std::string g_cli_path;

int run_cli(const std::string &args) {
    const std::string command = g_cli_path + " " + args + " >/dev/null 2>&1";
    return std::system(command.c_str());
}

std::map<std::string, std::string> read_tree(const fs::path &dir) {
    std::map<std::string, std::string> files;
    for (const auto &entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file()) {
            files[fs::relative(entry.path(), dir).string()] =
                read_text_file(entry.path());
        }
    }
    return files;
}

void criterion_11_cli_determinism() {
    Criterion c(11, "every CLI subcommand is byte-identical across identical seeded reruns");
    if (g_cli_path.empty()) {
        c.check(false, "no --cli path given");
        return;
    }
    const fs::path base = fs::temp_directory_path() / "callplan_acceptance_cli";
    fs::remove_all(base);
    fs::create_directories(base);

    // Small scenario so the double runs stay quick.
    Scenario s = default_scenario();
    s.cohort.n_beneficiaries = 500;
    apply_root_seed(s, 21);
    write_text_file(base / "scenario.json", scenario_to_json(s));
    const std::string config = " --config " + (base / "scenario.json").string();

    struct Step {
        std::string name;
        std::string args; // {out} replaced by the run directory
    };
    const fs::path data = base / "data";
    const std::vector<Step> steps{
        {"generate", "--seed 21 --out {out} generate"},
        {"simulate", "--seed 21 --out {out} simulate"},
        {"featurize", "--seed 21 --out {out} featurize --data " + data.string() +
                          " --task short"},
        {"train-rule", "--seed 21 --out {out} train --data " + data.string() +
                           " --model rule --task short"},
        {"train-forest", "--seed 21 --out {out} train --data " + data.string() +
                             " --model forest --task short --trees 25"},
        {"train-condip", "--seed 21 --out {out} train --data " + data.string() +
                             " --model condip --task short --epochs 4"},
        {"train-long", "--seed 21 --out {out} train --data " + data.string() +
                           " --model rule --task long"},
        {"predict", "--seed 21 --out {out} predict --data " + data.string() +
                        " --model-file " + (base / "models" / "model.json").string()},
        {"plan", "--seed 21 --out {out} plan --data " + data.string() + " --model-file " +
                     (base / "models_long" / "model.json").string() + " --k 25 --clusters 6"},
        {"evaluate", "--seed 21 --out {out} evaluate --train-data " + data.string() +
                         " --runs 2 --k 20 --policies whittle,random"},
    };

    // Seed dataset + models the later steps consume.
    c.check(run_cli(config + " --seed 21 --out " + data.string() + " generate") == 0,
            "generate for fixtures failed");
    c.check(run_cli(config + " --seed 21 --out " + (base / "models").string() +
                    " train --data " + data.string() + " --model forest --task short --trees 25") ==
                0,
            "fixture model training failed");
    c.check(run_cli(config + " --seed 21 --out " + (base / "models_long").string() +
                    " train --data " + data.string() + " --model rule --task long") == 0,
            "fixture long model training failed");

    for (const Step &step : steps) {
        std::array<std::map<std::string, std::string>, 2> trees;
        for (int run = 0; run < 2; ++run) {
            const fs::path out = base / (step.name + "_" + std::to_string(run));
            std::string args = step.args;
            const std::string token = "{out}";
            args.replace(args.find(token), token.size(), out.string());
            if (run_cli(config + " " + args) != 0) {
                c.check(false, step.name + " exited nonzero");
                return;
            }
            trees[static_cast<std::size_t>(run)] = read_tree(out);
        }
        c.check(trees[0].size() == trees[1].size() && !trees[0].empty(),
                step.name + ": different file sets");
        for (const auto &[name, content] : trees[0]) {
            auto it = trees[1].find(name);
            c.check(it != trees[1].end() && it->second == content,
                    step.name + ": " + name + " differs between reruns");
        }
    }
    fs::remove_all(base);
}

} // namespace

int main(int argc, char **argv) {
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--cli") {
            g_cli_path = argv[i + 1];
        }
    }
    if (g_cli_path.empty()) {
        const char *env = std::getenv("CALLPLAN_BIN");
        if (env) {
            g_cli_path = env;
        }
    }

    criterion_1_whittle_oracle();
    criterion_2_value_iteration();
    criterion_3_zero_effect_index();
    criterion_4_gradient_check();
    criterion_5_pooling();
    criterion_6_predictor_sanity();
    criterion_7_metric_arithmetic();
    criterion_8_transition_estimation();
    criterion_9_planning_overlap();
    criterion_10_psqis_ordering();
    criterion_11_cli_determinism();

    if (failures > 0) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("all acceptance criteria passed\n");
    return 0;
}

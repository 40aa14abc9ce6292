#pragma once

#include "callplan/calllog.hpp"
#include "callplan/condip.hpp"
#include "callplan/forest.hpp"
#include "callplan/rmab.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace callplan {

// ---------------------------------------------------------------------------
// Rule-based baseline
// ---------------------------------------------------------------------------

struct RulePredictorConfig {
    double e2c_threshold = 0.5;
    int window_days = 28; // 4 weeks short-term, 30 days long-term
};

/// High risk iff the E2C ratio over the window ending at `as_of` is strictly
/// below the threshold. Windows with zero connections are high risk (no
/// evidence of engagement). Throws ConfigError for thresholds outside (0,1).
bool rule_predict_high_risk(const CallHistory &history, Date as_of,
                            const RulePredictorConfig &config);

/// Task-labeled form of the rule decision.
EngagementLabel rule_predict(const CallHistory &history, Date as_of,
                             const RulePredictorConfig &config, bool long_term_task);

// ---------------------------------------------------------------------------
// Predictor datasets
// ---------------------------------------------------------------------------

enum class Task { ShortTerm, LongTerm };

const char *task_name(Task task);
std::optional<Task> parse_task(const std::string &name);

/// One example per beneficiary with a valid anchor; anchors are one seeded
/// uniform draw each over the week-aligned candidates.
std::vector<LabeledExample>
build_short_term_examples(const std::vector<BeneficiaryProfile> &profiles,
                          const std::map<BeneficiaryId, CallHistory> &histories,
                          std::uint64_t seed, const FeatureConfig &config = {});

/// One example per beneficiary passing the long-term filters.
std::vector<LabeledExample>
build_long_term_examples(const std::vector<BeneficiaryProfile> &profiles,
                         const std::map<BeneficiaryId, CallHistory> &histories,
                         const FeatureConfig &config = {});

/// Flat dataset for the forest: encoded profile plus the six scalar call
/// features. The call sequence stays with the neural model.
Dataset to_dataset(const std::vector<LabeledExample> &examples);

struct SplitIndices {
    std::vector<std::size_t> train, validation, test;
};

/// Deterministic seeded shuffle split.
SplitIndices split_examples(std::size_t n, std::uint64_t seed, double train_fraction = 0.6,
                            double validation_fraction = 0.2);

// ---------------------------------------------------------------------------
// Unified model handle (rule | forest | condip)
// ---------------------------------------------------------------------------

struct Model {
    enum class Kind { Rule, Forest, Condip };

    Kind kind = Kind::Rule;
    Task task = Task::ShortTerm;
    std::uint64_t seed = 0;

    RulePredictorConfig rule;
    ForestConfig forest_config;
    RandomForest forest;
    CondipConfig condip_config;
    TrainConfig condip_train_config;
    CondipNetwork condip;

    static Kind parse_kind(const std::string &name);
    static const char *kind_name(Kind kind);

    /// Probability of the positive (high-risk / LLTE) class. The rule model
    /// consults the history window ending at as_of; the others use the
    /// features.
    double predict_proba(const CallHistory &history, Date as_of,
                         const SequenceFeatures &features);
};

// ---------------------------------------------------------------------------
// Demographic grouping and the fitted cluster model
// ---------------------------------------------------------------------------

struct GroupingConfig {
    bool by_education = true;
    bool by_income = true;
    bool by_phone_owner = true;
    bool by_age_bucket = true;
    int age_bucket_years = 10;
};

long group_key(const BeneficiaryProfile &profile, const GroupingConfig &config);

struct ClusterModelConfig {
    GroupingConfig grouping;
    int n_clusters = 20;
    double alpha = 1.0; // Laplace smoothing for transition rows
    double discount = 0.95;
    double whittle_tol = 1e-6;
    double vi_tol = 1e-9;
    std::uint64_t seed = 0;
};

/// Planning artifact: per-cluster MDP parameters and Whittle indices, plus
/// the group-to-cluster map used to resolve beneficiaries.
struct ClusterModel {
    ClusterModelConfig config;
    std::vector<std::vector<double>> centroids; // stay-probability 4-vectors
    std::vector<MdpParams> cluster_params;
    std::vector<std::array<double, 2>> whittle; // [cluster][state]
    std::vector<bool> whittle_warning;
    std::map<long, int> group_to_cluster;
    int fallback_cluster = 0; // most transitions; used for unseen groups

    int resolve_cluster(const BeneficiaryProfile &profile) const;
    double index_for(int cluster, BehaviorState state) const {
        return whittle[static_cast<std::size_t>(cluster)][static_cast<std::size_t>(state)];
    }
};

/// Monthly states from registration, action-aligned call interventions,
/// transition tuples, counts.
TransitionCounts beneficiary_transition_counts(const CallHistory &history, Date registration,
                                               const std::vector<InterventionRecord> &own);

/// Groups beneficiaries by demographic key, pools per-group transition
/// counts, estimates per-group parameters, clusters the groups with k-means
/// on the stay-probability vectors, re-pools counts per cluster, and computes
/// cluster Whittle indices. n_clusters is clamped to the number of groups.
ClusterModel fit_cluster_model(const std::vector<BeneficiaryProfile> &profiles,
                               const std::map<BeneficiaryId, CallHistory> &histories,
                               const std::vector<InterventionRecord> &interventions,
                               const ClusterModelConfig &config);

// ---------------------------------------------------------------------------
// Planning run (pool filter -> cluster model -> top-k)
// ---------------------------------------------------------------------------

struct PlanConfig {
    ClusterModelConfig cluster;
    int k = 100;
    int min_engagements_first_60_days = 2;
    std::optional<Date> as_of; // default: day after the last call record
};

struct PlanRow {
    BeneficiaryId beneficiary_id = 0;
    int cluster = 0;
    BehaviorState state = BehaviorState::NotEngaging;
    double whittle = 0.0;
    bool selected = false;
};

struct PlanOutput {
    std::vector<PlanRow> rows; // pool members, selection order first
    ClusterModel model;
    Date as_of{};
    std::size_t pool_size = 0;
};

/// Filters to the intervention pool (predicted LLTE by the supplied long-term
/// model, and at least min_engagements in the first sixty days), fits the
/// cluster model on the pool, and selects the top-k by Whittle index. Throws
/// DataError("empty intervention pool") when nothing passes the filters.
PlanOutput run_plan(const std::vector<BeneficiaryProfile> &profiles,
                    const std::map<BeneficiaryId, CallHistory> &histories,
                    const std::vector<InterventionRecord> &interventions, Model &predictor,
                    const PlanConfig &config);

/// FNV-1a text hash used for provenance lines.
std::uint64_t hash_text(const std::string &text);

inline constexpr const char *kToolVersion = "callplan/0.1.0";

/// "tool=... seed=... config=..." header embedded in every output artifact.
std::string provenance_line(std::uint64_t seed, const std::string &config_echo);

} // namespace callplan

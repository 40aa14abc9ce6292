#include "callplan/pipeline.hpp"

#include "callplan/error.hpp"
#include "callplan/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace callplan {

// ---------------------------------------------------------------------------
// Rule-based baseline
// ---------------------------------------------------------------------------

bool rule_predict_high_risk(const CallHistory &history, Date as_of,
                            const RulePredictorConfig &config) {
    if (config.e2c_threshold <= 0.0 || config.e2c_threshold >= 1.0) {
        throw ConfigError("rule predictor: threshold must be in (0, 1)");
    }
    const DateRange window{as_of - std::chrono::days{config.window_days}, as_of};
    if (count_events(history, window).connections == 0) {
        return true; // no evidence of engagement
    }
    return e2c_ratio(history, window) < config.e2c_threshold;
}

EngagementLabel rule_predict(const CallHistory &history, Date as_of,
                             const RulePredictorConfig &config, bool long_term_task) {
    const bool high_risk = rule_predict_high_risk(history, as_of, config);
    if (long_term_task) {
        return high_risk ? EngagementLabel::LLTE : EngagementLabel::HLTE;
    }
    return high_risk ? EngagementLabel::ShortTermHighRisk : EngagementLabel::ShortTermLowRisk;
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

const char *task_name(Task task) { return task == Task::ShortTerm ? "short" : "long"; }

std::optional<Task> parse_task(const std::string &name) {
    if (name == "short") {
        return Task::ShortTerm;
    }
    if (name == "long") {
        return Task::LongTerm;
    }
    return std::nullopt;
}

std::vector<LabeledExample>
build_short_term_examples(const std::vector<BeneficiaryProfile> &profiles,
                          const std::map<BeneficiaryId, CallHistory> &histories,
                          std::uint64_t seed, const FeatureConfig &config) {
    std::vector<LabeledExample> examples;
    for (const BeneficiaryProfile &profile : profiles) {
        auto it = histories.find(profile.beneficiary_id);
        if (it == histories.end()) {
            continue;
        }
        Rng rng(derive_seed(seed, "anchor", static_cast<std::uint64_t>(profile.beneficiary_id)));
        std::optional<Date> anchor = sample_short_term_anchor(it->second, rng);
        if (!anchor) {
            continue;
        }
        examples.push_back(make_short_term_example(it->second, profile, *anchor, config));
    }
    return examples;
}

std::vector<LabeledExample>
build_long_term_examples(const std::vector<BeneficiaryProfile> &profiles,
                         const std::map<BeneficiaryId, CallHistory> &histories,
                         const FeatureConfig &config) {
    std::vector<LabeledExample> examples;
    for (const BeneficiaryProfile &profile : profiles) {
        auto it = histories.find(profile.beneficiary_id);
        if (it == histories.end()) {
            continue;
        }
        if (auto example = make_long_term_example(it->second, profile, config)) {
            examples.push_back(std::move(*example));
        }
    }
    return examples;
}

Dataset to_dataset(const std::vector<LabeledExample> &examples) {
    Dataset data;
    data.x.reserve(examples.size());
    data.y.reserve(examples.size());
    for (const LabeledExample &example : examples) {
        data.x.push_back(example.features.static_with_scalars());
        data.y.push_back(is_positive_label(example.label) ? 1 : 0);
    }
    return data;
}

SplitIndices split_examples(std::size_t n, std::uint64_t seed, double train_fraction,
                            double validation_fraction) {
    if (train_fraction < 0.0 || validation_fraction < 0.0 ||
        train_fraction + validation_fraction > 1.0) {
        throw ConfigError("split_examples: fractions must be non-negative and sum to <= 1");
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    Rng rng(derive_seed(seed, "split"));
    rng.shuffle(order);
    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * n));
    const auto n_val = static_cast<std::size_t>(std::floor(validation_fraction * n));
    SplitIndices split;
    split.train.assign(order.begin(), order.begin() + static_cast<long>(n_train));
    split.validation.assign(order.begin() + static_cast<long>(n_train),
                            order.begin() + static_cast<long>(n_train + n_val));
    split.test.assign(order.begin() + static_cast<long>(n_train + n_val), order.end());
    return split;
}

// ---------------------------------------------------------------------------
// Model handle
// ---------------------------------------------------------------------------

Model::Kind Model::parse_kind(const std::string &name) {
    if (name == "rule") {
        return Kind::Rule;
    }
    if (name == "forest") {
        return Kind::Forest;
    }
    if (name == "condip") {
        return Kind::Condip;
    }
    throw ConfigError("unknown model '" + name + "' (expected rule|forest|condip)");
}

const char *Model::kind_name(Kind kind) {
    switch (kind) {
    case Kind::Rule:
        return "rule";
    case Kind::Forest:
        return "forest";
    case Kind::Condip:
        return "condip";
    }
    return "?";
}

double Model::predict_proba(const CallHistory &history, Date as_of,
                            const SequenceFeatures &features) {
    switch (kind) {
    case Kind::Rule:
        return rule_predict_high_risk(history, as_of, rule) ? 1.0 : 0.0;
    case Kind::Forest:
        return forest.predict_proba(features.static_with_scalars());
    case Kind::Condip:
        return condip_predict(condip, features);
    }
    throw Error("Model::predict_proba: bad kind");
}

// ---------------------------------------------------------------------------
// Grouping and cluster model
// ---------------------------------------------------------------------------

long group_key(const BeneficiaryProfile &profile, const GroupingConfig &config) {
    long key = 0;
    if (config.by_education) {
        key = key * 64 + profile.education_level;
    }
    if (config.by_income) {
        key = key * 64 + profile.income_group;
    }
    if (config.by_phone_owner) {
        key = key * 64 + profile.phone_owner;
    }
    if (config.by_age_bucket) {
        key = key * 64 + profile.age / std::max(1, config.age_bucket_years);
    }
    return key;
}

TransitionCounts beneficiary_transition_counts(const CallHistory &history, Date registration,
                                               const std::vector<InterventionRecord> &own) {
    const std::vector<BehaviorState> states = monthly_states(history, registration);
    if (states.size() < 2) {
        return {};
    }
    const std::vector<bool> intervened =
        call_intervention_months(own, registration, static_cast<int>(states.size()));
    return count_tuples(build_tuples(states, intervened));
}

int ClusterModel::resolve_cluster(const BeneficiaryProfile &profile) const {
    auto it = group_to_cluster.find(group_key(profile, config.grouping));
    return it != group_to_cluster.end() ? it->second : fallback_cluster;
}

ClusterModel fit_cluster_model(const std::vector<BeneficiaryProfile> &profiles,
                               const std::map<BeneficiaryId, CallHistory> &histories,
                               const std::vector<InterventionRecord> &interventions,
                               const ClusterModelConfig &config) {
    if (profiles.empty()) {
        throw DataError("fit_cluster_model: no beneficiaries");
    }

    std::unordered_map<BeneficiaryId, std::vector<InterventionRecord>> per_beneficiary;
    for (const InterventionRecord &record : interventions) {
        per_beneficiary[record.beneficiary_id].push_back(record);
    }

    // Pool transition counts per demographic group.
    std::map<long, TransitionCounts> group_counts; // ordered for determinism
    std::vector<TransitionCounts> member_counts(profiles.size());
    std::vector<long> member_group(profiles.size());
    static const std::vector<InterventionRecord> kNone;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        const BeneficiaryProfile &profile = profiles[i];
        member_group[i] = group_key(profile, config.grouping);
        auto hist = histories.find(profile.beneficiary_id);
        if (hist != histories.end()) {
            auto own = per_beneficiary.find(profile.beneficiary_id);
            member_counts[i] = beneficiary_transition_counts(
                hist->second, profile.registration_date,
                own != per_beneficiary.end() ? own->second : kNone);
        }
        group_counts[member_group[i]] += member_counts[i];
    }

    std::vector<long> group_keys;
    std::vector<std::vector<double>> group_points;
    for (const auto &[key, counts] : group_counts) {
        group_keys.push_back(key);
        const MdpParams params = estimate_params(counts, config.alpha, config.discount);
        const std::array<double, 4> stay = params.stay_probabilities();
        group_points.emplace_back(stay.begin(), stay.end());
    }

    const int k = std::min<int>(config.n_clusters, static_cast<int>(group_points.size()));
    const KMeansResult clustering =
        kmeans(group_points, k, derive_seed(config.seed, "cluster.kmeans"));

    ClusterModel model;
    model.config = config;
    model.centroids = clustering.centroids;
    for (std::size_t g = 0; g < group_keys.size(); ++g) {
        model.group_to_cluster[group_keys[g]] = clustering.assignment[g];
    }

    // Re-pool member counts per cluster and estimate the shared parameters.
    std::vector<int> member_cluster(profiles.size());
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        member_cluster[i] = model.group_to_cluster.at(member_group[i]);
    }
    model.cluster_params =
        pool_cluster_params(member_cluster, member_counts, k, config.alpha, config.discount);

    // Whittle index per cluster and state.
    std::vector<long> cluster_transitions(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        for (int s = 0; s < 2; ++s) {
            for (int a = 0; a < 2; ++a) {
                cluster_transitions[static_cast<std::size_t>(member_cluster[i])] +=
                    member_counts[i].row_total(static_cast<BehaviorState>(s),
                                               static_cast<Action>(a));
            }
        }
    }
    model.whittle.resize(static_cast<std::size_t>(k));
    model.whittle_warning.assign(static_cast<std::size_t>(k), false);
    for (int c = 0; c < k; ++c) {
        for (int s = 0; s < 2; ++s) {
            const WhittleResult result =
                whittle_index(model.cluster_params[static_cast<std::size_t>(c)],
                              static_cast<BehaviorState>(s), config.whittle_tol, config.vi_tol);
            model.whittle[static_cast<std::size_t>(c)][static_cast<std::size_t>(s)] = result.value;
            if (result.bracket_warning) {
                model.whittle_warning[static_cast<std::size_t>(c)] = true;
            }
        }
    }
    model.fallback_cluster = static_cast<int>(
        std::max_element(cluster_transitions.begin(), cluster_transitions.end()) -
        cluster_transitions.begin());
    return model;
}

// ---------------------------------------------------------------------------
// Planning
// ---------------------------------------------------------------------------

PlanOutput run_plan(const std::vector<BeneficiaryProfile> &profiles,
                    const std::map<BeneficiaryId, CallHistory> &histories,
                    const std::vector<InterventionRecord> &interventions, Model &predictor,
                    const PlanConfig &config) {
    if (predictor.task != Task::LongTerm) {
        throw ConfigError("run_plan: the pool filter needs a long-term model");
    }

    Date as_of{};
    if (config.as_of) {
        as_of = *config.as_of;
    } else {
        bool any = false;
        for (const auto &[id, history] : histories) {
            if (!history.empty() && (!any || history.last_date() >= as_of)) {
                as_of = history.last_date();
                any = true;
            }
        }
        if (!any) {
            throw DataError("run_plan: no call data");
        }
        as_of += std::chrono::days{1};
    }

    // Intervention pool: predicted LLTE with at least the minimum engagement
    // in the first sixty days.
    std::vector<const BeneficiaryProfile *> pool;
    FeatureConfig features_config;
    features_config.gap_sentinel_days = kLongTermFeatureDays + 1;
    for (const BeneficiaryProfile &profile : profiles) {
        auto it = histories.find(profile.beneficiary_id);
        if (it == histories.end() || it->second.empty()) {
            continue;
        }
        const DateRange first60{profile.registration_date,
                                profile.registration_date + std::chrono::days{60}};
        if (count_events(it->second, first60).engagements <
            config.min_engagements_first_60_days) {
            continue;
        }
        const Date feature_end = profile.registration_date + std::chrono::days{kLongTermFeatureDays};
        SequenceFeatures features;
        features.static_features = encode_profile(profile);
        features.dynamic = build_sequence(it->second, feature_end, kLongTermFeatureDays,
                                          features_config.engagement_seconds);
        features.scalar_calls = extract_scalar_features(it->second, feature_end,
                                                        features_config.gap_sentinel_days);
        if (predictor.predict_proba(it->second, feature_end, features) >= 0.5) {
            pool.push_back(&profile);
        }
    }
    if (pool.empty()) {
        throw DataError("empty intervention pool");
    }

    std::vector<BeneficiaryProfile> pool_profiles;
    pool_profiles.reserve(pool.size());
    for (const BeneficiaryProfile *p : pool) {
        pool_profiles.push_back(*p);
    }

    PlanOutput output;
    output.as_of = as_of;
    output.pool_size = pool.size();
    output.model = fit_cluster_model(pool_profiles, histories, interventions, config.cluster);

    // Current state: E2C over the month before as_of.
    std::vector<BeneficiaryIndex> indices;
    indices.reserve(pool.size());
    const DateRange last_month{as_of - std::chrono::days{30}, as_of};
    for (const BeneficiaryProfile &profile : pool_profiles) {
        const CallHistory &history = histories.at(profile.beneficiary_id);
        const EventCounts counts = count_events(history, last_month);
        const bool engaging =
            counts.connections > 0 &&
            static_cast<double>(counts.engagements) / counts.connections >= 0.5;
        BeneficiaryIndex entry;
        entry.beneficiary_id = profile.beneficiary_id;
        entry.cluster = output.model.resolve_cluster(profile);
        entry.state = engaging ? BehaviorState::Engaging : BehaviorState::NotEngaging;
        entry.whittle = output.model.index_for(entry.cluster, entry.state);
        indices.push_back(entry);
    }

    const PlanResult plan = plan_top_k(indices, config.k);
    std::set<BeneficiaryId> selected(plan.selected.begin(), plan.selected.end());

    // Selection order first, then the rest of the pool by descending index.
    std::sort(indices.begin(), indices.end(),
              [](const BeneficiaryIndex &a, const BeneficiaryIndex &b) {
                  if (a.whittle != b.whittle) {
                      return a.whittle > b.whittle;
                  }
                  return a.beneficiary_id < b.beneficiary_id;
              });
    output.rows.reserve(indices.size());
    for (const BeneficiaryIndex &entry : indices) {
        output.rows.push_back(PlanRow{entry.beneficiary_id, entry.cluster, entry.state,
                                      entry.whittle, selected.count(entry.beneficiary_id) > 0});
    }
    return output;
}

std::uint64_t hash_text(const std::string &text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string provenance_line(std::uint64_t seed, const std::string &config_echo) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(hash_text(config_echo)));
    return std::string("tool=") + kToolVersion + " seed=" + std::to_string(seed) +
           " config=" + buf;
}

} // namespace callplan

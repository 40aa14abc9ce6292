#pragma once

#include "callplan/calllog.hpp"
#include "callplan/rmab.hpp"

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace callplan {

// ---------------------------------------------------------------------------
// Synthetic cohorts with known behavior dynamics, for desk-scale evaluation
// of the prediction and planning pipeline against ground truth.
// ---------------------------------------------------------------------------

/// One behavior archetype: ground-truth monthly state dynamics plus call
/// behavior. `education_tilt`, when non-empty, multiplies the mixture weight
/// per education level so planted heterogeneity is discoverable from the
/// demographic grouping key.
struct ArchetypeSpec {
    std::string name;
    MdpParams behavior;
    double connection_prob = 0.6; // per scheduled call
    double initial_engaging_prob = 0.5;
    double weight = 1.0;
    std::vector<double> education_tilt;
};

struct DemographicSpec {
    std::vector<double> education_weights = std::vector<double>(8, 1.0);
    std::vector<double> income_weights = std::vector<double>(6, 1.0);
    std::vector<double> phone_owner_weights = {3.0, 2.0, 1.0};
    std::vector<double> language_weights = {4.0, 3.0, 2.0, 1.0};
    std::vector<double> call_slot_weights = std::vector<double>(5, 1.0);
    int age_min = 18, age_max = 45;
    int gestation_min_weeks = 4, gestation_max_weeks = 36;
};

struct CohortSpec {
    int n_beneficiaries = 1000;
    Date registration_date{};
    BeneficiaryId first_id = 1;
    DemographicSpec demographics;
    std::vector<ArchetypeSpec> archetypes;
    int weeks = 26;
    std::uint64_t seed = 1;
};

struct Cohort {
    std::vector<BeneficiaryProfile> profiles;
    std::vector<int> archetype; // per beneficiary, index into archetypes
    std::vector<ArchetypeSpec> archetypes;
    Date registration_date{};

    std::size_t size() const { return profiles.size(); }
};

/// Seeded sampling of profiles and archetype memberships. Ground truth is
/// retained on the cohort for oracle tests. Throws ConfigError on degenerate
/// distributions (weights not summing to 1, probabilities outside [0,1]).
Cohort generate_cohort(const CohortSpec &spec);

// ---------------------------------------------------------------------------
// Program simulation
// ---------------------------------------------------------------------------

struct SimParams {
    int attempts_per_week = 2;            // program cadence cap
    double engage_prob_engaging = 0.8;    // P(connection engages | Engaging month)
    double engage_prob_not_engaging = 0.2;
    double call_success_prob = 0.452;     // field success rate of call interventions
    double sms_effect_multiplier = 0.3;   // SMS transition = A + mult (I - A)
    double retry_prob = 0.5;              // chance a connected call shows a failed retry
};

struct SimOutcome {
    std::vector<CallRecord> calls; // includes retry records, pre-dedup
    std::vector<InterventionRecord> interventions;
    std::vector<std::vector<BehaviorState>> true_states; // per beneficiary, per month
    std::vector<BehaviorState> final_states; // state entering the month after the last one
    int start_month = 0;
    int n_months = 0;
};

/// Decides the intervention for one beneficiary at the start of a month.
/// `states_so_far` holds the true states of earlier months in this phase.
using InterventionPolicy = std::function<std::optional<InterventionKind>(
    std::size_t beneficiary_index, int month, const std::vector<BehaviorState> &states_so_far)>;

/// Simulates `total_days` of the call program from day `start_day` (a
/// multiple of 30; dates offset from the cohort registration date). Monthly
/// states evolve by each beneficiary's ground-truth transitions under the
/// action the policy produced: a successful call intervention acts as
/// Intervene, an SMS blends the two transition rows by sms_effect_multiplier,
/// and a failed call acts as Abstain. Within a month each connection engages
/// with the state-dependent probability. `initial_states`, when given,
/// overrides the per-archetype initial draw (used to continue a simulation).
SimOutcome simulate_phase(const Cohort &cohort, const SimParams &params, std::uint64_t seed,
                          int total_days, int start_day,
                          const std::vector<BehaviorState> *initial_states,
                          const InterventionPolicy &policy);

/// Convenience wrapper: fixed planned interventions, full phase from day 0
/// over `weeks` weeks.
struct PlannedIntervention {
    std::size_t beneficiary_index = 0;
    int month = 0;
    InterventionKind kind = InterventionKind::Call;
};
SimOutcome simulate_program(const Cohort &cohort, const SimParams &params, std::uint64_t seed,
                            int weeks, const std::vector<PlannedIntervention> &interventions);

/// E2C per beneficiary over a day range (relative to registration); ids with
/// zero connections in the range are absent.
std::map<BeneficiaryId, double> period_e2c(const SimOutcome &outcome, const Cohort &cohort,
                                           int from_day, int to_day);

// ---------------------------------------------------------------------------
// PSQIS-style four-arm intervention study
// ---------------------------------------------------------------------------

enum class Arm : int { Control = 0, Sms = 1, Call = 2, Hybrid = 3 };

inline const char *arm_name(Arm arm) {
    switch (arm) {
    case Arm::Control:
        return "control";
    case Arm::Sms:
        return "sms";
    case Arm::Call:
        return "call";
    case Arm::Hybrid:
        return "hybrid";
    }
    return "?";
}

/// Stratified assignment: beneficiaries are bucketed by demographic key and
/// dealt round-robin within each bucket after a seeded shuffle, so arms stay
/// demographically balanced.
std::vector<int> assign_arms(const Cohort &cohort, int n_arms, std::uint64_t seed);

struct PsqisConfig {
    int pre_months = 2;
    int post_months = 4;
    int hybrid_wait_months = 2; // call non-responders this many months after the SMS
    std::uint64_t seed = 11;
};

struct PsqisResult {
    std::array<long, 4> arm_sizes{};
    std::array<long, 4> evaluable{}; // with >= 1 post-period connection
    std::array<long, 4> high_engagement{};
    std::array<double, 4> high_engagement_pct{};
    SimOutcome outcome;
    std::vector<int> arm; // per beneficiary
};

/// Runs the four arms over one cohort: control does nothing, SMS sends one
/// message at the intervention month, call intervenes once, hybrid sends the
/// SMS then calls beneficiaries with no Engaging month within the wait
/// window. Reports the share of each arm with post-period E2C > 0.5.
PsqisResult run_psqis(const Cohort &cohort, const SimParams &params, const PsqisConfig &config);

// ---------------------------------------------------------------------------
// Retrospective policy evaluation (top-k overlap, call vs control)
// ---------------------------------------------------------------------------

/// Selection policies for retrospective evaluation. NoOp still produces a
/// measurement set (lowest ids) but intervenes on nobody, so its call and
/// control overlaps agree in expectation.
enum class PlanPolicy { Whittle, Random, MyopicNeFirst, NoOp };

const char *plan_policy_name(PlanPolicy policy);
std::optional<PlanPolicy> parse_plan_policy(const std::string &name);

struct PolicyEvalConfig {
    int pre_months = 2;
    int post_months = 4;
    int k = 100;
    int runs = 50;
    std::uint64_t seed = 17;
    /// 0 plans once on the first intervention day. R > 0 is exploratory:
    /// call-arm intervention epochs repeat every R months and the measured
    /// top-k comes from the ranking at the last epoch.
    int replan_interval_months = 0;
};

struct PolicyEvalRow {
    PlanPolicy policy = PlanPolicy::Whittle;
    double call_mean = 0.0, call_std = 0.0;
    double control_mean = 0.0, control_std = 0.0;
    std::vector<double> call_samples, control_samples;
};

struct ClusterModel; // defined in pipeline.hpp

/// For each seeded run: a fresh cohort, a pre-period with no interventions,
/// and a call/control split. Each policy selects its top-k per arm; the
/// call-arm selection receives one call intervention (per planning epoch),
/// the control arm none. Reported is the percentage overlap of the selection
/// with the arm's post-period high-engagement set, mean and sample standard
/// deviation over runs.
std::vector<PolicyEvalRow> evaluate_policy(const CohortSpec &cohort_spec, const SimParams &params,
                                           const ClusterModel &model,
                                           const std::vector<PlanPolicy> &policies,
                                           const PolicyEvalConfig &config);

} // namespace callplan

#include "callplan/sim.hpp"

#include "callplan/error.hpp"
#include "callplan/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace callplan {

// ---------------------------------------------------------------------------
// Cohort generation
// ---------------------------------------------------------------------------

namespace {

void check_weights(const std::vector<double> &weights, std::size_t expected_size,
                   const std::string &field) {
    if (weights.size() != expected_size) {
        throw ConfigError("cohort spec: field '" + field + "' needs " +
                          std::to_string(expected_size) + " weights, got " +
                          std::to_string(weights.size()));
    }
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0 || !std::isfinite(w)) {
            throw ConfigError("cohort spec: field '" + field + "' has a negative weight");
        }
        total += w;
    }
    if (total <= 0.0) {
        throw ConfigError("cohort spec: field '" + field + "' weights sum to zero");
    }
}

void check_probability(double p, const std::string &field) {
    if (p < 0.0 || p > 1.0 || !std::isfinite(p)) {
        throw ConfigError("cohort spec: field '" + field + "' must be a probability in [0, 1]");
    }
}

void validate_spec(const CohortSpec &spec) {
    if (spec.n_beneficiaries < 0) {
        throw ConfigError("cohort spec: field 'n_beneficiaries' must be >= 0");
    }
    const ProfileDomains domains;
    const DemographicSpec &d = spec.demographics;
    check_weights(d.education_weights, static_cast<std::size_t>(domains.education_levels),
                  "education_weights");
    check_weights(d.income_weights, static_cast<std::size_t>(domains.income_groups),
                  "income_weights");
    check_weights(d.phone_owner_weights, static_cast<std::size_t>(domains.phone_owners),
                  "phone_owner_weights");
    check_weights(d.language_weights, static_cast<std::size_t>(domains.languages),
                  "language_weights");
    check_weights(d.call_slot_weights, static_cast<std::size_t>(domains.call_slots),
                  "call_slot_weights");
    if (d.age_min > d.age_max || d.age_min < domains.age_min || d.age_max > domains.age_max) {
        throw ConfigError("cohort spec: field 'age' range is outside the profile domain");
    }
    if (d.gestation_min_weeks > d.gestation_max_weeks || d.gestation_min_weeks < 0 ||
        d.gestation_max_weeks > domains.gestation_max_weeks) {
        throw ConfigError("cohort spec: field 'gestation' range is outside the profile domain");
    }
    if (spec.n_beneficiaries > 0) {
        if (spec.archetypes.empty()) {
            throw ConfigError("cohort spec: field 'archetypes' is empty");
        }
        double total = 0.0;
        for (const ArchetypeSpec &archetype : spec.archetypes) {
            if (archetype.weight < 0.0) {
                throw ConfigError("cohort spec: field 'archetypes.weight' is negative");
            }
            total += archetype.weight;
            check_probability(archetype.connection_prob, "archetypes.connection_prob");
            check_probability(archetype.initial_engaging_prob,
                              "archetypes.initial_engaging_prob");
            archetype.behavior.validate();
            if (!archetype.education_tilt.empty()) {
                check_weights(archetype.education_tilt,
                              static_cast<std::size_t>(domains.education_levels),
                              "archetypes.education_tilt");
            }
        }
        if (std::fabs(total - 1.0) > 1e-9) {
            throw ConfigError("cohort spec: field 'archetypes.weight' must sum to 1");
        }
    }
}

} // namespace

Cohort generate_cohort(const CohortSpec &spec) {
    validate_spec(spec);
    Cohort cohort;
    cohort.archetypes = spec.archetypes;
    cohort.registration_date = spec.registration_date;
    cohort.profiles.reserve(static_cast<std::size_t>(spec.n_beneficiaries));
    cohort.archetype.reserve(static_cast<std::size_t>(spec.n_beneficiaries));

    const DemographicSpec &d = spec.demographics;
    for (int i = 0; i < spec.n_beneficiaries; ++i) {
        Rng rng(derive_seed(spec.seed, "cohort.member", static_cast<std::uint64_t>(i)));
        BeneficiaryProfile profile;
        profile.beneficiary_id = spec.first_id + i;
        profile.age =
            d.age_min + static_cast<int>(rng.next_index(
                            static_cast<std::uint64_t>(d.age_max - d.age_min + 1)));
        profile.education_level = static_cast<int>(rng.pick_weighted(d.education_weights));
        profile.income_group = static_cast<int>(rng.pick_weighted(d.income_weights));
        profile.phone_owner = static_cast<int>(rng.pick_weighted(d.phone_owner_weights));
        profile.language = static_cast<int>(rng.pick_weighted(d.language_weights));
        profile.call_slot = static_cast<int>(rng.pick_weighted(d.call_slot_weights));
        profile.gestation_age_weeks =
            d.gestation_min_weeks +
            static_cast<int>(rng.next_index(static_cast<std::uint64_t>(
                d.gestation_max_weeks - d.gestation_min_weeks + 1)));
        profile.registration_date = spec.registration_date;

        std::vector<double> weights;
        weights.reserve(spec.archetypes.size());
        for (const ArchetypeSpec &archetype : spec.archetypes) {
            double w = archetype.weight;
            if (!archetype.education_tilt.empty()) {
                w *= archetype.education_tilt[static_cast<std::size_t>(profile.education_level)];
            }
            weights.push_back(w);
        }
        cohort.archetype.push_back(static_cast<int>(rng.pick_weighted(weights)));
        cohort.profiles.push_back(profile);
    }
    return cohort;
}

// ---------------------------------------------------------------------------
// Program simulation
// ---------------------------------------------------------------------------

SimOutcome simulate_phase(const Cohort &cohort, const SimParams &params, std::uint64_t seed,
                          int total_days, int start_day,
                          const std::vector<BehaviorState> *initial_states,
                          const InterventionPolicy &policy) {
    if (start_day % 30 != 0 || start_day < 0) {
        throw Error("simulate_phase: start_day must be a non-negative multiple of 30");
    }
    if (params.attempts_per_week < 0 || params.attempts_per_week > 2) {
        throw ConfigError("sim params: attempts_per_week must be 0, 1 or 2");
    }
    if (initial_states && initial_states->size() != cohort.size()) {
        throw Error("simulate_phase: initial_states size mismatch");
    }

    SimOutcome outcome;
    outcome.start_month = start_day / 30;
    outcome.n_months = (total_days + 29) / 30;
    outcome.true_states.resize(cohort.size());
    SimOutcome &out = outcome;
    std::vector<BehaviorState> finals(cohort.size(), BehaviorState::NotEngaging);

    // Attempt days within a week: two per week on fixed offsets.
    const int attempt_offsets[2] = {1, 4};

    for (std::size_t i = 0; i < cohort.size(); ++i) {
        const BeneficiaryProfile &profile = cohort.profiles[i];
        const ArchetypeSpec &archetype =
            cohort.archetypes[static_cast<std::size_t>(cohort.archetype[i])];
        Rng rng(derive_seed(seed, "sim.beneficiary", static_cast<std::uint64_t>(i)));

        BehaviorState state =
            initial_states ? (*initial_states)[i]
                           : (rng.bernoulli(archetype.initial_engaging_prob)
                                  ? BehaviorState::Engaging
                                  : BehaviorState::NotEngaging);

        for (int m = 0; m < out.n_months; ++m) {
            const int month_abs = out.start_month + m;

            // Intervention decision at the month start; behavior known only
            // through the previous month.
            Action action = Action::Abstain;
            bool sms_this_month = false;
            if (policy) {
                const std::optional<InterventionKind> kind =
                    policy(i, month_abs, out.true_states[i]);
                if (kind == InterventionKind::Call) {
                    const bool success = rng.bernoulli(params.call_success_prob);
                    out.interventions.push_back(InterventionRecord{
                        profile.beneficiary_id,
                        cohort.registration_date + std::chrono::days{month_abs * 30},
                        InterventionKind::Call, success});
                    if (success) {
                        action = Action::Intervene;
                    }
                } else if (kind == InterventionKind::Sms) {
                    out.interventions.push_back(InterventionRecord{
                        profile.beneficiary_id,
                        cohort.registration_date + std::chrono::days{month_abs * 30},
                        InterventionKind::Sms, true});
                    sms_this_month = true;
                }
            }
            out.true_states[i].push_back(state);

            // Calls of this month.
            const int month_first_day = month_abs * 30;
            const int month_end_day = std::min(start_day + total_days, month_first_day + 30);
            const double engage_prob = state == BehaviorState::Engaging
                                           ? params.engage_prob_engaging
                                           : params.engage_prob_not_engaging;
            for (int day = month_first_day; day < month_end_day; ++day) {
                bool is_attempt_day = false;
                for (int a = 0; a < params.attempts_per_week; ++a) {
                    is_attempt_day |= day % 7 == attempt_offsets[a];
                }
                if (!is_attempt_day) {
                    continue;
                }
                CallRecord record;
                record.beneficiary_id = profile.beneficiary_id;
                record.attempt_group = profile.beneficiary_id * 100000 + day;
                record.call_date = cohort.registration_date + std::chrono::days{day};
                record.message_id =
                    std::min(profile.gestation_age_weeks + day / 7, 141);
                const bool connected = rng.bernoulli(archetype.connection_prob);
                if (connected) {
                    const bool engaged = rng.bernoulli(engage_prob);
                    record.success = true;
                    record.duration_seconds =
                        engaged ? 31.0 + static_cast<double>(rng.next_index(150))
                                : 1.0 + static_cast<double>(rng.next_index(30));
                    if (rng.bernoulli(params.retry_prob)) {
                        CallRecord failed = record;
                        failed.success = false;
                        failed.duration_seconds = 0.0;
                        out.calls.push_back(failed);
                    }
                    out.calls.push_back(record);
                } else {
                    record.success = false;
                    record.duration_seconds = 0.0;
                    out.calls.push_back(record); // first try
                    out.calls.push_back(record); // retry, also unanswered
                }
            }

            // Transition to next month's state.
            const auto s = static_cast<int>(state);
            double to_engaging;
            if (sms_this_month && action == Action::Abstain) {
                const double passive = archetype.behavior.p[s][0][0];
                const double active = archetype.behavior.p[s][1][0];
                to_engaging = passive + params.sms_effect_multiplier * (active - passive);
            } else {
                to_engaging = archetype.behavior.p[s][static_cast<int>(action)][0];
            }
            state = rng.bernoulli(to_engaging) ? BehaviorState::Engaging
                                               : BehaviorState::NotEngaging;
        }
        finals[i] = state;
    }
    outcome.final_states = std::move(finals);
    return outcome;
}

SimOutcome simulate_program(const Cohort &cohort, const SimParams &params, std::uint64_t seed,
                            int weeks, const std::vector<PlannedIntervention> &interventions) {
    std::map<std::pair<std::size_t, int>, InterventionKind> planned;
    for (const PlannedIntervention &p : interventions) {
        planned[{p.beneficiary_index, p.month}] = p.kind;
    }
    InterventionPolicy policy = [&planned](std::size_t index, int month,
                                           const std::vector<BehaviorState> &)
        -> std::optional<InterventionKind> {
        auto it = planned.find({index, month});
        if (it == planned.end()) {
            return std::nullopt;
        }
        return it->second;
    };
    return simulate_phase(cohort, params, seed, weeks * 7, 0, nullptr, policy);
}

std::map<BeneficiaryId, double> period_e2c(const SimOutcome &outcome, const Cohort &cohort,
                                           int from_day, int to_day) {
    const DateRange window{cohort.registration_date + std::chrono::days{from_day},
                           cohort.registration_date + std::chrono::days{to_day}};
    std::map<BeneficiaryId, double> ratios;
    for (const auto &[id, history] : build_histories(outcome.calls)) {
        const EventCounts counts = count_events(history, window);
        if (counts.connections > 0) {
            ratios[id] = static_cast<double>(counts.engagements) / counts.connections;
        }
    }
    return ratios;
}

// ---------------------------------------------------------------------------
// Arm assignment and PSQIS
// ---------------------------------------------------------------------------

std::vector<int> assign_arms(const Cohort &cohort, int n_arms, std::uint64_t seed) {
    if (n_arms < 1) {
        throw ConfigError("assign_arms: n_arms must be >= 1");
    }
    std::map<long, std::vector<std::size_t>> strata;
    const GroupingConfig grouping; // default demographic key
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        strata[group_key(cohort.profiles[i], grouping)].push_back(i);
    }
    std::vector<int> arm(cohort.size(), 0);
    std::size_t dealt = 0;
    for (auto &[key, members] : strata) {
        Rng rng(derive_seed(seed, "arms.stratum", static_cast<std::uint64_t>(key)));
        rng.shuffle(members);
        for (std::size_t member : members) {
            arm[member] = static_cast<int>(dealt++ % static_cast<std::size_t>(n_arms));
        }
    }
    return arm;
}

PsqisResult run_psqis(const Cohort &cohort, const SimParams &params, const PsqisConfig &config) {
    if (cohort.size() == 0) {
        throw DataError("run_psqis: empty cohort");
    }
    PsqisResult result;
    result.arm = assign_arms(cohort, 4, derive_seed(config.seed, "psqis.arms"));

    const int t0 = config.pre_months;
    const int months = config.pre_months + 1 + config.post_months;
    const int wait = config.hybrid_wait_months;

    InterventionPolicy policy =
        [&](std::size_t index, int month,
            const std::vector<BehaviorState> &states) -> std::optional<InterventionKind> {
        switch (static_cast<Arm>(result.arm[index])) {
        case Arm::Control:
            return std::nullopt;
        case Arm::Sms:
            return month == t0 ? std::optional(InterventionKind::Sms) : std::nullopt;
        case Arm::Call:
            return month == t0 ? std::optional(InterventionKind::Call) : std::nullopt;
        case Arm::Hybrid:
            if (month == t0) {
                return InterventionKind::Sms;
            }
            if (month == t0 + wait) {
                // Call beneficiaries with no Engaging month since the SMS.
                bool responded = false;
                for (std::size_t m = static_cast<std::size_t>(t0) + 1; m < states.size(); ++m) {
                    responded |= states[m] == BehaviorState::Engaging;
                }
                if (!responded) {
                    return InterventionKind::Call;
                }
            }
            return std::nullopt;
        }
        return std::nullopt;
    };

    result.outcome = simulate_phase(cohort, params, derive_seed(config.seed, "psqis.sim"),
                                    months * 30, 0, nullptr, policy);

    const auto post_ratio = period_e2c(result.outcome, cohort, (t0 + 1) * 30, months * 30);
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        const auto a = static_cast<std::size_t>(result.arm[i]);
        ++result.arm_sizes[a];
        auto it = post_ratio.find(cohort.profiles[i].beneficiary_id);
        if (it == post_ratio.end()) {
            continue; // zero connections in the post period
        }
        ++result.evaluable[a];
        if (it->second > 0.5) {
            ++result.high_engagement[a];
        }
    }
    for (std::size_t a = 0; a < 4; ++a) {
        result.high_engagement_pct[a] =
            result.evaluable[a] > 0
                ? 100.0 * static_cast<double>(result.high_engagement[a]) /
                      static_cast<double>(result.evaluable[a])
                : 0.0;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Policy evaluation
// ---------------------------------------------------------------------------

const char *plan_policy_name(PlanPolicy policy) {
    switch (policy) {
    case PlanPolicy::Whittle:
        return "whittle";
    case PlanPolicy::Random:
        return "random";
    case PlanPolicy::MyopicNeFirst:
        return "myopic-ne-first";
    case PlanPolicy::NoOp:
        return "no-op";
    }
    return "?";
}

std::optional<PlanPolicy> parse_plan_policy(const std::string &name) {
    for (PlanPolicy p : {PlanPolicy::Whittle, PlanPolicy::Random, PlanPolicy::MyopicNeFirst,
                         PlanPolicy::NoOp}) {
        if (name == plan_policy_name(p)) {
            return p;
        }
    }
    return std::nullopt;
}

namespace {

struct MemberInfo {
    std::size_t index = 0;
    BeneficiaryId id = 0;
    BehaviorState state = BehaviorState::NotEngaging;
    double whittle = 0.0;
};

std::vector<BeneficiaryId> select_top_k(const std::vector<MemberInfo> &members,
                                        PlanPolicy policy, int k, Rng &rng) {
    std::vector<MemberInfo> order = members;
    switch (policy) {
    case PlanPolicy::Whittle: {
        std::vector<BeneficiaryIndex> indices;
        indices.reserve(order.size());
        for (const MemberInfo &m : order) {
            indices.push_back(BeneficiaryIndex{m.id, 0, m.state, m.whittle});
        }
        return plan_top_k(indices, k).selected;
    }
    case PlanPolicy::Random:
        rng.shuffle(order);
        break;
    case PlanPolicy::MyopicNeFirst:
        std::sort(order.begin(), order.end(), [](const MemberInfo &a, const MemberInfo &b) {
            const int a_ne = a.state == BehaviorState::NotEngaging ? 1 : 0;
            const int b_ne = b.state == BehaviorState::NotEngaging ? 1 : 0;
            if (a_ne != b_ne) {
                return a_ne > b_ne;
            }
            return a.id < b.id;
        });
        break;
    case PlanPolicy::NoOp:
        std::sort(order.begin(), order.end(),
                  [](const MemberInfo &a, const MemberInfo &b) { return a.id < b.id; });
        break;
    }
    std::vector<BeneficiaryId> selected;
    for (std::size_t i = 0; i < order.size() && i < static_cast<std::size_t>(k); ++i) {
        selected.push_back(order[i].id);
    }
    return selected;
}

double sample_mean(const std::vector<double> &xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double> &xs) {
    if (xs.size() < 2) {
        return 0.0;
    }
    const double mean = sample_mean(xs);
    double ss = 0.0;
    for (double x : xs) {
        ss += (x - mean) * (x - mean);
    }
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

} // namespace

std::vector<PolicyEvalRow> evaluate_policy(const CohortSpec &cohort_spec, const SimParams &params,
                                           const ClusterModel &model,
                                           const std::vector<PlanPolicy> &policies,
                                           const PolicyEvalConfig &config) {
    if (config.k > cohort_spec.n_beneficiaries) {
        throw ConfigError("evaluate_policy: k exceeds the cohort size");
    }
    std::vector<PolicyEvalRow> rows(policies.size());
    for (std::size_t p = 0; p < policies.size(); ++p) {
        rows[p].policy = policies[p];
    }

    for (int run = 0; run < config.runs; ++run) {
        CohortSpec spec = cohort_spec;
        spec.seed = derive_seed(config.seed, "eval.cohort", static_cast<std::uint64_t>(run));
        const Cohort cohort = generate_cohort(spec);

        // Pre period with no interventions.
        const SimOutcome pre = simulate_phase(
            cohort, params, derive_seed(config.seed, "eval.pre", static_cast<std::uint64_t>(run)),
            config.pre_months * 30, 0, nullptr, nullptr);

        // State and Whittle index per beneficiary from the call logs seen up
        // to a day boundary.
        auto snapshot = [&](const std::vector<CallRecord> &calls, int through_day) {
            const Date cutoff = cohort.registration_date + std::chrono::days{through_day};
            std::vector<CallRecord> visible;
            for (const CallRecord &record : calls) {
                if (record.call_date < cutoff) {
                    visible.push_back(record);
                }
            }
            const auto histories = build_histories(visible);
            std::vector<MemberInfo> info(cohort.size());
            for (std::size_t i = 0; i < cohort.size(); ++i) {
                info[i].index = i;
                info[i].id = cohort.profiles[i].beneficiary_id;
                BehaviorState state = BehaviorState::NotEngaging;
                auto it = histories.find(info[i].id);
                if (it != histories.end()) {
                    const auto states = monthly_states(it->second, cohort.registration_date);
                    if (!states.empty()) {
                        state = states.back();
                    }
                }
                info[i].state = state;
                info[i].whittle =
                    model.index_for(model.resolve_cluster(cohort.profiles[i]), state);
            }
            return info;
        };

        const int t0 = config.pre_months;
        const std::vector<MemberInfo> at_t0 = snapshot(pre.calls, t0 * 30);

        const std::vector<int> arm = assign_arms(
            cohort, 2, derive_seed(config.seed, "eval.arms", static_cast<std::uint64_t>(run)));
        auto arm_members = [&](const std::vector<MemberInfo> &info, int which) {
            std::vector<MemberInfo> members;
            for (std::size_t i = 0; i < cohort.size(); ++i) {
                if (arm[i] == which) {
                    members.push_back(info[i]);
                }
            }
            return members;
        };
        for (int a = 0; a < 2; ++a) {
            if (static_cast<std::size_t>(config.k) > arm_members(at_t0, a).size()) {
                throw ConfigError("evaluate_policy: k exceeds the arm size");
            }
        }

        const int post_from = (t0 + 1) * 30;
        const int post_to = (t0 + 1 + config.post_months) * 30;

        // The control arm receives nothing; one simulation serves every
        // policy's control column.
        const SimOutcome control_phase = simulate_phase(
            cohort, params,
            derive_seed(config.seed, "eval.post.control", static_cast<std::uint64_t>(run)),
            (1 + config.post_months) * 30, t0 * 30, &pre.final_states, nullptr);
        const auto control_ratio = period_e2c(control_phase, cohort, post_from, post_to);
        std::set<BeneficiaryId> control_high;
        for (const auto &[id, ratio] : control_ratio) {
            if (ratio > 0.5) {
                control_high.insert(id);
            }
        }

        for (std::size_t p = 0; p < policies.size(); ++p) {
            const PlanPolicy policy = policies[p];
            auto select = [&](const std::vector<MemberInfo> &info, int which, int epoch) {
                Rng rng(derive_seed(config.seed, "eval.select",
                                    ((static_cast<std::uint64_t>(run) * 8 + p) * 2 +
                                     static_cast<std::uint64_t>(which)) *
                                            64 +
                                        static_cast<std::uint64_t>(epoch)));
                return select_top_k(arm_members(info, which), policy, config.k, rng);
            };

            // Call arm: the policy's selected beneficiaries are called at
            // each planning epoch; the no-op policy takes no action.
            std::vector<BeneficiaryId> call_selected = select(at_t0, 0, 0);
            std::vector<CallRecord> call_calls;
            const std::uint64_t call_seed = derive_seed(
                config.seed, "eval.post.call", static_cast<std::uint64_t>(run) * 8 + p);
            if (config.replan_interval_months <= 0) {
                std::set<std::size_t> chosen;
                for (std::size_t i = 0; i < cohort.size(); ++i) {
                    if (arm[i] == 0 &&
                        std::find(call_selected.begin(), call_selected.end(),
                                  cohort.profiles[i].beneficiary_id) != call_selected.end()) {
                        chosen.insert(i);
                    }
                }
                InterventionPolicy intervene =
                    [&](std::size_t index, int month,
                        const std::vector<BehaviorState> &) -> std::optional<InterventionKind> {
                    if (policy != PlanPolicy::NoOp && month == t0 && chosen.count(index) > 0) {
                        return InterventionKind::Call;
                    }
                    return std::nullopt;
                };
                const SimOutcome phase =
                    simulate_phase(cohort, params, call_seed, (1 + config.post_months) * 30,
                                   t0 * 30, &pre.final_states, intervene);
                call_calls = phase.calls;
            } else {
                // Exploratory replanning: re-rank and re-select every
                // interval; the measured set is the last epoch's selection.
                std::vector<BehaviorState> current = pre.final_states;
                std::vector<CallRecord> all_calls = pre.calls;
                int epoch_number = 0;
                for (int month = t0; month <= t0 + config.post_months; ++month) {
                    const bool epoch = (month - t0) % config.replan_interval_months == 0;
                    std::set<std::size_t> chosen;
                    if (epoch) {
                        const auto info = snapshot(all_calls, month * 30);
                        call_selected = select(info, 0, epoch_number++);
                        for (std::size_t i = 0; i < cohort.size(); ++i) {
                            if (arm[i] == 0 &&
                                std::find(call_selected.begin(), call_selected.end(),
                                          cohort.profiles[i].beneficiary_id) !=
                                    call_selected.end()) {
                                chosen.insert(i);
                            }
                        }
                    }
                    InterventionPolicy intervene =
                        [&](std::size_t index, int m, const std::vector<BehaviorState> &)
                        -> std::optional<InterventionKind> {
                        if (policy != PlanPolicy::NoOp && epoch && m == month &&
                            chosen.count(index) > 0) {
                            return InterventionKind::Call;
                        }
                        return std::nullopt;
                    };
                    const SimOutcome step = simulate_phase(
                        cohort, params,
                        derive_seed(config.seed, "eval.post.call.step",
                                    (static_cast<std::uint64_t>(run) * 8 + p) * 64 +
                                        static_cast<std::uint64_t>(month)),
                        30, month * 30, &current, intervene);
                    current = step.final_states;
                    all_calls.insert(all_calls.end(), step.calls.begin(), step.calls.end());
                    call_calls.insert(call_calls.end(), step.calls.begin(), step.calls.end());
                }
            }

            SimOutcome call_phase;
            call_phase.calls = std::move(call_calls);
            const auto call_ratio = period_e2c(call_phase, cohort, post_from, post_to);
            std::set<BeneficiaryId> call_high;
            for (const auto &[id, ratio] : call_ratio) {
                if (ratio > 0.5) {
                    call_high.insert(id);
                }
            }

            std::vector<BeneficiaryId> control_selected;
            if (config.replan_interval_months <= 0) {
                control_selected = select(at_t0, 1, 0);
            } else {
                // Last epoch's ranking from the control arm's own logs.
                int last_epoch_month = t0, epoch_number = 0;
                for (int month = t0; month <= t0 + config.post_months; ++month) {
                    if ((month - t0) % config.replan_interval_months == 0) {
                        last_epoch_month = month;
                        ++epoch_number;
                    }
                }
                std::vector<CallRecord> logs = pre.calls;
                logs.insert(logs.end(), control_phase.calls.begin(), control_phase.calls.end());
                control_selected =
                    select(snapshot(logs, last_epoch_month * 30), 1, epoch_number - 1);
            }

            rows[p].call_samples.push_back(overlap_metric(call_selected, call_high));
            rows[p].control_samples.push_back(overlap_metric(control_selected, control_high));
        }
    }

    for (PolicyEvalRow &row : rows) {
        row.call_mean = sample_mean(row.call_samples);
        row.call_std = sample_std(row.call_samples);
        row.control_mean = sample_mean(row.control_samples);
        row.control_std = sample_std(row.control_samples);
    }
    return rows;
}

} // namespace callplan

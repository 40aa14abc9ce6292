#include "callplan/rmab.hpp"

#include "callplan/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace callplan {

TransitionCounts &TransitionCounts::operator+=(const TransitionCounts &other) {
    for (int s = 0; s < 2; ++s) {
        for (int a = 0; a < 2; ++a) {
            for (int n = 0; n < 2; ++n) {
                count[s][a][n] += other.count[s][a][n];
            }
        }
    }
    return *this;
}

std::array<double, 4> MdpParams::stay_probabilities() const {
    using S = BehaviorState;
    using A = Action;
    return {prob(S::Engaging, A::Abstain, S::Engaging),
            prob(S::NotEngaging, A::Abstain, S::NotEngaging),
            prob(S::Engaging, A::Intervene, S::Engaging),
            prob(S::NotEngaging, A::Intervene, S::NotEngaging)};
}

void MdpParams::validate() const {
    if (discount < 0.0 || discount >= 1.0) {
        throw ConfigError("MdpParams: discount must be in [0, 1)");
    }
    for (int s = 0; s < 2; ++s) {
        for (int a = 0; a < 2; ++a) {
            const double row = p[s][a][0] + p[s][a][1];
            if (std::fabs(row - 1.0) > 1e-12 || p[s][a][0] < 0.0 || p[s][a][1] < 0.0) {
                throw ConfigError("MdpParams: transition row does not sum to 1");
            }
        }
    }
}

std::vector<BehaviorState> monthly_states(const CallHistory &history, Date start) {
    std::vector<BehaviorState> states;
    if (history.empty() || history.last_date() < start) {
        return states;
    }
    const Date last = history.last_date();
    for (Date block = start; block <= last; block += std::chrono::days{30}) {
        const DateRange month{block, block + std::chrono::days{30}};
        const EventCounts counts = count_events(history, month);
        const bool engaging =
            counts.connections > 0 &&
            static_cast<double>(counts.engagements) / counts.connections >= 0.5;
        states.push_back(engaging ? BehaviorState::Engaging : BehaviorState::NotEngaging);
    }
    return states;
}

std::vector<bool> call_intervention_months(const std::vector<InterventionRecord> &interventions,
                                           Date start, int n_months, bool successful_only) {
    std::vector<bool> intervened(static_cast<std::size_t>(std::max(0, n_months)), false);
    for (const InterventionRecord &record : interventions) {
        if (record.kind != InterventionKind::Call) {
            continue; // SMS is not an arm pull
        }
        if (successful_only && !record.success) {
            continue;
        }
        const int month = days_between(start, record.date) / 30;
        if (record.date >= start && month < n_months) {
            intervened[static_cast<std::size_t>(month)] = true;
        }
    }
    return intervened;
}

std::vector<TransitionTuple> build_tuples(const std::vector<BehaviorState> &states,
                                          const std::vector<bool> &intervened) {
    std::vector<TransitionTuple> tuples;
    if (states.size() < 2) {
        return tuples;
    }
    tuples.reserve(states.size() - 1);
    for (std::size_t t = 0; t + 1 < states.size(); ++t) {
        const bool active = t < intervened.size() && intervened[t];
        tuples.push_back(TransitionTuple{states[t],
                                         active ? Action::Intervene : Action::Abstain,
                                         states[t + 1]});
    }
    return tuples;
}

TransitionCounts count_tuples(const std::vector<TransitionTuple> &tuples) {
    TransitionCounts counts;
    for (const TransitionTuple &t : tuples) {
        counts.add(t);
    }
    return counts;
}

MdpParams estimate_params(const TransitionCounts &counts, double alpha, double discount) {
    if (alpha < 0.0) {
        throw ConfigError("estimate_params: alpha must be >= 0");
    }
    MdpParams params;
    params.discount = discount;
    for (int s = 0; s < 2; ++s) {
        for (int a = 0; a < 2; ++a) {
            const double total = static_cast<double>(counts.count[s][a][0] + counts.count[s][a][1]);
            if (total == 0.0 && alpha == 0.0) {
                throw UndefinedRowError("estimate_params: no observations for state " +
                                        std::to_string(s) + " action " + std::to_string(a) +
                                        " and alpha = 0");
            }
            const double first = (counts.count[s][a][0] + alpha) / (total + 2.0 * alpha);
            params.p[s][a][0] = first;
            params.p[s][a][1] = 1.0 - first; // row sums to 1 exactly
        }
    }
    return params;
}

std::vector<MdpParams> pool_cluster_params(const std::vector<int> &assignment,
                                           const std::vector<TransitionCounts> &member_counts,
                                           int n_clusters, double alpha, double discount) {
    if (assignment.size() != member_counts.size()) {
        throw Error("pool_cluster_params: assignment/counts size mismatch");
    }
    std::vector<TransitionCounts> pooled(static_cast<std::size_t>(n_clusters));
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] < 0 || assignment[i] >= n_clusters) {
            throw Error("pool_cluster_params: cluster id out of range");
        }
        pooled[static_cast<std::size_t>(assignment[i])] += member_counts[i];
    }
    std::vector<MdpParams> params;
    params.reserve(pooled.size());
    for (const TransitionCounts &counts : pooled) {
        params.push_back(estimate_params(counts, alpha, discount));
    }
    return params;
}

// ---------------------------------------------------------------------------
// Value iteration
// ---------------------------------------------------------------------------

namespace {

/// Stopping threshold guaranteeing ||V - V*||_inf <= tol / 2 by the standard
/// contraction bound. Infinite for discount 0 (one sweep is exact).
double stop_threshold(double tol, double beta) {
    if (beta <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return tol * (1.0 - beta) / (2.0 * beta);
}

constexpr int kMaxSweeps = 2'000'000;

} // namespace

SubsidizedQ value_iteration(const MdpParams &mdp, double subsidy, double tol,
                            std::vector<std::array<double, 2>> *sweep_values) {
    if (mdp.discount < 0.0 || mdp.discount >= 1.0) {
        throw ConfigError("value_iteration: discount must be in [0, 1)");
    }
    if (tol <= 0.0) {
        throw ConfigError("value_iteration: tol must be > 0");
    }
    const double beta = mdp.discount;
    const double threshold = stop_threshold(tol, beta);

    SubsidizedQ result;
    std::array<double, 2> value{0.0, 0.0};
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        std::array<double, 2> next{};
        for (int s = 0; s < 2; ++s) {
            for (int a = 0; a < 2; ++a) {
                const double expected = mdp.p[s][a][0] * value[0] + mdp.p[s][a][1] * value[1];
                result.q[s][a] = state_reward(static_cast<BehaviorState>(s)) +
                                 (a == static_cast<int>(Action::Abstain) ? subsidy : 0.0) +
                                 beta * expected;
            }
            next[static_cast<std::size_t>(s)] = std::max(result.q[s][0], result.q[s][1]);
        }
        const double delta = std::max(std::fabs(next[0] - value[0]), std::fabs(next[1] - value[1]));
        value = next;
        result.sweeps = sweep + 1;
        if (sweep_values) {
            sweep_values->push_back(value);
        }
        if (delta < threshold) {
            break;
        }
    }
    return result;
}

std::array<double, 2> policy_evaluation(const MdpParams &mdp, const std::array<Action, 2> &policy,
                                        double subsidy, double tol,
                                        std::vector<std::array<double, 2>> *sweep_values) {
    if (mdp.discount < 0.0 || mdp.discount >= 1.0) {
        throw ConfigError("policy_evaluation: discount must be in [0, 1)");
    }
    const double beta = mdp.discount;
    const double threshold = stop_threshold(tol, beta);

    std::array<double, 2> value{0.0, 0.0};
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        std::array<double, 2> next{};
        for (int s = 0; s < 2; ++s) {
            const int a = static_cast<int>(policy[static_cast<std::size_t>(s)]);
            const double expected = mdp.p[s][a][0] * value[0] + mdp.p[s][a][1] * value[1];
            next[static_cast<std::size_t>(s)] =
                state_reward(static_cast<BehaviorState>(s)) +
                (a == static_cast<int>(Action::Abstain) ? subsidy : 0.0) + beta * expected;
        }
        const double delta = std::max(std::fabs(next[0] - value[0]), std::fabs(next[1] - value[1]));
        value = next;
        if (sweep_values) {
            sweep_values->push_back(value);
        }
        if (delta < threshold) {
            break;
        }
    }
    return value;
}

WhittleResult whittle_index(const MdpParams &mdp, BehaviorState state, double tol,
                            double vi_tol) {
    mdp.validate();
    const double beta = mdp.discount;
    const double bound = 2.0 / (1.0 - beta) + 1.0;

    auto active_advantage = [&](double subsidy) {
        const SubsidizedQ q = value_iteration(mdp, subsidy, vi_tol);
        return q.action_value(state, Action::Intervene) - q.action_value(state, Action::Abstain);
    };

    double lo = -bound, hi = bound;
    WhittleResult result;
    const double at_lo = active_advantage(lo);
    const double at_hi = active_advantage(hi);
    if (at_lo <= 0.0 || at_hi > 0.0) {
        // No crossing inside the bracket; report the boundary.
        result.bracket_warning = true;
        result.value = at_lo <= 0.0 ? lo : hi;
        return result;
    }
    while (hi - lo >= tol) {
        const double mid = lo + (hi - lo) / 2.0;
        if (active_advantage(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    result.value = lo + (hi - lo) / 2.0;
    return result;
}

// ---------------------------------------------------------------------------
// Planning
// ---------------------------------------------------------------------------

PlanResult plan_top_k(const std::vector<BeneficiaryIndex> &indices, int k) {
    if (k < 0) {
        throw ConfigError("plan_top_k: k must be >= 0");
    }
    std::vector<const BeneficiaryIndex *> order;
    order.reserve(indices.size());
    for (const BeneficiaryIndex &entry : indices) {
        order.push_back(&entry);
    }
    std::sort(order.begin(), order.end(), [](const BeneficiaryIndex *a, const BeneficiaryIndex *b) {
        if (a->whittle != b->whittle) {
            return a->whittle > b->whittle;
        }
        return a->beneficiary_id < b->beneficiary_id;
    });

    PlanResult result;
    result.budget = k;
    const std::size_t take = std::min(order.size(), static_cast<std::size_t>(k));
    result.selected.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        result.selected.push_back(order[i]->beneficiary_id);
    }
    return result;
}

double overlap_metric(const std::vector<BeneficiaryId> &selected,
                      const std::set<BeneficiaryId> &high_engagement) {
    if (selected.empty()) {
        throw Error("overlap_metric: empty selection");
    }
    std::size_t hits = 0;
    for (BeneficiaryId id : selected) {
        if (high_engagement.count(id) > 0) {
            ++hits;
        }
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(selected.size());
}

double discounted_return(const std::vector<BehaviorState> &trajectory, double discount) {
    if (trajectory.empty()) {
        throw Error("discounted_return: empty trajectory");
    }
    double total = 0.0;
    double factor = 1.0;
    for (BehaviorState s : trajectory) {
        total += factor * state_reward(s);
        factor *= discount;
    }
    return total;
}

} // namespace callplan

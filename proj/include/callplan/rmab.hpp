#pragma once

#include "callplan/calllog.hpp"

#include <array>
#include <cstdint>
#include <set>
#include <vector>

namespace callplan {

// ---------------------------------------------------------------------------
// Two-state, two-action restless bandit arms. A beneficiary's month is
// Engaging when the E2C ratio over that month is >= 0.5 (months with zero
// connections are NotEngaging). The active action is a call intervention.
// ---------------------------------------------------------------------------

enum class BehaviorState : int { Engaging = 0, NotEngaging = 1 };
enum class Action : int { Abstain = 0, Intervene = 1 };

inline double state_reward(BehaviorState s) {
    return s == BehaviorState::Engaging ? 1.0 : -1.0;
}

struct TransitionTuple {
    BehaviorState from = BehaviorState::Engaging;
    Action action = Action::Abstain;
    BehaviorState to = BehaviorState::Engaging;
};

struct TransitionCounts {
    long count[2][2][2] = {};

    void add(const TransitionTuple &t) {
        ++count[static_cast<int>(t.from)][static_cast<int>(t.action)][static_cast<int>(t.to)];
    }
    TransitionCounts &operator+=(const TransitionCounts &other);
    long row_total(BehaviorState s, Action a) const {
        return count[static_cast<int>(s)][static_cast<int>(a)][0] +
               count[static_cast<int>(s)][static_cast<int>(a)][1];
    }
};

/// Transition probabilities p[s][a][s'] with reward +1 in Engaging and -1 in
/// NotEngaging, under discount `discount` in [0, 1).
struct MdpParams {
    double p[2][2][2] = {};
    double discount = 0.95;

    double prob(BehaviorState s, Action a, BehaviorState next) const {
        return p[static_cast<int>(s)][static_cast<int>(a)][static_cast<int>(next)];
    }
    /// The four named parameters as a clustering vector:
    /// [P(E,A,E), P(NE,A,NE), P(E,I,E), P(NE,I,NE)].
    std::array<double, 4> stay_probabilities() const;
    void validate() const;
};

/// One state per 30-day block starting at `start`, through the block that
/// contains the last event. Engaging iff the block's E2C ratio >= 0.5; blocks
/// with zero connections are NotEngaging.
std::vector<BehaviorState> monthly_states(const CallHistory &history, Date start);

/// Months (30-day blocks from `start`) that contain a call intervention.
/// Failed call attempts count only when successful_only is false; SMS never
/// counts.
std::vector<bool> call_intervention_months(const std::vector<InterventionRecord> &interventions,
                                           Date start, int n_months,
                                           bool successful_only = true);

/// (s_t, a_t, s_{t+1}) for every consecutive pair; a_t is Intervene iff
/// `intervened[t]` (missing entries mean Abstain).
std::vector<TransitionTuple> build_tuples(const std::vector<BehaviorState> &states,
                                          const std::vector<bool> &intervened);

TransitionCounts count_tuples(const std::vector<TransitionTuple> &tuples);

/// Laplace-smoothed row estimates: (count + alpha) / (row total + 2 alpha).
/// Rows sum to 1 exactly. A row with no observations and alpha = 0 raises
/// UndefinedRowError.
MdpParams estimate_params(const TransitionCounts &counts, double alpha, double discount = 0.95);

/// Sums member counts per cluster, then estimates; members of a cluster share
/// its MdpParams.
std::vector<MdpParams> pool_cluster_params(const std::vector<int> &assignment,
                                           const std::vector<TransitionCounts> &member_counts,
                                           int n_clusters, double alpha, double discount = 0.95);

// ---------------------------------------------------------------------------
// Value iteration and the Whittle index
// ---------------------------------------------------------------------------

/// Action values under a passive subsidy: the fixed point of
///   Q_m(s,a) = r(s) + m [a = Abstain] + discount * sum_s' p(s,a,s') V(s'),
/// with V(s) = max_a Q_m(s,a).
struct SubsidizedQ {
    double q[2][2] = {};
    int sweeps = 0;

    double action_value(BehaviorState s, Action a) const {
        return q[static_cast<int>(s)][static_cast<int>(a)];
    }
    double state_value(BehaviorState s) const {
        return std::max(q[static_cast<int>(s)][0], q[static_cast<int>(s)][1]);
    }
};

/// Iterates until ||V_{n+1} - V_n||_inf < tol (1 - beta) / (2 beta).
/// `sweep_values`, when given, records V after every sweep.
SubsidizedQ value_iteration(const MdpParams &mdp, double subsidy, double tol = 1e-9,
                            std::vector<std::array<double, 2>> *sweep_values = nullptr);

/// Value of the fixed policy (same stopping rule); used against the linear
/// solve oracle.
std::array<double, 2> policy_evaluation(const MdpParams &mdp,
                                        const std::array<Action, 2> &policy, double subsidy,
                                        double tol = 1e-9,
                                        std::vector<std::array<double, 2>> *sweep_values = nullptr);

struct WhittleResult {
    double value = 0.0;
    /// No sign change of Q_m(s,I) - Q_m(s,A) inside the search bracket; the
    /// returned value is the bracket boundary (indexability is unproven).
    bool bracket_warning = false;
};

/// Binary search for the subsidy that equalizes the active and passive action
/// values in `state`, over the bracket +-(2/(1-beta) + 1). Terminates when
/// the bracket is narrower than `tol`.
WhittleResult whittle_index(const MdpParams &mdp, BehaviorState state, double tol = 1e-6,
                            double vi_tol = 1e-9);

// ---------------------------------------------------------------------------
// Planning
// ---------------------------------------------------------------------------

struct BeneficiaryIndex {
    BeneficiaryId beneficiary_id = 0;
    int cluster = -1;
    BehaviorState state = BehaviorState::NotEngaging;
    double whittle = 0.0;
};

struct PlanResult {
    std::vector<BeneficiaryId> selected; // indices non-increasing
    int budget = 0;
};

/// Top-k by index, descending; ties broken by ascending beneficiary id.
PlanResult plan_top_k(const std::vector<BeneficiaryIndex> &indices, int k);

/// 100 * |selected intersect high_engagement| / |selected|.
double overlap_metric(const std::vector<BeneficiaryId> &selected,
                      const std::set<BeneficiaryId> &high_engagement);

/// Sum of discount^t * r(s_t) over the observed trajectory.
double discounted_return(const std::vector<BehaviorState> &trajectory, double discount);

} // namespace callplan

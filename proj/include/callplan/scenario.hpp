#pragma once

#include "callplan/pipeline.hpp"
#include "callplan/sim.hpp"

#include <filesystem>
#include <string>

namespace callplan {

/// Everything a pipeline run needs: the synthetic cohort, simulator knobs,
/// study layouts, and the planning configuration. One root seed feeds every
/// consumer through named sub-streams (see apply_root_seed).
struct Scenario {
    std::uint64_t seed = 1;
    CohortSpec cohort;
    SimParams sim;
    PsqisConfig psqis;
    PolicyEvalConfig eval;
    ClusterModelConfig cluster;
    /// Chance of a random call intervention per beneficiary-month in
    /// `generate`, so transition data covers both actions.
    double train_intervention_prob = 0.35;
};

/// Rewires all sub-seeds as named derivations of `root`. Adding a consumer
/// never perturbs the others.
void apply_root_seed(Scenario &scenario, std::uint64_t root);

/// Default scenario: three planted behavior archetypes (intervention
/// responders, self-engagers, discouraged) with education-correlated
/// membership so the demographic grouping key can find them.
Scenario default_scenario();

/// Two extreme archetypes (steady engagers vs dropouts) with near-noiseless
/// labels; used for predictor sanity checks.
Scenario separable_scenario();

/// Copies the passive transition row over the active one for every
/// archetype: interventions become no-ops.
void make_zero_effect(Scenario &scenario);

std::string scenario_to_json(const Scenario &scenario);
Scenario scenario_from_json(const std::string &text);
Scenario load_scenario(const std::filesystem::path &path);

} // namespace callplan

#include "callplan/scenario.hpp"

#include "callplan/error.hpp"

#include <json.hpp>

#include <fstream>

namespace callplan {

using nlohmann::json;

namespace {

MdpParams make_behavior(double stay_e_passive, double stay_ne_passive, double stay_e_active,
                        double stay_ne_active) {
    MdpParams params;
    params.discount = 0.95;
    params.p[0][0][0] = stay_e_passive;
    params.p[0][0][1] = 1.0 - stay_e_passive;
    params.p[1][0][1] = stay_ne_passive;
    params.p[1][0][0] = 1.0 - stay_ne_passive;
    params.p[0][1][0] = stay_e_active;
    params.p[0][1][1] = 1.0 - stay_e_active;
    params.p[1][1][1] = stay_ne_active;
    params.p[1][1][0] = 1.0 - stay_ne_active;
    return params;
}

} // namespace

void apply_root_seed(Scenario &scenario, std::uint64_t root) {
    scenario.seed = root;
    scenario.cohort.seed = derive_seed(root, "scenario.cohort");
    scenario.psqis.seed = derive_seed(root, "scenario.psqis");
    scenario.eval.seed = derive_seed(root, "scenario.eval");
    scenario.cluster.seed = derive_seed(root, "scenario.cluster");
}

Scenario default_scenario() {
    Scenario scenario;
    scenario.cohort.n_beneficiaries = 16000;
    scenario.cohort.registration_date = parse_date("2020-01-06");
    scenario.cohort.weeks = 36; // long enough for the long-term task's 8-month span

    ArchetypeSpec responsive;
    responsive.name = "responsive";
    responsive.behavior = make_behavior(0.95, 0.97, 0.97, 0.02);
    responsive.connection_prob = 0.65;
    responsive.initial_engaging_prob = 0.05;
    responsive.weight = 0.64;
    responsive.education_tilt = {6.0, 6.0, 3.0, 1.0, 0.3, 0.1, 0.05, 0.05};

    ArchetypeSpec self_engager;
    self_engager.name = "self_engager";
    self_engager.behavior = make_behavior(0.90, 0.45, 0.91, 0.43);
    self_engager.connection_prob = 0.70;
    self_engager.initial_engaging_prob = 0.35;
    self_engager.weight = 0.05;
    self_engager.education_tilt = {0.1, 0.2, 0.5, 1.0, 2.0, 4.0, 5.0, 5.0};

    ArchetypeSpec discouraged;
    discouraged.name = "discouraged";
    discouraged.behavior = make_behavior(0.50, 0.96, 0.55, 0.92);
    discouraged.connection_prob = 0.45;
    discouraged.initial_engaging_prob = 0.08;
    discouraged.weight = 0.31;
    discouraged.education_tilt = {0.4, 0.4, 0.8, 1.2, 1.4, 1.5, 1.5, 1.5};

    scenario.cohort.archetypes = {responsive, self_engager, discouraged};
    scenario.sim.sms_effect_multiplier = 0.17;
    scenario.sim.engage_prob_engaging = 0.85;
    scenario.sim.engage_prob_not_engaging = 0.10;
    apply_root_seed(scenario, 1);
    return scenario;
}

Scenario separable_scenario() {
    Scenario scenario;
    scenario.cohort.n_beneficiaries = 2000;
    scenario.cohort.registration_date = parse_date("2020-01-06");
    scenario.cohort.weeks = 16;

    ArchetypeSpec engaged;
    engaged.name = "steady_engager";
    engaged.behavior = make_behavior(1.0, 0.0, 1.0, 0.0);
    engaged.connection_prob = 0.90;
    engaged.initial_engaging_prob = 1.0;
    engaged.weight = 0.5;

    ArchetypeSpec dropout;
    dropout.name = "dropout";
    dropout.behavior = make_behavior(0.0, 1.0, 0.0, 1.0);
    dropout.connection_prob = 0.35;
    dropout.initial_engaging_prob = 0.0;
    dropout.weight = 0.5;

    scenario.cohort.archetypes = {engaged, dropout};
    scenario.sim.engage_prob_engaging = 0.95;
    scenario.sim.engage_prob_not_engaging = 0.02;
    apply_root_seed(scenario, 2);
    return scenario;
}

void make_zero_effect(Scenario &scenario) {
    for (ArchetypeSpec &archetype : scenario.cohort.archetypes) {
        for (int s = 0; s < 2; ++s) {
            for (int n = 0; n < 2; ++n) {
                archetype.behavior.p[s][1][n] = archetype.behavior.p[s][0][n];
            }
        }
    }
}

// ---------------------------------------------------------------------------
// JSON round trip
// ---------------------------------------------------------------------------

namespace {

json behavior_to_json(const MdpParams &params) {
    return json{{"stay_engaging_passive", params.p[0][0][0]},
                {"stay_not_engaging_passive", params.p[1][0][1]},
                {"stay_engaging_active", params.p[0][1][0]},
                {"stay_not_engaging_active", params.p[1][1][1]},
                {"discount", params.discount}};
}

MdpParams behavior_from_json(const json &j) {
    MdpParams params = make_behavior(
        j.at("stay_engaging_passive").get<double>(),
        j.at("stay_not_engaging_passive").get<double>(),
        j.at("stay_engaging_active").get<double>(),
        j.at("stay_not_engaging_active").get<double>());
    params.discount = j.value("discount", 0.95);
    return params;
}

json archetype_to_json(const ArchetypeSpec &a) {
    json j{{"name", a.name},
           {"behavior", behavior_to_json(a.behavior)},
           {"connection_prob", a.connection_prob},
           {"initial_engaging_prob", a.initial_engaging_prob},
           {"weight", a.weight}};
    if (!a.education_tilt.empty()) {
        j["education_tilt"] = a.education_tilt;
    }
    return j;
}

ArchetypeSpec archetype_from_json(const json &j) {
    ArchetypeSpec a;
    a.name = j.value("name", "");
    a.behavior = behavior_from_json(j.at("behavior"));
    a.connection_prob = j.at("connection_prob").get<double>();
    a.initial_engaging_prob = j.at("initial_engaging_prob").get<double>();
    a.weight = j.at("weight").get<double>();
    if (j.contains("education_tilt")) {
        a.education_tilt = j.at("education_tilt").get<std::vector<double>>();
    }
    return a;
}

json grouping_to_json(const GroupingConfig &g) {
    return json{{"by_education", g.by_education},
                {"by_income", g.by_income},
                {"by_phone_owner", g.by_phone_owner},
                {"by_age_bucket", g.by_age_bucket},
                {"age_bucket_years", g.age_bucket_years}};
}

GroupingConfig grouping_from_json(const json &j) {
    GroupingConfig g;
    g.by_education = j.value("by_education", g.by_education);
    g.by_income = j.value("by_income", g.by_income);
    g.by_phone_owner = j.value("by_phone_owner", g.by_phone_owner);
    g.by_age_bucket = j.value("by_age_bucket", g.by_age_bucket);
    g.age_bucket_years = j.value("age_bucket_years", g.age_bucket_years);
    return g;
}

} // namespace

std::string scenario_to_json(const Scenario &s) {
    json j;
    j["seed"] = s.seed;
    j["train_intervention_prob"] = s.train_intervention_prob;

    json cohort;
    cohort["n_beneficiaries"] = s.cohort.n_beneficiaries;
    cohort["registration_date"] = format_date(s.cohort.registration_date);
    cohort["first_id"] = s.cohort.first_id;
    cohort["weeks"] = s.cohort.weeks;
    const DemographicSpec &d = s.cohort.demographics;
    cohort["demographics"] = json{{"education_weights", d.education_weights},
                                  {"income_weights", d.income_weights},
                                  {"phone_owner_weights", d.phone_owner_weights},
                                  {"language_weights", d.language_weights},
                                  {"call_slot_weights", d.call_slot_weights},
                                  {"age_min", d.age_min},
                                  {"age_max", d.age_max},
                                  {"gestation_min_weeks", d.gestation_min_weeks},
                                  {"gestation_max_weeks", d.gestation_max_weeks}};
    json archetypes = json::array();
    for (const ArchetypeSpec &a : s.cohort.archetypes) {
        archetypes.push_back(archetype_to_json(a));
    }
    cohort["archetypes"] = archetypes;
    j["cohort"] = cohort;

    j["sim"] = json{{"attempts_per_week", s.sim.attempts_per_week},
                    {"engage_prob_engaging", s.sim.engage_prob_engaging},
                    {"engage_prob_not_engaging", s.sim.engage_prob_not_engaging},
                    {"call_success_prob", s.sim.call_success_prob},
                    {"sms_effect_multiplier", s.sim.sms_effect_multiplier},
                    {"retry_prob", s.sim.retry_prob}};
    j["psqis"] = json{{"pre_months", s.psqis.pre_months},
                      {"post_months", s.psqis.post_months},
                      {"hybrid_wait_months", s.psqis.hybrid_wait_months}};
    j["eval"] = json{{"pre_months", s.eval.pre_months},
                     {"post_months", s.eval.post_months},
                     {"k", s.eval.k},
                     {"runs", s.eval.runs}};
    j["cluster"] = json{{"grouping", grouping_to_json(s.cluster.grouping)},
                        {"n_clusters", s.cluster.n_clusters},
                        {"alpha", s.cluster.alpha},
                        {"discount", s.cluster.discount},
                        {"whittle_tol", s.cluster.whittle_tol},
                        {"vi_tol", s.cluster.vi_tol}};
    return j.dump(2);
}

Scenario scenario_from_json(const std::string &text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception &e) {
        throw ConfigError(std::string("scenario: invalid JSON: ") + e.what());
    }
    Scenario s = default_scenario();
    try {
        if (j.contains("cohort")) {
            const json &cohort = j.at("cohort");
            s.cohort.n_beneficiaries = cohort.value("n_beneficiaries", s.cohort.n_beneficiaries);
            if (cohort.contains("registration_date")) {
                s.cohort.registration_date =
                    parse_date(cohort.at("registration_date").get<std::string>());
            }
            s.cohort.first_id = cohort.value("first_id", s.cohort.first_id);
            s.cohort.weeks = cohort.value("weeks", s.cohort.weeks);
            if (cohort.contains("demographics")) {
                const json &d = cohort.at("demographics");
                DemographicSpec &spec = s.cohort.demographics;
                spec.education_weights = d.value("education_weights", spec.education_weights);
                spec.income_weights = d.value("income_weights", spec.income_weights);
                spec.phone_owner_weights =
                    d.value("phone_owner_weights", spec.phone_owner_weights);
                spec.language_weights = d.value("language_weights", spec.language_weights);
                spec.call_slot_weights = d.value("call_slot_weights", spec.call_slot_weights);
                spec.age_min = d.value("age_min", spec.age_min);
                spec.age_max = d.value("age_max", spec.age_max);
                spec.gestation_min_weeks = d.value("gestation_min_weeks", spec.gestation_min_weeks);
                spec.gestation_max_weeks = d.value("gestation_max_weeks", spec.gestation_max_weeks);
            }
            if (cohort.contains("archetypes")) {
                s.cohort.archetypes.clear();
                for (const json &a : cohort.at("archetypes")) {
                    s.cohort.archetypes.push_back(archetype_from_json(a));
                }
            }
        }
        if (j.contains("sim")) {
            const json &sim = j.at("sim");
            s.sim.attempts_per_week = sim.value("attempts_per_week", s.sim.attempts_per_week);
            s.sim.engage_prob_engaging =
                sim.value("engage_prob_engaging", s.sim.engage_prob_engaging);
            s.sim.engage_prob_not_engaging =
                sim.value("engage_prob_not_engaging", s.sim.engage_prob_not_engaging);
            s.sim.call_success_prob = sim.value("call_success_prob", s.sim.call_success_prob);
            s.sim.sms_effect_multiplier =
                sim.value("sms_effect_multiplier", s.sim.sms_effect_multiplier);
            s.sim.retry_prob = sim.value("retry_prob", s.sim.retry_prob);
        }
        if (j.contains("psqis")) {
            const json &p = j.at("psqis");
            s.psqis.pre_months = p.value("pre_months", s.psqis.pre_months);
            s.psqis.post_months = p.value("post_months", s.psqis.post_months);
            s.psqis.hybrid_wait_months = p.value("hybrid_wait_months", s.psqis.hybrid_wait_months);
        }
        if (j.contains("eval")) {
            const json &e = j.at("eval");
            s.eval.pre_months = e.value("pre_months", s.eval.pre_months);
            s.eval.post_months = e.value("post_months", s.eval.post_months);
            s.eval.k = e.value("k", s.eval.k);
            s.eval.runs = e.value("runs", s.eval.runs);
        }
        if (j.contains("cluster")) {
            const json &c = j.at("cluster");
            if (c.contains("grouping")) {
                s.cluster.grouping = grouping_from_json(c.at("grouping"));
            }
            s.cluster.n_clusters = c.value("n_clusters", s.cluster.n_clusters);
            s.cluster.alpha = c.value("alpha", s.cluster.alpha);
            s.cluster.discount = c.value("discount", s.cluster.discount);
            s.cluster.whittle_tol = c.value("whittle_tol", s.cluster.whittle_tol);
            s.cluster.vi_tol = c.value("vi_tol", s.cluster.vi_tol);
        }
        s.train_intervention_prob = j.value("train_intervention_prob", s.train_intervention_prob);
        apply_root_seed(s, j.value("seed", s.seed));
    } catch (const json::exception &e) {
        throw ConfigError(std::string("scenario: bad field: ") + e.what());
    }
    return s;
}

Scenario load_scenario(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open scenario config " + path.string());
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return scenario_from_json(text);
}

} // namespace callplan

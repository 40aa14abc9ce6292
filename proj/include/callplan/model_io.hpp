#pragma once

#include "callplan/metrics.hpp"
#include "callplan/pipeline.hpp"
#include "callplan/sim.hpp"

#include <filesystem>
#include <string>

namespace callplan {

/// Versioned, self-describing JSON container: kind, task, config echo, seed,
/// and every weight array. Round-trips are bit-exact (shortest round-trip
/// double formatting on write, exact parse on read).
std::string model_to_json(const Model &model, const std::string &provenance);
Model model_from_json(const std::string &text);

void save_model(const std::filesystem::path &path, const Model &model,
                const std::string &provenance);
Model load_model(const std::filesystem::path &path);

/// Cluster-model artifact: centroids, per-cluster MDP parameters and Whittle
/// indices, grouping-key config, seed.
std::string cluster_model_to_json(const ClusterModel &model, const std::string &provenance);
ClusterModel cluster_model_from_json(const std::string &text);
void save_cluster_model(const std::filesystem::path &path, const ClusterModel &model,
                        const std::string &provenance);
ClusterModel load_cluster_model(const std::filesystem::path &path);

std::string metric_report_to_json(const MetricReport &report, const std::string &provenance);

/// Archetypes, parameters and memberships of a generated cohort, for oracle
/// tests against the simulator's ground truth.
std::string ground_truth_to_json(const Cohort &cohort, const std::string &provenance);

std::string psqis_result_to_json(const PsqisResult &result, const std::string &provenance);

std::string policy_eval_to_json(const std::vector<PolicyEvalRow> &rows,
                                const std::string &provenance);

void write_text_file(const std::filesystem::path &path, const std::string &text);
std::string read_text_file(const std::filesystem::path &path);

} // namespace callplan

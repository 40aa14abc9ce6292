#pragma once

#include "callplan/rng.hpp"

#include <cstdint>
#include <vector>

namespace callplan {

/// Flat numeric training set; labels are 0/1 with 1 the positive class.
struct Dataset {
    std::vector<std::vector<double>> x;
    std::vector<int> y;

    std::size_t size() const { return x.size(); }
    std::size_t n_features() const { return x.empty() ? 0 : x.front().size(); }
};

struct ForestConfig {
    int n_trees = 200;
    int max_depth = 30;
    int min_samples_split = 2;
    int features_per_split = 0; // 0 means floor(sqrt(d))
    std::uint64_t seed = 0;
};

struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    long n_pos = 0;
    long n_neg = 0;

    bool is_leaf() const { return left < 0; }
};

/// Binary CART tree with Gini-impurity splits; leaves hold class counts.
class DecisionTree {
  public:
    double predict_proba(const std::vector<double> &features) const;
    const std::vector<TreeNode> &nodes() const { return nodes_; }

    std::vector<TreeNode> nodes_; // public for (de)serialization
};

/// Grows one tree on the full dataset. Feature subsets at each split are
/// drawn from `rng`; with features_per_split >= d this is plain CART.
DecisionTree train_tree(const Dataset &data, const ForestConfig &config, Rng &rng);

class RandomForest {
  public:
    RandomForest() = default;
    RandomForest(ForestConfig config, std::vector<DecisionTree> trees)
        : config_(config), trees_(std::move(trees)) {}

    /// Mean of per-tree leaf positive-class frequencies.
    double predict_proba(const std::vector<double> &features) const;

    const ForestConfig &config() const { return config_; }
    const std::vector<DecisionTree> &trees() const { return trees_; }

  private:
    ForestConfig config_;
    std::vector<DecisionTree> trees_;
};

/// n_trees trees on bootstrap resamples (with replacement, size = |data|).
/// Per-tree seeds derive deterministically from config.seed, so the result
/// does not depend on scheduling.
RandomForest train_forest(const Dataset &data, const ForestConfig &config);

} // namespace callplan

#include "callplan/forest.hpp"

#include "callplan/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace callplan {

namespace {

double gini(long n_pos, long n_neg) {
    const long n = n_pos + n_neg;
    if (n == 0) {
        return 0.0;
    }
    const double p = static_cast<double>(n_pos) / n;
    const double q = static_cast<double>(n_neg) / n;
    return 1.0 - p * p - q * q;
}

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double weighted_impurity = 0.0;
};

class TreeBuilder {
  public:
    TreeBuilder(const Dataset &data, const ForestConfig &config, Rng &rng)
        : data_(data), config_(config), rng_(rng) {
        n_features_ = static_cast<int>(data.n_features());
        per_split_ = config.features_per_split > 0
                         ? std::min(config.features_per_split, n_features_)
                         : std::max(1, static_cast<int>(std::sqrt(
                                           static_cast<double>(n_features_))));
    }

    DecisionTree build(std::vector<std::size_t> samples) {
        DecisionTree tree;
        grow(tree, std::move(samples), 0);
        return tree;
    }

  private:
    int grow(DecisionTree &tree, std::vector<std::size_t> samples, int depth) {
        long n_pos = 0;
        for (std::size_t i : samples) {
            n_pos += data_.y[i];
        }
        const long n_neg = static_cast<long>(samples.size()) - n_pos;

        const int index = static_cast<int>(tree.nodes_.size());
        tree.nodes_.push_back(TreeNode{-1, 0.0, -1, -1, n_pos, n_neg});

        const bool pure = n_pos == 0 || n_neg == 0;
        if (pure || depth >= config_.max_depth ||
            static_cast<int>(samples.size()) < config_.min_samples_split) {
            return index;
        }
        SplitChoice split = best_split(samples, gini(n_pos, n_neg));
        if (split.feature < 0) {
            return index;
        }

        std::vector<std::size_t> left, right;
        for (std::size_t i : samples) {
            (data_.x[i][static_cast<std::size_t>(split.feature)] <= split.threshold ? left
                                                                                    : right)
                .push_back(i);
        }
        samples.clear();
        samples.shrink_to_fit();

        tree.nodes_[static_cast<std::size_t>(index)].feature = split.feature;
        tree.nodes_[static_cast<std::size_t>(index)].threshold = split.threshold;
        const int l = grow(tree, std::move(left), depth + 1);
        tree.nodes_[static_cast<std::size_t>(index)].left = l;
        const int r = grow(tree, std::move(right), depth + 1);
        tree.nodes_[static_cast<std::size_t>(index)].right = r;
        return index;
    }

    /// Candidate features for one split: a uniform subset without
    /// replacement, visited in ascending order so ties resolve the same way
    /// regardless of draw order.
    std::vector<int> sample_features() {
        std::vector<int> all(static_cast<std::size_t>(n_features_));
        std::iota(all.begin(), all.end(), 0);
        for (int i = 0; i < per_split_; ++i) {
            const auto j =
                i + static_cast<int>(rng_.next_index(static_cast<std::uint64_t>(n_features_ - i)));
            std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(j)]);
        }
        all.resize(static_cast<std::size_t>(per_split_));
        std::sort(all.begin(), all.end());
        return all;
    }

    SplitChoice best_split(const std::vector<std::size_t> &samples, double parent_impurity) {
        SplitChoice best;
        best.weighted_impurity = parent_impurity - 1e-12; // require strict improvement
        std::vector<std::pair<double, int>> values;
        values.reserve(samples.size());
        const long total = static_cast<long>(samples.size());

        for (int feature : sample_features()) {
            values.clear();
            for (std::size_t i : samples) {
                values.emplace_back(data_.x[i][static_cast<std::size_t>(feature)], data_.y[i]);
            }
            std::sort(values.begin(), values.end());
            long left_pos = 0, left_n = 0;
            long total_pos = 0;
            for (const auto &[v, y] : values) {
                total_pos += y;
            }
            for (std::size_t k = 0; k + 1 < values.size(); ++k) {
                left_pos += values[k].second;
                ++left_n;
                if (values[k].first == values[k + 1].first) {
                    continue;
                }
                const long right_n = total - left_n;
                const long right_pos = total_pos - left_pos;
                const double weighted =
                    (left_n * gini(left_pos, left_n - left_pos) +
                     right_n * gini(right_pos, right_n - right_pos)) /
                    static_cast<double>(total);
                if (weighted < best.weighted_impurity) {
                    best.weighted_impurity = weighted;
                    best.feature = feature;
                    best.threshold = values[k].first + (values[k + 1].first - values[k].first) / 2;
                }
            }
        }
        return best;
    }

    const Dataset &data_;
    const ForestConfig &config_;
    Rng &rng_;
    int n_features_ = 0;
    int per_split_ = 0;
};

} // namespace

double DecisionTree::predict_proba(const std::vector<double> &features) const {
    std::size_t node = 0;
    while (!nodes_[node].is_leaf()) {
        const TreeNode &n = nodes_[node];
        node = static_cast<std::size_t>(
            features[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    const TreeNode &leaf = nodes_[node];
    const long total = leaf.n_pos + leaf.n_neg;
    return total > 0 ? static_cast<double>(leaf.n_pos) / total : 0.5;
}

DecisionTree train_tree(const Dataset &data, const ForestConfig &config, Rng &rng) {
    if (data.size() == 0) {
        throw DataError("train_tree: empty dataset");
    }
    if (config.n_trees < 1 || config.max_depth < 1) {
        throw ConfigError("forest config: n_trees and max_depth must be >= 1");
    }
    std::vector<std::size_t> samples(data.size());
    std::iota(samples.begin(), samples.end(), std::size_t{0});
    return TreeBuilder(data, config, rng).build(std::move(samples));
}

double RandomForest::predict_proba(const std::vector<double> &features) const {
    double sum = 0.0;
    for (const DecisionTree &tree : trees_) {
        sum += tree.predict_proba(features);
    }
    return trees_.empty() ? 0.5 : sum / static_cast<double>(trees_.size());
}

RandomForest train_forest(const Dataset &data, const ForestConfig &config) {
    if (data.size() == 0) {
        throw DataError("train_forest: empty dataset");
    }
    if (config.n_trees < 1 || config.max_depth < 1) {
        throw ConfigError("forest config: n_trees and max_depth must be >= 1");
    }
    std::vector<DecisionTree> trees;
    trees.reserve(static_cast<std::size_t>(config.n_trees));
    for (int t = 0; t < config.n_trees; ++t) {
        Rng rng(derive_seed(config.seed, "forest.tree", static_cast<std::uint64_t>(t)));
        std::vector<std::size_t> bootstrap(data.size());
        for (std::size_t &s : bootstrap) {
            s = static_cast<std::size_t>(rng.next_index(data.size()));
        }
        trees.push_back(TreeBuilder(data, config, rng).build(std::move(bootstrap)));
    }
    return RandomForest(config, std::move(trees));
}

} // namespace callplan

#include "callplan/kmeans.hpp"

#include "callplan/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace callplan {

namespace {

double squared_distance(const std::vector<double> &a, const std::vector<double> &b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

/// k-means++ seeding: first centroid uniform, the rest proportional to the
/// squared distance to the nearest chosen centroid.
std::vector<std::vector<double>> seed_centroids(const std::vector<std::vector<double>> &points,
                                                int k, Rng &rng) {
    std::vector<std::vector<double>> centroids;
    centroids.push_back(points[static_cast<std::size_t>(rng.next_index(points.size()))]);
    std::vector<double> dist2(points.size());
    while (static_cast<int>(centroids.size()) < k) {
        for (std::size_t i = 0; i < points.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto &c : centroids) {
                best = std::min(best, squared_distance(points[i], c));
            }
            dist2[i] = best;
        }
        double total = 0.0;
        for (double d : dist2) {
            total += d;
        }
        if (total <= 0.0) {
            // All points coincide with centroids; any point works.
            centroids.push_back(points[static_cast<std::size_t>(
                rng.next_index(points.size()))]);
        } else {
            centroids.push_back(points[rng.pick_weighted(dist2)]);
        }
    }
    return centroids;
}

} // namespace

KMeansResult kmeans(const std::vector<std::vector<double>> &points, int k, std::uint64_t seed,
                    int max_iterations) {
    if (k < 1) {
        throw ConfigError("kmeans: k must be >= 1");
    }
    if (static_cast<std::size_t>(k) > points.size()) {
        throw ConfigError("kmeans: k = " + std::to_string(k) + " exceeds " +
                          std::to_string(points.size()) + " points");
    }

    Rng rng(derive_seed(seed, "kmeans"));
    KMeansResult result;
    result.centroids = seed_centroids(points, k, rng);
    result.assignment.assign(points.size(), -1);
    const std::size_t dim = points.front().size();

    for (int iter = 0; iter < max_iterations; ++iter) {
        // Assign.
        bool changed = false;
        for (std::size_t i = 0; i < points.size(); ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double d =
                    squared_distance(points[i], result.centroids[static_cast<std::size_t>(c)]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (result.assignment[i] != best) {
                result.assignment[i] = best;
                changed = true;
            }
        }

        // Update.
        std::vector<std::vector<double>> sums(static_cast<std::size_t>(k),
                                              std::vector<double>(dim, 0.0));
        std::vector<long> counts(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto c = static_cast<std::size_t>(result.assignment[i]);
            ++counts[c];
            for (std::size_t j = 0; j < dim; ++j) {
                sums[c][j] += points[i][j];
            }
        }
        for (int c = 0; c < k; ++c) {
            const auto ci = static_cast<std::size_t>(c);
            if (counts[ci] == 0) {
                // Reseed an emptied cluster from the farthest point overall.
                std::size_t farthest = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < points.size(); ++i) {
                    const double d = squared_distance(
                        points[i],
                        result.centroids[static_cast<std::size_t>(result.assignment[i])]);
                    if (d > far_d) {
                        far_d = d;
                        farthest = i;
                    }
                }
                result.centroids[ci] = points[farthest];
                changed = true;
            } else {
                for (std::size_t j = 0; j < dim; ++j) {
                    result.centroids[ci][j] = sums[ci][j] / static_cast<double>(counts[ci]);
                }
            }
        }

        double inertia = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            inertia += squared_distance(
                points[i], result.centroids[static_cast<std::size_t>(result.assignment[i])]);
        }
        result.inertia_trace.push_back(inertia);
        result.inertia = inertia;
        result.iterations = iter + 1;
        if (!changed) {
            break;
        }
    }
    return result;
}

} // namespace callplan

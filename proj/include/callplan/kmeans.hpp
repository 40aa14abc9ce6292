#pragma once

#include "callplan/rng.hpp"

#include <cstdint>
#include <vector>

namespace callplan {

struct KMeansResult {
    std::vector<int> assignment;               // one cluster id per point
    std::vector<std::vector<double>> centroids;
    double inertia = 0.0;                      // sum of squared distances
    int iterations = 0;
    std::vector<double> inertia_trace;         // after each Lloyd update
};

/// Lloyd's algorithm with k-means++ seeding. Converges when assignments stop
/// changing or after max_iterations sweeps. An emptied cluster is reseeded
/// from the point farthest from its centroid. Throws ConfigError when
/// k > |points| or k < 1.
KMeansResult kmeans(const std::vector<std::vector<double>> &points, int k, std::uint64_t seed,
                    int max_iterations = 300);

} // namespace callplan

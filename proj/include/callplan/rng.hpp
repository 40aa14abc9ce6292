#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace callplan {

/// Derives a child seed from a root seed and a stream name, so every consumer
/// of randomness gets its own independent stream. Adding a new named consumer
/// never perturbs existing ones. FNV-1a over the name, mixed with the root via
/// splitmix64 finalization.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);

/// Same, with a numeric suffix (per-tree seeds, per-run seeds, ...).
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index);

/// Deterministic random generator. All distributions are implemented on top of
/// the raw mt19937_64 output so results do not depend on standard-library
/// distribution internals.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1).
    double next_double() { return (engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t next_index(std::uint64_t n);

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    bool bernoulli(double p) { return next_double() < p; }

    /// Index sampled proportionally to the (non-negative) weights.
    std::size_t pick_weighted(const std::vector<double> &weights);

    /// Fisher-Yates shuffle.
    template <typename T> void shuffle(std::vector<T> &items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_index(i));
            std::swap(items[i - 1], items[j]);
        }
    }

  private:
    std::mt19937_64 engine_;
};

} // namespace callplan

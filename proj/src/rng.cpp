#include "callplan/rng.hpp"

#include "callplan/error.hpp"

namespace callplan {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream) {
    return splitmix64(root ^ fnv1a(stream));
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index) {
    return splitmix64(derive_seed(root, stream) ^ splitmix64(index));
}

std::uint64_t Rng::next_index(std::uint64_t n) {
    if (n == 0) {
        throw Error("Rng::next_index: n must be positive");
    }
    // Rejection sampling to avoid modulo bias.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = engine_();
    while (x >= limit) {
        x = engine_();
    }
    return x % n;
}

std::size_t Rng::pick_weighted(const std::vector<double> &weights) {
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) {
            throw Error("Rng::pick_weighted: negative weight");
        }
        total += w;
    }
    if (total <= 0.0) {
        throw Error("Rng::pick_weighted: weights sum to zero");
    }
    double x = next_double() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (x < acc) {
            return i;
        }
    }
    return weights.size() - 1;
}

} // namespace callplan

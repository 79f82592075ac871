#pragma once

// Seeded randomness. Every consumer derives its own stream from one root
// seed with derive_seed(root, stream), so adding a consumer never shifts the
// draws of another. Sampling is implemented here rather than through the
// <random> distributions, whose output is library-specific.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace latent {

enum class Stream : std::uint64_t {
    WeightInit = 1,
    Shuffle = 2,
    KMeans = 3,
    Synth = 4,
    Scenario = 5,
    AdaptInit = 6,
};

// splitmix64 finalizer over (root, stream).
std::uint64_t derive_seed(std::uint64_t root, Stream stream) noexcept;
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) noexcept;

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    // [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    // Uniform integer in [0, n); n must be positive.
    std::size_t index(std::size_t n);
    // Index drawn with probability proportional to weights (all >= 0, sum > 0).
    std::size_t weighted_index(std::span<const double> weights);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[index(i)]);
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace latent

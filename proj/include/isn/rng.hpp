#pragma once

#include <cstdint>
#include <random>

#include "isn/core.hpp"

namespace isn {

// splitmix64 finalizer; used to derive well-separated seeds from
// (master_seed, stream_id) pairs.
inline uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t seed, uint64_t stream_id) {
    return mix64(mix64(seed) ^ mix64(stream_id + 0x632be59bd9b4e019ULL));
}

// Seedable 64-bit generator (mt19937_64 core) with explicit, documented
// stream splitting: substream(id) yields an independent generator whose seed
// is a pure function of (this seed, id). Workers never share a stream;
// parallel runs are reproducible because stream ids, not thread ids,
// determine the draws.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    uint64_t seed() const { return seed_; }

    Rng substream(uint64_t stream_id) const { return Rng(derive_seed(seed_, stream_id)); }

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller with one cached value.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 6.283185307179586476925286766559 * u2;
        cached_ = radius * std::sin(angle);
        has_cached_ = true;
        return radius * std::cos(angle);
    }

    double normal(double mu, double sigma) { return mu + sigma * normal(); }

    bool bernoulli(double p = 0.5) { return uniform() < p; }

    // Uniform integer in [0, n).
    uint64_t uniform_index(uint64_t n) {
        // Rejection keeps the distribution exactly uniform.
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

    // Marsaglia-Tsang for shape >= 1; for shape < 1 the draw is boosted from
    // shape+1 and scaled by U^(1/shape).
    double gamma(double shape) {
        if (!(shape > 0.0)) throw DomainError("gamma shape must be positive");
        if (shape < 1.0) {
            double u = uniform();
            while (u <= 0.0) u = uniform();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        double d = shape - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    template <typename It>
    void shuffle(It first, It last) {
        auto n = static_cast<uint64_t>(last - first);
        for (uint64_t i = n; i > 1; --i) {
            uint64_t j = uniform_index(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

// Stream-id convention used across the library. Data generation, weight
// initialization and batch shuffling never reuse a stream.
namespace stream {
constexpr uint64_t kTrainData = 1;
constexpr uint64_t kEvalLoss = 2;   // evaluation dataset 1 (avg loss)
constexpr uint64_t kEvalError = 3;  // evaluation dataset 2 (avg error)
constexpr uint64_t kInit = 4;
constexpr uint64_t kShuffle = 5;
}  // namespace stream

}  // namespace isn

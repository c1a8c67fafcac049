#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace ctxnav {

// splitmix64: cheap stateless mixer, used to derive independent per-episode
// seeds from (master_seed, index) without correlations between streams.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic RNG wrapper.  std::mt19937_64's output sequence is pinned by
// the standard, so results are reproducible across platforms; the conversions
// to doubles / bounded ints are written out explicitly because the standard
// *distributions* are not portable.
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi) {
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(0, static_cast<int>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Pick an index proportionally to non-negative weights.
    int weighted(std::span<const double> w) {
        double total = 0.0;
        for (double x : w) total += x;
        double r = uniform() * total;
        double acc = 0.0;
        for (size_t i = 0; i < w.size(); ++i) {
            acc += w[i];
            if (r < acc) return static_cast<int>(i);
        }
        return static_cast<int>(w.size()) - 1;
    }

  private:
    std::mt19937_64 gen_;
};

}  // namespace ctxnav

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace domforge {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Sub-seed for the `ordinal`-th unit of work under `seed`. Work units seeded
// this way produce the same output no matter how they are scheduled.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t ordinal) {
  return splitmix64(seed ^ splitmix64(ordinal + 0x632BE59BD9B4E019ULL));
}

// Seeded generator with distributions defined here rather than by the
// standard library, whose distribution algorithms differ between vendors.
// mt19937_64 itself is fully specified, so output is portable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t uniform(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = engine_();
      if (r >= threshold) return r % bound;
    }
  }

  // Uniform double in [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return unit() < p; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[uniform(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace domforge

#pragma once

#include <cstdint>
#include <vector>

namespace pgen {

// Deterministic splitmix64 generator. All randomness in the library flows
// through this type so that runs are bit-identical across platforms; the
// standard <random> distributions are implementation-defined and are not used.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  // Independent stream derived from this generator's seed and a tag.
  // Forking depends only on the seed, not on how much the parent has
  // advanced, so streams can be re-derived for replay.
  Rng fork(std::uint64_t tag) const {
    std::uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return Rng(z ^ (z >> 31));
  }

  std::uint64_t seed() const { return seed_; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

// Stream tags shared by the learner and the decoders: a rollout and a
// standalone decode driven by the same seed consume identical token draws.
inline constexpr std::uint64_t kScheduleStream = 1;
inline constexpr std::uint64_t kDecodeStream = 2;

}  // namespace pgen

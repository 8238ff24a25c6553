#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace hebbes {

// splitmix64 output function (Steele, Lea & Flood). One multiply-xor chain
// per draw; statistically solid for simulation use and trivially splittable.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Seed namespaces. Every random draw in the system comes from a stream keyed
// by (base seed, purpose, a, b), so parallel and serial schedules agree and
// training never shares a stream with evaluation.
enum class SeedPurpose : std::uint64_t {
  MuInit = 1,
  RuleAssignment = 2,
  PopulationSample = 3,
  TrainEpisode = 4,
  EvalEpisode = 5,
  EvalGenotype = 6,
  WeightInit = 7,
  EnvReset = 8,
  FloorEpisode = 9,
};

inline std::uint64_t derive_seed(std::uint64_t base, SeedPurpose purpose,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  constexpr std::uint64_t golden = 0x9e3779b97f4a7c15ull;
  std::uint64_t h = mix64(base + golden);
  h = mix64(h ^ (static_cast<std::uint64_t>(purpose) + golden));
  h = mix64(h ^ (a + golden));
  h = mix64(h ^ (b + golden));
  return h;
}

// Deterministic stream generator. Not stdlib <random>: the reproducibility
// contract (same seed -> same bits, on any platform, for any worker count)
// has to be pinned by this implementation, not by a library's distribution
// internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix64(state_);
  }

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller with a cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  // Index draw from an explicit probability vector (rows of softmax(lambda)).
  int categorical(std::span<const double> probs) {
    double u = uniform();
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      cum += probs[i];
      if (u < cum) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hebbes

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

namespace densebox {

// Deterministic random source shared by the scene generator and the random
// baseline. std::mt19937_64 is seeded directly and all derived draws are
// spelled out here because std::uniform_real_distribution and
// std::normal_distribution are implementation-defined; this wrapper keeps
// streams bit-identical across platforms and standard libraries.
//
// Draw discipline (relevant when reasoning about stream alignment):
//   - uniform():        one engine step, value in [0, 1) with 53 bits.
//   - uniform_int():    one engine step.
//   - normal():         exactly two engine steps (Box-Muller, no cached
//                       spare), and normal(m, 0) returns m exactly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], both inclusive.
  int uniform_int(int lo, int hi) {
    const double span = static_cast<double>(hi - lo) + 1.0;
    const int offset = static_cast<int>(uniform() * span);
    return lo + std::min(offset, hi - lo);
  }

  double normal(double mean, double stddev) {
    // u1 in (0, 1] keeps the log finite; the cosine branch alone consumes
    // both uniforms so callers can count engine steps.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double z = r * std::cos(2.0 * kPi * u2);
    return mean + stddev * z;
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;
  std::mt19937_64 engine_;
};

}  // namespace densebox

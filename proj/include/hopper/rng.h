#ifndef HOPPER_RNG_H
#define HOPPER_RNG_H

#include <cstdint>
#include <random>

namespace hopper {

// Seeded generator shared by every stochastic component. Draws are
// implemented here rather than through <random> distributions so sequences
// do not depend on the standard library vendor.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {
  }

  // Uniform in [0, n). n must be positive.
  std::size_t index(std::size_t n) {
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = engine_.max() - engine_.max() % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
  }

  // Uniform in [0, 1).
  double unit() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  std::uint64_t next() {
    return engine_();
  }

private:
  std::mt19937_64 engine_;
};

} // namespace hopper

#endif

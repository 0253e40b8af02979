#pragma once

#include <cstdint>
#include <random>

namespace treebound {

// Seeded 64-bit Mersenne Twister (std::mt19937_64). Its output sequence is
// fixed by the standard, and uniform() maps the top 53 bits onto [a, b)
// explicitly instead of going through std::uniform_real_distribution, whose
// algorithm is implementation-defined. Draws are therefore reproducible
// across compilers and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Half-open [a, b). Returns a when a == b.
  double uniform(double a, double b) {
    const double unit = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return a + (b - a) * unit;
  }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace treebound

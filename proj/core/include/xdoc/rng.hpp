#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace xdoc {

// Seeded RNG with hand-mapped distributions. std::mt19937_64 output is
// pinned by the standard; the distribution adapters in <random> are not,
// so we map raw draws ourselves to keep runs bit-reproducible across
// platforms and library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0,1) with 53 bits of mantissa.
  double uniform() {
    return static_cast<double>(eng_() >> 11) * (1.0 / 9007199254740992.0);
  }

  // Uniform integer in [0, n). n must be positive.
  uint64_t below(uint64_t n) { return eng_() % n; }

  // Standard normal via Box-Muller on two fixed uniform draws.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Engine state as text; mt19937_64 stream I/O round-trips exactly.
  std::string serialize() const;
  void deserialize(const std::string& state);

 private:
  std::mt19937_64 eng_;
};

// Mixes a base seed with a stream tag, for derived per-purpose generators.
uint64_t mix_seed(uint64_t base, uint64_t stream);

}  // namespace xdoc

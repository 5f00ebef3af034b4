#include "xdoc/rng.hpp"

#include <sstream>

#include "xdoc/error.hpp"

namespace xdoc {

std::string Rng::serialize() const {
  std::ostringstream os;
  os << eng_;
  return os.str();
}

void Rng::deserialize(const std::string& state) {
  std::istringstream is(state);
  is >> eng_;
  if (is.fail()) throw FormatError("malformed rng state");
}

uint64_t mix_seed(uint64_t base, uint64_t stream) {
  // splitmix64 finalizer over the combined words
  uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace xdoc

#include "msr/rng.hpp"

#include <cmath>

#include "msr/common.hpp"

namespace msr {

namespace {

inline uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

uint64_t CounterRng::derive_key(uint64_t global_seed, std::string_view a,
                                std::string_view b, std::string_view c) {
  uint64_t h = fnv1a64(&global_seed, sizeof(global_seed));
  h = fnv1a64(a, h);
  h = fnv1a64("\x1f", h);  // field separator, so ("ab","c") != ("a","bc")
  h = fnv1a64(b, h);
  h = fnv1a64("\x1f", h);
  h = fnv1a64(c, h);
  return h;
}

CounterRng CounterRng::split(std::string_view label) const {
  return CounterRng(fnv1a64(label, key_ ^ 0x5851f42d4c957f2dull));
}

uint64_t CounterRng::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * 0x9e3779b97f4a7c15ull);
}

double CounterRng::uniform() {
  // 53 high-quality bits -> [0, 1)
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

int CounterRng::uniform_int(int lo, int hi) {
  const auto span = static_cast<uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(next_u64() % span);
}

bool CounterRng::bernoulli(double p) { return uniform() < p; }

double CounterRng::gaussian() {
  // Always consumes exactly two draws so the stream layout is fixed.
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1 + 1e-300));
  return r * std::cos(2.0 * M_PI * u2);
}

}  // namespace msr

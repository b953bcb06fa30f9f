#pragma once

#include <cstdint>
#include <string_view>

namespace msr {

// Counter-based generator, scheme "splitmix64-ctr-v1": the n-th output is
// mix64(key + n * 0x9e3779b97f4a7c15). A draw is a pure function of
// (key, counter), so independently-seeded streams can run in parallel and
// reproduce bit-exactly on any machine.
//
// Keys are derived with FNV-1a over (global_seed, label strings); see
// derive_key. The scheme string is part of every provenance sidecar.
class CounterRng {
 public:
  static constexpr const char* kScheme = "splitmix64-ctr-v1";

  explicit CounterRng(uint64_t key) : key_(key) {}

  static uint64_t derive_key(uint64_t global_seed, std::string_view a,
                             std::string_view b = {}, std::string_view c = {});

  // Sub-stream with an independent key; advancing one never affects the other.
  CounterRng split(std::string_view label) const;

  uint64_t next_u64();
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  int uniform_int(int lo, int hi);        // [lo, hi] inclusive
  bool bernoulli(double p);
  double gaussian();                      // standard normal, Box-Muller

  uint64_t key() const { return key_; }
  uint64_t counter() const { return counter_; }

 private:
  uint64_t key_ = 0;
  uint64_t counter_ = 0;
};

}  // namespace msr

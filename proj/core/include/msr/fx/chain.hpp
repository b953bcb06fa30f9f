#pragma once

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "msr/fx/effects.hpp"
#include "msr/rng.hpp"
#include "msr/stem_set.hpp"

namespace msr::fx {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  double sample(CounterRng& rng) const { return rng.uniform(lo, hi); }
};

// Per-effect inclusion probability and parameter ranges for one stem class.
// Chains are sampled in the fixed order eq -> compressor -> saturator ->
// reverb -> stereo_widener, and every effect consumes a fixed number of
// draws whether included or not, so chains stay stable when probabilities
// change.
struct StemFxConfig {
  struct {
    double prob = 0.0;
    std::vector<EqParams::Type> types{EqParams::Type::Peaking};
    Range center_hz{100.0, 8000.0};
    Range gain_db{-9.0, 9.0};
    Range q{0.5, 2.0};
  } eq;
  struct {
    double prob = 0.0;
    Range threshold_db{-30.0, -10.0};
    Range ratio{1.5, 8.0};
    Range attack_ms{1.0, 30.0};
    Range release_ms{50.0, 400.0};
    Range makeup_db{0.0, 6.0};
  } compressor;
  struct {
    double prob = 0.0;
    Range drive{0.5, 4.0};
  } saturator;
  struct {
    double prob = 0.0;
    Range decay_s{0.2, 1.2};
    Range wet{0.1, 0.4};
  } reverb;
  struct {
    double prob = 0.0;
    Range width{0.5, 1.8};
  } stereo_widener;
};

struct MasterChain {
  std::vector<EffectOp> ops;  // must end in a limiter

  void validate() const;
  double ceiling_db() const;
  dsp::Waveform apply(const dsp::Waveform& wave) const;
};

struct DegradationConfig {
  static constexpr int kSchemaVersion = 1;

  Range stem_gain_db{-6.0, 3.0};
  std::map<std::string, StemFxConfig> stem_classes;  // "default" is the fallback
  MasterChain master;

  const StemFxConfig& for_stem(const std::string& stem_class) const;
  void validate() const;

  static DegradationConfig defaults();
  static DegradationConfig load(const std::filesystem::path& path);
  static DegradationConfig from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
};

// Sampled per-stem effect chain; reproducible from (global_seed, track_id,
// stem_class) plus the config.
struct DegradationChain {
  std::vector<EffectOp> ops;
  uint64_t seed = 0;  // derived stream key
  std::string stem_class;

  // Applies ops in order. A stereo widener sampled for a mono stem is
  // skipped (logged at debug level); everything else is exact.
  dsp::Waveform apply(const dsp::Waveform& wave) const;
  nlohmann::ordered_json to_json() const;
};

DegradationChain sample_chain(uint64_t global_seed, const std::string& track_id,
                              const std::string& stem_class,
                              const DegradationConfig& cfg);

// The sampled per-stem gain applied after the chain (documented draw order:
// an independent "gain" stream of the same key).
double sample_stem_gain_db(uint64_t global_seed, const std::string& track_id,
                           const std::string& stem_class,
                           const DegradationConfig& cfg);

struct SynthesisResult {
  dsp::Waveform mixture;        // mastered sum of degraded stems
  StemSet degraded_stems;       // pre-master training targets
  std::map<std::string, DegradationChain> chains;
  std::map<std::string, double> gains_db;
};

SynthesisResult synthesize_mixture(const StemSet& stems, uint64_t global_seed,
                                   const std::string& track_id,
                                   const DegradationConfig& cfg,
                                   const MasterChain& master);

}  // namespace msr::fx

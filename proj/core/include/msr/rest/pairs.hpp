#pragma once

#include <filesystem>

#include "msr/fx/chain.hpp"
#include "msr/manifest.hpp"
#include "msr/sep/model.hpp"

namespace msr::rest {

// Excerpt-pair generation for expert training: run the separator on
// synthesized mixtures so restoration inputs carry realistic separation
// errors, then slice (estimate, clean stem) excerpts.
struct PairGenConfig {
  double excerpt_s = 4.0;
  double overlap = 0.5;  // fraction of the excerpt length
  fx::DegradationConfig degradation = fx::DegradationConfig::defaults();
};

struct PairGenResult {
  int64_t pairs = 0;
  int64_t tracks_done = 0;
  int64_t tracks_skipped = 0;
  std::filesystem::path manifest_path;  // JSONL, schema_version 1
};

// Deterministic given (manifest, separator parameters, global_seed, config):
// reruns produce byte-identical audio and manifest. Tracks whose stems fail
// to load are skipped with a warning; an empty result is an error.
PairGenResult generate_pairs(const sep::SeparatorModel& separator,
                             const TrackManifest& manifest, uint64_t global_seed,
                             const PairGenConfig& cfg,
                             const std::filesystem::path& out_dir, int jobs = 1);

}  // namespace msr::rest

#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "msr/common.hpp"
#include "msr/loss/losses.hpp"
#include "msr/sep/model.hpp"

namespace msr {

// Top-level run configuration consumed by the CLI. JSON with schema_version;
// every field is validated at load with an actionable message.
struct RunConfig {
  static constexpr int kSchemaVersion = 1;

  int sample_rate = kSampleRate;
  sep::SeparatorHParams separator;
  loss::LossWeights loss_weights;
  double frame_ms = loss::kDefaultFrameMs;
  double silence_threshold_db = loss::kDefaultSilenceDb;
  uint64_t seed = 0;
  std::optional<std::filesystem::path> degradation_config;  // JSON file
  double pair_excerpt_s = 4.0;
  double pair_overlap = 0.5;
  int train_steps = 200;
  double train_lr = 0.05;
  double train_clip_norm = 0.0;

  static RunConfig load(const std::filesystem::path& path);
  static RunConfig from_json_text(const std::string& text, const std::string& origin);
  void validate() const;
};

}  // namespace msr

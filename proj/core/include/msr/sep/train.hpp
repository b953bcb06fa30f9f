#pragma once

#include <string>
#include <vector>

#include "msr/loss/losses.hpp"
#include "msr/sep/model.hpp"

namespace msr::sep {

// Three-stage curriculum plans. Stages 1-2 adapt the transformer via LoRA
// (clean vs degraded data); stage 3 trains only the freshly added heads on
// degraded data with the backbone frozen.
struct StagePlan {
  int stage = 1;
  enum class DataMode { Clean, Degraded } data_mode = DataMode::Clean;
  std::vector<std::string> trainable_selectors;  // parameter-name prefixes
};

StagePlan make_stage_plan(int stage, const SeparatorModel& model);

// Applies the plan's trainable selection to the model's flags.
void apply_stage_plan(SeparatorModel& model, const StagePlan& plan);

struct TrainExample {
  dsp::Waveform mixture;
  StemSet targets;  // stems to supervise; each must have a trainable head
};

struct TrainOptions {
  int steps = 200;
  double lr = 0.05;
  double clip_norm = 0.0;  // 0 disables clipping
  loss::LossWeights weights;
  std::vector<dsp::StftConfig> mrstft_configs = loss::default_mrstft_configs();
  double frame_ms = loss::kDefaultFrameMs;
  double silence_threshold_db = loss::kDefaultSilenceDb;
};

// SGD over the trainable mask heads; everything else stays untouched.
// Backbone features and mixture spectra are precomputed once per example
// (valid because the backbone is frozen). Returns the combined loss per step
// (step 0 is evaluated before the first update). Aborts with NumericError if
// the loss goes non-finite.
std::vector<double> train_heads_stage3(SeparatorModel& model,
                                       const std::vector<TrainExample>& dataset,
                                       const TrainOptions& opts);

}  // namespace msr::sep

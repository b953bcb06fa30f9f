#pragma once

#include <string>

#include "msr/common.hpp"

namespace msr::rest {

// Five-stage restoration training schedule. Stages 1-3 follow the cited
// warm-up -> adversarial -> perceptual progression; stage 4 adds noise-focused
// augmentation; stage 5 specializes per instrument. Stages whose losses or
// data are outside this artifact are marked non-executable.
struct RestorationStagePlan {
  int stage = 1;
  std::string description;
  std::string data_source;
  std::string loss_set;
  bool executable = false;
  bool trains_experts = false;
};

inline RestorationStagePlan make_restoration_stage_plan(int stage) {
  switch (stage) {
    case 1:
      return {1, "generalist warm-up on restoration pairs",
              "generalist restoration pairs", "l1+mrstft", true, false};
    case 2:
      return {2, "adversarial training with feature matching",
              "generalist restoration pairs", "gan+feature-matching", false, false};
    case 3:
      return {3, "perceptual-metric fine-tuning",
              "generalist restoration pairs", "perceptual-metrics", false, false};
    case 4:
      return {4, "noise-artifact suppression with extra augmentation",
              "noise-augmented pairs (gramophone noise)", "l1+mrstft", false, false};
    case 5:
      return {5, "per-instrument expert fine-tuning",
              "instrument-filtered pairs", "l1+mrstft", true, true};
    default:
      throw ConfigError("restoration stage must be in 1..5");
  }
}

}  // namespace msr::rest

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "msr/fx/chain.hpp"
#include "msr/run_config.hpp"

namespace msr::cli {

// Options shared by every subcommand.
struct CommonOpts {
  std::string config_path;  // empty -> built-in defaults
  std::optional<uint64_t> seed;
  int jobs = 1;
  std::string out_dir = ".";
};

RunConfig load_run_config(const CommonOpts& opts);
fx::DegradationConfig load_degradation_config(const RunConfig& cfg);
uint64_t effective_seed(const RunConfig& cfg, const CommonOpts& opts);

// <track>_<stem>.wav naming contract; stem is the part after the last '_'.
std::pair<std::string, std::string> parse_track_stem(const std::filesystem::path& wav);
std::string track_of_mixture(const std::filesystem::path& wav);  // strips _mixture

// Expands directories into their sorted *.wav contents.
std::vector<std::filesystem::path> collect_wavs(const std::vector<std::string>& inputs);

// Exit codes, one per error class.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitShape = 4;
inline constexpr int kExitNumeric = 5;

// Runs fn, mapping the error taxonomy onto exit codes.
int run_guarded(const std::function<void()>& fn);

struct SynthesizeArgs {
  CommonOpts common;
  std::string manifest;
};
void cmd_synthesize(const SynthesizeArgs& args);

struct SeparateArgs {
  CommonOpts common;
  std::string checkpoint;
  std::vector<std::string> inputs;  // wav files or directories
};
void cmd_separate(const SeparateArgs& args);

struct SurgeryArgs {
  CommonOpts common;
  std::string subcommand;  // lora-merge | expand-heads
  std::string input_checkpoint;
  std::string output_checkpoint;
  std::vector<std::string> new_stems;  // expand-heads; empty -> canonical five
};
void cmd_surgery(const SurgeryArgs& args);

struct TrainStage3Args {
  CommonOpts common;
  std::string mixtures_manifest;
  std::string targets_manifest;
  std::string input_checkpoint;
  std::string output_checkpoint;
  int steps_override = 0;    // 0 -> config value
  double lr_override = -1.0; // <0 -> config value
};
void cmd_train_stage3(const TrainStage3Args& args);

struct RestoreArgs {
  CommonOpts common;
  std::string registry_dir;
  std::vector<std::string> inputs;
};
void cmd_restore(const RestoreArgs& args);

struct PairsArgs {
  CommonOpts common;
  std::string manifest;
  std::string checkpoint;
};
void cmd_pairs(const PairsArgs& args);

struct EvaluateArgs {
  CommonOpts common;
  std::string estimates_dir;
  std::string references_dir;
  std::string passthrough_path;  // optional JSON with external metric columns
};
void cmd_evaluate(const EvaluateArgs& args);

}  // namespace msr::cli

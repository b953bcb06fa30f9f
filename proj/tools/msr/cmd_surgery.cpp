#include <fmt/format.h>

#include <algorithm>

#include "cli_util.hpp"
#include "msr/common.hpp"
#include "msr/sep/model.hpp"
#include "msr/sep/train.hpp"

namespace msr::cli {

void cmd_surgery(const SurgeryArgs& args) {
  const RunConfig cfg = load_run_config(args.common);
  const uint64_t seed = effective_seed(cfg, args.common);
  sep::SeparatorModel model = sep::SeparatorModel::load(args.input_checkpoint);

  if (args.subcommand == "lora-merge") {
    sep::merge_lora(model);
    model.save(args.output_checkpoint);
    log_info(fmt::format("surgery: merged adapters -> {}", args.output_checkpoint));
    return;
  }
  if (args.subcommand == "expand-heads") {
    if (model.heads.size() != 4)
      throw ConfigError(fmt::format(
          "expand-heads expects a 4-head checkpoint, got {} heads", model.heads.size()));
    std::vector<std::string> new_stems = args.new_stems;
    if (new_stems.empty()) {
      // canonical five: instruments not covered by the 4-stem base model
      for (const auto& stem : instrument_stems())
        if (model.head_index(stem) < 0) new_stems.push_back(stem);
    }
    // expand_heads already leaves stage-3 flags: backbone and old heads
    // frozen, new heads trainable
    sep::SeparatorModel expanded = sep::expand_heads(model, new_stems, seed);
    expanded.extra_meta["surgery"] = {{"op", "expand-heads"}, {"seed", seed}};
    expanded.save(args.output_checkpoint);
    log_info(fmt::format("surgery: expanded {} -> {} heads, seed {} -> {}",
                         model.heads.size(), expanded.heads.size(), seed,
                         args.output_checkpoint));
    return;
  }
  throw ConfigError(fmt::format(
      "unknown surgery subcommand '{}' (expected lora-merge or expand-heads)",
      args.subcommand));
}

}  // namespace msr::cli

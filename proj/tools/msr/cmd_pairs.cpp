#include <fmt/format.h>

#include "cli_util.hpp"
#include "msr/common.hpp"
#include "msr/rest/pairs.hpp"

namespace msr::cli {

void cmd_pairs(const PairsArgs& args) {
  const RunConfig cfg = load_run_config(args.common);
  const uint64_t seed = effective_seed(cfg, args.common);
  const sep::SeparatorModel model = sep::SeparatorModel::load(args.checkpoint);
  const TrackManifest manifest = TrackManifest::load(args.manifest);

  rest::PairGenConfig pair_cfg;
  pair_cfg.excerpt_s = cfg.pair_excerpt_s;
  pair_cfg.overlap = cfg.pair_overlap;
  pair_cfg.degradation = load_degradation_config(cfg);

  const auto result = rest::generate_pairs(model, manifest, seed, pair_cfg,
                                           args.common.out_dir, args.common.jobs);
  log_info(fmt::format("pairs: {} pairs from {} tracks ({} skipped) -> {}",
                       result.pairs, result.tracks_done, result.tracks_skipped,
                       result.manifest_path.string()));
}

}  // namespace msr::cli

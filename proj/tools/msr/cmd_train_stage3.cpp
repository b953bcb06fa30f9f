#include <fmt/format.h>
#include <json.hpp>

#include <sstream>

#include "cli_util.hpp"
#include "msr/common.hpp"
#include "msr/dsp/wav_io.hpp"
#include "msr/io_util.hpp"
#include "msr/manifest.hpp"
#include "msr/sep/train.hpp"

namespace fs = std::filesystem;

namespace msr::cli {

namespace {

// mixtures manifest rows carry no stem_id; parsed separately
struct MixtureRow {
  std::string track_id;
  fs::path path;
};

std::vector<MixtureRow> load_mixtures_manifest(const fs::path& path) {
  std::vector<MixtureRow> rows;
  std::istringstream in(read_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw ConfigError(fmt::format("{}:{}: invalid JSON: {}", path.string(), lineno, e.what()));
    }
    MixtureRow row;
    row.track_id = j.value("track_id", "");
    row.path = j.value("path", "");
    if (row.track_id.empty() || row.path.empty())
      throw ConfigError(fmt::format("{}:{}: record needs track_id and path",
                                    path.string(), lineno));
    if (row.path.is_relative()) row.path = path.parent_path() / row.path;
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError(fmt::format("{}: empty manifest", path.string()));
  return rows;
}

}  // namespace

void cmd_train_stage3(const TrainStage3Args& args) {
  const RunConfig cfg = load_run_config(args.common);
  sep::SeparatorModel model = sep::SeparatorModel::load(args.input_checkpoint);
  if (model.heads.size() != 9)
    throw ConfigError(fmt::format(
        "train-stage3 expects a 9-head checkpoint, got {} heads", model.heads.size()));
  bool any_trainable = false;
  for (const auto& h : model.heads) any_trainable = any_trainable || h.trainable;
  if (!any_trainable)
    throw ConfigError(
        "checkpoint has no trainable heads; run `msr surgery expand-heads` first");

  const auto mixtures = load_mixtures_manifest(args.mixtures_manifest);
  const TrackManifest targets = TrackManifest::load(args.targets_manifest);
  const auto targets_by_track = targets.by_track();

  std::vector<sep::TrainExample> dataset;
  for (const auto& row : mixtures) {
    sep::TrainExample ex;
    ex.mixture = dsp::load_wav(row.path, cfg.sample_rate);
    auto it = targets_by_track.find(row.track_id);
    if (it == targets_by_track.end()) {
      log_warn(fmt::format("train: track '{}' has no targets, skipping", row.track_id));
      continue;
    }
    for (const ManifestEntry* e : it->second) {
      const int idx = model.head_index(e->stem_id);
      if (idx < 0 || !model.heads[static_cast<size_t>(idx)].trainable) {
        log_debug(fmt::format("train: target '{}' has no trainable head, ignored",
                              e->stem_id));
        continue;
      }
      ex.targets.emplace(e->stem_id, dsp::load_wav(e->path, cfg.sample_rate));
    }
    if (!ex.targets.empty()) dataset.push_back(std::move(ex));
  }
  if (dataset.empty())
    throw ConfigError("train-stage3: no usable (mixture, target) examples");

  sep::TrainOptions opts;
  opts.steps = args.steps_override > 0 ? args.steps_override : cfg.train_steps;
  opts.lr = args.lr_override >= 0.0 ? args.lr_override : cfg.train_lr;
  opts.clip_norm = cfg.train_clip_norm;
  opts.weights = cfg.loss_weights;
  opts.frame_ms = cfg.frame_ms;
  opts.silence_threshold_db = cfg.silence_threshold_db;

  const fs::path out_dir(args.common.out_dir);
  fs::create_directories(out_dir);
  std::vector<double> history;
  try {
    history = sep::train_heads_stage3(model, dataset, opts);
  } catch (const NumericError&) {
    // keep the last state whose loss was still finite
    const fs::path last_good = out_dir / "last_good.ckpt";
    model.save(last_good);
    log_error(fmt::format("train: aborted; last good checkpoint kept at {}",
                          last_good.string()));
    throw;
  }

  model.save(args.output_checkpoint);
  std::string csv = "step,combined_loss\n";
  for (size_t i = 0; i < history.size(); ++i)
    csv += fmt::format("{},{:.8f}\n", i, history[i]);
  atomic_write_file(out_dir / "loss_curve.csv", csv);
  log_info(fmt::format("train: {} steps, loss {:.5f} -> {:.5f}, checkpoint {}",
                       history.size(), history.front(), history.back(),
                       args.output_checkpoint));
}

}  // namespace msr::cli

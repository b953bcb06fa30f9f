#include "msr/run_config.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include "msr/io_util.hpp"

namespace msr {

RunConfig RunConfig::load(const std::filesystem::path& path) {
  return from_json_text(read_file(path), path.string());
}

RunConfig RunConfig::from_json_text(const std::string& text, const std::string& origin) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("{}: invalid JSON: {}", origin, e.what()));
  }
  const int version = j.value("schema_version", -1);
  if (version != kSchemaVersion)
    throw ConfigError(fmt::format(
        "{}: schema_version {} unsupported (expected {}); add \"schema_version\": {}",
        origin, version, kSchemaVersion, kSchemaVersion));

  RunConfig cfg;
  cfg.sample_rate = j.value("sample_rate", cfg.sample_rate);
  if (j.contains("separator")) {
    const auto& s = j.at("separator");
    cfg.separator.n_fft = s.value("n_fft", cfg.separator.n_fft);
    cfg.separator.hop = s.value("hop", cfg.separator.hop);
    cfg.separator.bands = s.value("bands", cfg.separator.bands);
    cfg.separator.dim = s.value("dim", cfg.separator.dim);
    cfg.separator.blocks = s.value("blocks", cfg.separator.blocks);
    cfg.separator.attn_heads = s.value("attn_heads", cfg.separator.attn_heads);
    cfg.separator.head_hidden = s.value("head_hidden", cfg.separator.head_hidden);
  }
  cfg.separator.sample_rate = cfg.sample_rate;
  if (j.contains("loss_weights")) {
    const auto& w = j.at("loss_weights");
    cfg.loss_weights.si_snr = w.value("si_snr", 1.0);
    cfg.loss_weights.mrstft = w.value("mrstft", 1.0);
    cfg.loss_weights.l1 = w.value("l1", 1.0);
    cfg.loss_weights.low_amp = w.value("low_amp", 1.0);
  }
  cfg.frame_ms = j.value("frame_ms", cfg.frame_ms);
  cfg.silence_threshold_db = j.value("silence_threshold_db", cfg.silence_threshold_db);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("degradation_config"))
    cfg.degradation_config = j.at("degradation_config").get<std::string>();
  if (j.contains("pairs")) {
    cfg.pair_excerpt_s = j.at("pairs").value("excerpt_s", cfg.pair_excerpt_s);
    cfg.pair_overlap = j.at("pairs").value("overlap", cfg.pair_overlap);
  }
  if (j.contains("train")) {
    cfg.train_steps = j.at("train").value("steps", cfg.train_steps);
    cfg.train_lr = j.at("train").value("lr", cfg.train_lr);
    cfg.train_clip_norm = j.at("train").value("clip_norm", cfg.train_clip_norm);
  }
  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  if (sample_rate <= 0)
    throw ConfigError("config: sample_rate must be positive");
  separator.validate();
  loss_weights.validate();
  if (frame_ms <= 0) throw ConfigError("config: frame_ms must be positive");
  if (pair_excerpt_s <= 0)
    throw ConfigError("config: pairs.excerpt_s must be positive");
  if (pair_overlap < 0 || pair_overlap >= 1)
    throw ConfigError("config: pairs.overlap must be in [0, 1)");
  if (train_steps < 1) throw ConfigError("config: train.steps must be >= 1");
  if (train_lr < 0) throw ConfigError("config: train.lr must be >= 0");
}

}  // namespace msr

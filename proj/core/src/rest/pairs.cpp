#include "msr/rest/pairs.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>

#include "msr/common.hpp"
#include "msr/dsp/wav_io.hpp"
#include "msr/io_util.hpp"

namespace msr::rest {

namespace {

dsp::Waveform slice(const dsp::Waveform& w, int64_t offset, int64_t len) {
  dsp::Waveform out(w.channels, len, w.sample_rate);
  for (int c = 0; c < w.channels; ++c) {
    auto src = w.channel(c);
    auto dst = out.channel(c);
    for (int64_t i = 0; i < len; ++i) dst[i] = src[offset + i];
  }
  return out;
}

struct TrackPairs {
  std::string track_id;
  std::vector<nlohmann::ordered_json> records;
  bool skipped = false;
};

}  // namespace

PairGenResult generate_pairs(const sep::SeparatorModel& separator,
                             const TrackManifest& manifest, uint64_t global_seed,
                             const PairGenConfig& cfg,
                             const std::filesystem::path& out_dir, int jobs) {
  if (cfg.excerpt_s <= 0.0 || cfg.overlap < 0.0 || cfg.overlap >= 1.0)
    throw ConfigError("generate_pairs: bad excerpt/overlap settings");
  cfg.degradation.validate();
  std::filesystem::create_directories(out_dir);

  const int sr = separator.hparams.sample_rate;
  const int64_t excerpt_len = static_cast<int64_t>(std::llround(cfg.excerpt_s * sr));
  const int64_t hop = std::max<int64_t>(
      1, static_cast<int64_t>(std::llround(excerpt_len * (1.0 - cfg.overlap))));
  const std::string ckpt_hash = hex64(separator.to_checkpoint().payload_checksum());

  const auto grouped = manifest.by_track();
  const auto track_ids = manifest.track_ids();
  std::vector<TrackPairs> results(track_ids.size());

  parallel_for(track_ids.size(), jobs, [&](size_t ti) {
    const std::string& track = track_ids[ti];
    TrackPairs& tp = results[ti];
    tp.track_id = track;

    StemSet stems;
    try {
      for (const ManifestEntry* e : grouped.at(track))
        stems.emplace(e->stem_id, dsp::load_wav(e->path, sr));
    } catch (const Error& e) {
      log_warn(fmt::format("pairs: skipping track '{}': {}", track, e.what()));
      tp.skipped = true;
      return;
    }
    // stems must agree in length within one hop; trim to the shortest
    int64_t min_len = stems.begin()->second.num_frames();
    int64_t max_len = min_len;
    for (const auto& [_, w] : stems) {
      min_len = std::min(min_len, w.num_frames());
      max_len = std::max(max_len, w.num_frames());
    }
    if (max_len - min_len > separator.hparams.hop) {
      log_warn(fmt::format("pairs: skipping track '{}': stem durations differ by more than one hop", track));
      tp.skipped = true;
      return;
    }
    for (auto& [_, w] : stems)
      if (w.num_frames() > min_len) w = slice(w, 0, min_len);

    const auto synth = fx::synthesize_mixture(stems, global_seed, track,
                                              cfg.degradation, cfg.degradation.master);
    const StemSet estimates = sep::separate(synth.mixture, separator);

    for (const auto& [stem, clean] : stems) {
      if (stem == "other") continue;  // experts cover the eight instruments
      auto est_it = estimates.find(stem);
      if (est_it == estimates.end()) {
        log_debug(fmt::format("pairs: separator has no '{}' head, skipping", stem));
        continue;
      }
      const int64_t n = clean.num_frames();
      if (n < excerpt_len) continue;
      const int64_t count = (n - excerpt_len) / hop + 1;
      for (int64_t i = 0; i < count; ++i) {
        const int64_t offset = i * hop;
        const std::string pair_id = fmt::format("{}_{}_{:03d}", track, stem, i);
        const std::string in_name = pair_id + "_input.wav";
        const std::string tgt_name = pair_id + "_target.wav";
        dsp::save_wav(out_dir / in_name, slice(est_it->second, offset, excerpt_len));
        dsp::save_wav(out_dir / tgt_name, slice(clean, offset, excerpt_len));
        nlohmann::ordered_json rec;
        rec["schema_version"] = 1;
        rec["pair_id"] = pair_id;
        rec["track_id"] = track;
        rec["stem_id"] = stem;
        rec["input_path"] = in_name;
        rec["target_path"] = tgt_name;
        rec["offset_s"] = static_cast<double>(offset) / sr;
        rec["duration_s"] = static_cast<double>(excerpt_len) / sr;
        rec["seed"] = global_seed;
        rec["separator_checkpoint_hash"] = ckpt_hash;
        tp.records.push_back(std::move(rec));
      }
    }
  });

  // write the manifest in track order regardless of job interleaving
  PairGenResult result;
  std::string lines;
  for (const auto& tp : results) {
    if (tp.skipped) {
      ++result.tracks_skipped;
      continue;
    }
    ++result.tracks_done;
    for (const auto& rec : tp.records) {
      lines += rec.dump() + "\n";
      ++result.pairs;
    }
  }
  if (result.pairs == 0)
    throw ConfigError("generate_pairs: no pairs produced (tracks too short or all skipped)");
  result.manifest_path = out_dir / "pairs.jsonl";
  atomic_write_file(result.manifest_path, lines);
  return result;
}

}  // namespace msr::rest

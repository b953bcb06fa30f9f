#include <fmt/format.h>
#include <json.hpp>

#include "cli_util.hpp"
#include "msr/common.hpp"
#include "msr/dsp/wav_io.hpp"
#include "msr/io_util.hpp"
#include "msr/manifest.hpp"

namespace fs = std::filesystem;

namespace msr::cli {

namespace {

dsp::Waveform trimmed(const dsp::Waveform& w, int64_t len) {
  if (w.num_frames() == len) return w;
  dsp::Waveform out(w.channels, len, w.sample_rate);
  for (int c = 0; c < w.channels; ++c)
    std::copy_n(w.channel(c).begin(), len, out.channel(c).begin());
  return out;
}

}  // namespace

void cmd_synthesize(const SynthesizeArgs& args) {
  const RunConfig cfg = load_run_config(args.common);
  const auto degrade = load_degradation_config(cfg);
  const uint64_t seed = effective_seed(cfg, args.common);
  const TrackManifest manifest = TrackManifest::load(args.manifest);
  const fs::path out_dir(args.common.out_dir);
  fs::create_directories(out_dir);

  const auto grouped = manifest.by_track();
  const auto tracks = manifest.track_ids();

  struct Row {
    std::string track;
    int64_t frames = 0;
    std::vector<std::string> stem_ids;
  };
  std::vector<Row> rows(tracks.size());

  parallel_for(tracks.size(), args.common.jobs, [&](size_t ti) {
    const std::string& track = tracks[ti];
    StemSet stems;
    int64_t min_len = -1, max_len = 0;
    for (const ManifestEntry* e : grouped.at(track)) {
      dsp::Waveform w = dsp::load_wav(e->path, cfg.sample_rate);
      min_len = min_len < 0 ? w.num_frames() : std::min(min_len, w.num_frames());
      max_len = std::max(max_len, w.num_frames());
      stems.emplace(e->stem_id, std::move(w));
    }
    if (max_len - min_len > cfg.separator.hop)
      throw ShapeError(fmt::format(
          "track '{}': stem durations spread {} samples, more than one hop ({})",
          track, max_len - min_len, cfg.separator.hop));
    for (auto& [_, w] : stems) w = trimmed(w, min_len);

    const auto synth = fx::synthesize_mixture(stems, seed, track, degrade, degrade.master);
    dsp::save_wav(out_dir / fmt::format("{}_mixture.wav", track), synth.mixture);
    for (const auto& [stem, wave] : synth.degraded_stems)
      dsp::save_wav(out_dir / fmt::format("{}_{}.wav", track, stem), wave);

    nlohmann::ordered_json sidecar;
    sidecar["schema_version"] = 1;
    sidecar["track_id"] = track;
    sidecar["seed"] = seed;
    sidecar["rng_scheme"] = CounterRng::kScheme;
    auto& chains = sidecar["chains"] = nlohmann::ordered_json::object();
    for (const auto& [stem, chain] : synth.chains) chains[stem] = chain.to_json();
    auto& gains = sidecar["gains_db"] = nlohmann::ordered_json::object();
    for (const auto& [stem, g] : synth.gains_db) gains[stem] = g;
    sidecar["master_ceiling_db"] = degrade.master.ceiling_db();
    atomic_write_file(out_dir / fmt::format("{}_provenance.json", track),
                      sidecar.dump(2) + "\n");

    Row row;
    row.track = track;
    row.frames = synth.mixture.num_frames();
    for (const auto& [stem, _] : synth.degraded_stems) row.stem_ids.push_back(stem);
    rows[ti] = std::move(row);
  });

  // companion manifests for the training and evaluation commands
  std::string mixtures, targets;
  for (const auto& row : rows) {
    nlohmann::ordered_json m;
    m["schema_version"] = TrackManifest::kSchemaVersion;
    m["track_id"] = row.track;
    m["path"] = fmt::format("{}_mixture.wav", row.track);
    m["sample_rate"] = cfg.sample_rate;
    m["duration_s"] = static_cast<double>(row.frames) / cfg.sample_rate;
    mixtures += m.dump() + "\n";
    for (const auto& stem : row.stem_ids) {
      nlohmann::ordered_json t;
      t["schema_version"] = TrackManifest::kSchemaVersion;
      t["track_id"] = row.track;
      t["stem_id"] = stem;
      t["path"] = fmt::format("{}_{}.wav", row.track, stem);
      t["sample_rate"] = cfg.sample_rate;
      t["duration_s"] = static_cast<double>(row.frames) / cfg.sample_rate;
      targets += t.dump() + "\n";
    }
  }
  atomic_write_file(out_dir / "mixtures.jsonl", mixtures);
  atomic_write_file(out_dir / "targets.jsonl", targets);
  log_info(fmt::format("synthesize: {} tracks -> {}", tracks.size(), out_dir.string()));
}

}  // namespace msr::cli

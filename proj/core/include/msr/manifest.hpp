#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace msr {

// One JSON-Lines record of a track manifest: where each stem of each track
// lives on disk. schema_version 1.
struct ManifestEntry {
  std::string track_id;
  std::string stem_id;
  std::filesystem::path path;
  int sample_rate = 0;
  double duration_s = 0.0;
};

struct TrackManifest {
  static constexpr int kSchemaVersion = 1;

  std::vector<ManifestEntry> entries;

  // Parses JSONL; validates stem ids against the canonical set and (when
  // check_paths) that every referenced file exists.
  static TrackManifest load(const std::filesystem::path& path, bool check_paths = true);
  void save(const std::filesystem::path& path) const;

  std::vector<std::string> track_ids() const;  // unique, in first-seen order
  std::map<std::string, std::vector<const ManifestEntry*>> by_track() const;
};

}  // namespace msr

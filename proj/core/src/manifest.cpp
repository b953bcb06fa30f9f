#include "msr/manifest.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <sstream>

#include "msr/common.hpp"
#include "msr/io_util.hpp"

namespace msr {

TrackManifest TrackManifest::load(const std::filesystem::path& path, bool check_paths) {
  const std::string text = read_file(path);
  TrackManifest manifest;
  std::istringstream in(text);
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
    const int version = j.value("schema_version", kSchemaVersion);
    if (version != kSchemaVersion)
      throw ConfigError(fmt::format("{}:{}: schema_version {} unsupported",
                                    path.string(), lineno, version));
    ManifestEntry e;
    e.track_id = j.value("track_id", "");
    e.stem_id = j.value("stem_id", "");
    e.path = j.value("path", "");
    e.sample_rate = j.value("sample_rate", 0);
    e.duration_s = j.value("duration_s", 0.0);
    if (e.track_id.empty() || e.stem_id.empty() || e.path.empty())
      throw ConfigError(fmt::format(
          "{}:{}: record needs track_id, stem_id and path", path.string(), lineno));
    if (!is_known_stem(e.stem_id))
      throw ConfigError(fmt::format("{}:{}: unknown stem_id '{}'", path.string(),
                                    lineno, e.stem_id));
    if (e.path.is_relative()) e.path = path.parent_path() / e.path;
    if (check_paths && !std::filesystem::exists(e.path))
      throw IoError(fmt::format("{}:{}: stem file missing: {}", path.string(),
                                lineno, e.path.string()));
    manifest.entries.push_back(std::move(e));
  }
  if (manifest.entries.empty())
    throw ConfigError(fmt::format("{}: manifest is empty", path.string()));
  return manifest;
}

void TrackManifest::save(const std::filesystem::path& path) const {
  std::string out;
  for (const auto& e : entries) {
    nlohmann::ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["track_id"] = e.track_id;
    j["stem_id"] = e.stem_id;
    j["path"] = e.path.string();
    j["sample_rate"] = e.sample_rate;
    j["duration_s"] = e.duration_s;
    out += j.dump() + "\n";
  }
  atomic_write_file(path, out);
}

std::vector<std::string> TrackManifest::track_ids() const {
  std::vector<std::string> ids;
  for (const auto& e : entries)
    if (std::find(ids.begin(), ids.end(), e.track_id) == ids.end())
      ids.push_back(e.track_id);
  return ids;
}

std::map<std::string, std::vector<const ManifestEntry*>> TrackManifest::by_track() const {
  std::map<std::string, std::vector<const ManifestEntry*>> out;
  for (const auto& e : entries) out[e.track_id].push_back(&e);
  return out;
}

}  // namespace msr

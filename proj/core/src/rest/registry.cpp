#include "msr/rest/registry.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include "msr/common.hpp"
#include "msr/io_util.hpp"

namespace msr::rest {

const RestorationBundle& route(const std::string& stem_id,
                               const ExpertRegistry& registry) {
  auto it = registry.experts.find(stem_id);
  return it != registry.experts.end() ? it->second : registry.generalist;
}

StemSet restore_all(const StemSet& stems, const ExpertRegistry& registry) {
  StemSet out;
  for (const auto& [stem, wave] : stems) {
    if (stem == "other") {
      out.emplace(stem, wave);  // no expert class for the auxiliary stem
      continue;
    }
    out.emplace(stem, restore(wave, route(stem, registry)));
  }
  return out;
}

void save_registry(const std::filesystem::path& dir, const ExpertRegistry& registry) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json index;
  index["schema_version"] = 1;
  index["generalist"] = "generalist.ckpt";
  registry.generalist.save(dir / "generalist.ckpt");
  auto& experts = index["experts"] = nlohmann::ordered_json::object();
  for (const auto& [stem, bundle] : registry.experts) {
    const std::string file = stem + ".ckpt";
    bundle.save(dir / file);
    experts[stem] = file;
  }
  atomic_write_file(dir / "index.json", index.dump(2) + "\n");
}

ExpertRegistry load_registry(const std::filesystem::path& dir) {
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(read_file(dir / "index.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(fmt::format("{}: malformed registry index: {}",
                              (dir / "index.json").string(), e.what()));
  }
  if (index.value("schema_version", -1) != 1)
    throw ConfigError(fmt::format("{}: unsupported registry schema", dir.string()));
  ExpertRegistry registry;
  registry.generalist =
      RestorationBundle::load(dir / index.value("generalist", "generalist.ckpt"));
  if (index.contains("experts"))
    for (const auto& [stem, file] : index.at("experts").items()) {
      if (!is_known_stem(stem))
        throw ConfigError(fmt::format("{}: registry expert for unknown stem '{}'",
                                      dir.string(), stem));
      registry.experts.emplace(stem, RestorationBundle::load(dir / file.get<std::string>()));
    }
  return registry;
}

}  // namespace msr::rest

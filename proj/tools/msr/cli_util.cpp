#include "cli_util.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <functional>

#include "msr/common.hpp"

namespace fs = std::filesystem;

namespace msr::cli {

RunConfig load_run_config(const CommonOpts& opts) {
  if (opts.config_path.empty()) {
    RunConfig cfg;
    cfg.validate();
    return cfg;
  }
  return RunConfig::load(opts.config_path);
}

fx::DegradationConfig load_degradation_config(const RunConfig& cfg) {
  if (cfg.degradation_config) return fx::DegradationConfig::load(*cfg.degradation_config);
  return fx::DegradationConfig::defaults();
}

uint64_t effective_seed(const RunConfig& cfg, const CommonOpts& opts) {
  return opts.seed ? *opts.seed : cfg.seed;
}

std::pair<std::string, std::string> parse_track_stem(const fs::path& wav) {
  const std::string name = wav.stem().string();
  const auto pos = name.rfind('_');
  if (pos == std::string::npos || pos == 0 || pos + 1 >= name.size())
    throw ConfigError(fmt::format(
        "{}: filename does not follow the <track>_<stem>.wav convention", wav.string()));
  return {name.substr(0, pos), name.substr(pos + 1)};
}

std::string track_of_mixture(const fs::path& wav) {
  std::string name = wav.stem().string();
  const std::string suffix = "_mixture";
  if (name.size() > suffix.size() &&
      name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
    name.erase(name.size() - suffix.size());
  return name;
}

std::vector<fs::path> collect_wavs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> batch;
      for (const auto& e : fs::directory_iterator(p))
        if (e.path().extension() == ".wav") batch.push_back(e.path());
      std::sort(batch.begin(), batch.end());
      out.insert(out.end(), batch.begin(), batch.end());
    } else if (fs::exists(p)) {
      out.push_back(p);
    } else {
      throw IoError(fmt::format("input not found: {}", in));
    }
  }
  if (out.empty()) throw IoError("no input wav files");
  return out;
}

int run_guarded(const std::function<void()>& fn) {
  try {
    fn();
    return kExitOk;
  } catch (const ConfigError& e) {
    log_error(e.what());
    return kExitConfig;
  } catch (const IoError& e) {
    log_error(e.what());
    return kExitIo;
  } catch (const ShapeError& e) {
    log_error(e.what());
    return kExitShape;
  } catch (const NumericError& e) {
    log_error(e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    log_error(e.what());
    return kExitUsage;
  }
}

}  // namespace msr::cli

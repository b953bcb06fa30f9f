#include "msr/loss/metrics.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <cmath>
#include <set>

#include "msr/common.hpp"
#include "msr/dsp/mel.hpp"
#include "msr/loss/losses.hpp"

namespace msr::loss {

namespace {
constexpr const char* kMmsnrNote =
    "mmsnr: stand-in definition (official challenge metric is external)";
}

std::vector<MelConfig> default_mmsnr_configs() {
  return {
      {{512, 128, dsp::WindowKind::Hann, true}, 32, 0.0, 0.0},
      {{1024, 256, dsp::WindowKind::Hann, true}, 64, 0.0, 0.0},
      {{2048, 512, dsp::WindowKind::Hann, true}, 128, 0.0, 0.0},
  };
}

double mmsnr_db(const dsp::Waveform& est, const dsp::Waveform& ref,
                const std::vector<MelConfig>& configs) {
  if (configs.empty()) throw ConfigError("mmsnr: no configs");
  if (est.channels != ref.channels || est.num_frames() != ref.num_frames())
    throw ShapeError("mmsnr: waveform layouts differ");

  double total = 0.0;
  for (const auto& mc : configs) {
    const double f_max = mc.f_max > 0 ? mc.f_max : ref.sample_rate / 2.0;
    const auto fb = dsp::mel_filterbank(mc.n_mels, mc.stft.n_fft,
                                        ref.sample_rate, mc.f_min, f_max);
    const auto se = dsp::stft(est, mc.stft);
    const auto sr = dsp::stft(ref, mc.stft);
    double num = 0.0, den = 0.0;
    for (int c = 0; c < sr.channels; ++c) {
      for (int64_t t = 0; t < sr.frames; ++t) {
        for (int m = 0; m < mc.n_mels; ++m) {
          double mr = 0.0, me = 0.0;
          for (int k = 0; k < sr.bins; ++k) {
            const float w = fb[m][k];
            if (w == 0.0f) continue;
            mr += w * std::abs(std::complex<double>(sr.at(c, t, k)));
            me += w * std::abs(std::complex<double>(se.at(c, t, k)));
          }
          num += mr * mr;
          den += (mr - me) * (mr - me);
        }
      }
    }
    if (num <= 1e-30) throw NumericError("mmsnr: reference is silent (undefined)");
    const double db = 10.0 * std::log10(num / (den + 1e-300));
    total += std::clamp(db, -100.0, 100.0);
  }
  return total / static_cast<double>(configs.size());
}

MetricReport aggregate_report(const std::map<std::string, MetricRecord>& per_stem) {
  if (per_stem.empty()) throw ConfigError("aggregate_report: no stems");
  const auto& first = per_stem.begin()->second;
  std::set<std::string> keys;
  for (const auto& [k, _] : first) keys.insert(k);
  for (const auto& [stem, rec] : per_stem) {
    if (rec.size() != keys.size())
      throw ConfigError(fmt::format("aggregate_report: stem '{}' has inconsistent metrics", stem));
    for (const auto& [k, _] : rec)
      if (!keys.count(k))
        throw ConfigError(fmt::format(
            "aggregate_report: stem '{}' carries unexpected metric '{}'", stem, k));
  }
  MetricReport report;
  report.per_stem = per_stem;
  for (const auto& key : keys) {
    double acc = 0.0;
    for (const auto& [_, rec] : per_stem) acc += rec.at(key);
    report.averages[key] = acc / static_cast<double>(per_stem.size());
  }
  if (keys.count("mmsnr")) report.notes.push_back(kMmsnrNote);
  return report;
}

std::string report_to_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  auto& stems = j["per_stem"] = nlohmann::ordered_json::object();
  for (const auto& [stem, rec] : report.per_stem) {
    auto& o = stems[stem] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : rec) o[k] = v;
  }
  auto& avg = j["average"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.averages) avg[k] = v;
  j["notes"] = report.notes;
  return j.dump(2) + "\n";
}

std::string report_to_csv(const MetricReport& report) {
  std::string out = "stem";
  for (const auto& [k, _] : report.averages) out += fmt::format(",{}", k);
  out += "\n";
  for (const auto& [stem, rec] : report.per_stem) {
    out += stem;
    for (const auto& [k, _] : report.averages)
      out += fmt::format(",{:.4f}", rec.at(k));
    out += "\n";
  }
  out += "average";
  for (const auto& [_, v] : report.averages) out += fmt::format(",{:.4f}", v);
  out += "\n";
  for (const auto& note : report.notes) out += fmt::format("# {}\n", note);
  return out;
}

}  // namespace msr::loss

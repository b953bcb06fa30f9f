#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <map>
#include <set>

#include "cli_util.hpp"
#include "msr/common.hpp"
#include "msr/dsp/wav_io.hpp"
#include "msr/io_util.hpp"
#include "msr/loss/losses.hpp"
#include "msr/loss/metrics.hpp"

namespace fs = std::filesystem;

namespace msr::cli {

namespace {

std::map<std::string, std::map<std::string, double>> load_passthrough(const fs::path& p) {
  // {"vocals": {"fad": 0.3, "zimt": 0.02}, ...} — externally computed values
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(p));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("{}: invalid passthrough JSON: {}", p.string(), e.what()));
  }
  std::map<std::string, std::map<std::string, double>> out;
  for (const auto& [stem, rec] : j.items())
    for (const auto& [metric, value] : rec.items())
      out[stem][metric] = value.get<double>();
  return out;
}

}  // namespace

void cmd_evaluate(const EvaluateArgs& args) {
  const RunConfig cfg = load_run_config(args.common);
  const fs::path est_dir(args.estimates_dir), ref_dir(args.references_dir);
  const fs::path out_dir(args.common.out_dir);
  fs::create_directories(out_dir);

  std::vector<fs::path> refs;
  for (const auto& e : fs::directory_iterator(ref_dir))
    if (e.path().extension() == ".wav") refs.push_back(e.path());
  std::sort(refs.begin(), refs.end());
  if (refs.empty()) throw IoError(fmt::format("{}: no reference wavs", ref_dir.string()));

  std::vector<std::string> missing;
  for (const auto& ref : refs)
    if (!fs::exists(est_dir / ref.filename()))
      missing.push_back(ref.filename().string());
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += "\n  missing estimate: " + m;
    throw IoError(fmt::format("estimate/reference layout mismatch:{}", list));
  }

  const auto mmsnr_cfgs = loss::default_mmsnr_configs();
  struct Accum {
    double mmsnr = 0.0, si_snr = 0.0;
    int count = 0;
  };
  std::map<std::string, Accum> per_stem;
  std::vector<std::string> flagged;
  std::mutex mu;

  parallel_for(refs.size(), args.common.jobs, [&](size_t i) {
    const fs::path& ref_path = refs[i];
    const auto [track, stem] = parse_track_stem(ref_path);
    const dsp::Waveform ref = dsp::load_wav(ref_path, cfg.sample_rate);
    const dsp::Waveform est = dsp::load_wav(est_dir / ref_path.filename(), cfg.sample_rate);
    if (dsp::is_silent(ref)) {
      std::lock_guard<std::mutex> lock(mu);
      flagged.push_back(fmt::format("{}: silent reference, excluded from means",
                                    ref_path.filename().string()));
      return;
    }
    const double mm = loss::mmsnr_db(est, ref, mmsnr_cfgs);
    const double si = loss::si_snr_db(est, ref);
    std::lock_guard<std::mutex> lock(mu);
    auto& acc = per_stem[stem];
    acc.mmsnr += mm;
    acc.si_snr += si;
    ++acc.count;
  });
  if (per_stem.empty())
    throw NumericError("evaluate: every reference stem was silent");

  std::map<std::string, loss::MetricRecord> records;
  for (const auto& [stem, acc] : per_stem)
    records[stem] = {{"mmsnr", acc.mmsnr / acc.count}, {"si_snr", acc.si_snr / acc.count}};

  if (!args.passthrough_path.empty()) {
    const auto extra = load_passthrough(args.passthrough_path);
    for (auto& [stem, rec] : records) {
      auto it = extra.find(stem);
      if (it == extra.end()) continue;
      for (const auto& [metric, value] : it->second) rec[metric] = value;
    }
    // aggregate_report requires a rectangular table
    std::set<std::string> keys;
    for (const auto& [_, rec] : records)
      for (const auto& [k, __] : rec) keys.insert(k);
    for (auto& [stem, rec] : records)
      for (const auto& k : keys)
        if (!rec.count(k))
          throw ConfigError(fmt::format(
              "passthrough: stem '{}' is missing metric '{}'", stem, k));
  }

  loss::MetricReport report = loss::aggregate_report(records);
  for (const auto& f : flagged) report.notes.push_back(f);
  atomic_write_file(out_dir / "report.json", loss::report_to_json(report));
  atomic_write_file(out_dir / "report.csv", loss::report_to_csv(report));
  log_info(fmt::format("evaluate: {} stems -> {}", records.size(), out_dir.string()));
}

}  // namespace msr::cli

#pragma once

#include <map>
#include <string>
#include <vector>

#include "msr/dsp/stft.hpp"

namespace msr::loss {

// Mel-spectrogram resolution used by the MMSNR stand-in metric.
struct MelConfig {
  dsp::StftConfig stft;
  int n_mels = 64;
  double f_min = 0.0;
  double f_max = 0.0;  // 0 -> Nyquist
};

// Three resolutions, densities chosen so every mel filter keeps at least one
// FFT bin at 44.1 kHz. This is a declared stand-in, not the official
// challenge definition (which is not public); reports carry that label.
std::vector<MelConfig> default_mmsnr_configs();

// Mean over configs of 10*log10(sum M_ref^2 / sum (M_ref - M_est)^2) on
// mel-magnitude spectrograms, clamped to [-100, 100].
double mmsnr_db(const dsp::Waveform& est, const dsp::Waveform& ref,
                const std::vector<MelConfig>& configs);

using MetricRecord = std::map<std::string, double>;  // metric name -> value

struct MetricReport {
  std::map<std::string, MetricRecord> per_stem;
  MetricRecord averages;  // unweighted arithmetic means
  std::vector<std::string> notes;
};

// Unweighted means across stems. Every stem must carry the same metric keys.
MetricReport aggregate_report(const std::map<std::string, MetricRecord>& per_stem);

std::string report_to_json(const MetricReport& report);
std::string report_to_csv(const MetricReport& report);

}  // namespace msr::loss

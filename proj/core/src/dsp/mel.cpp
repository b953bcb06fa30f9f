#include "msr/dsp/mel.hpp"

#include <fmt/format.h>

#include <cmath>

#include "msr/common.hpp"

namespace msr::dsp {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::vector<std::vector<float>> mel_filterbank(int n_mels, int n_fft,
                                               int sample_rate, double f_min,
                                               double f_max) {
  if (n_mels < 1) throw ConfigError("mel_filterbank: n_mels must be >= 1");
  const double nyquist = sample_rate / 2.0;
  if (f_min < 0.0 || f_min >= f_max || f_max > nyquist + 1e-9)
    throw ConfigError(fmt::format(
        "mel_filterbank: need 0 <= f_min < f_max <= {}, got [{}, {}]",
        nyquist, f_min, f_max));

  const int bins = n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(f_min);
  const double mel_hi = hz_to_mel(f_max);
  std::vector<double> edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));

  std::vector<std::vector<float>> fb(n_mels, std::vector<float>(bins, 0.0f));
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    double row_sum = 0.0;
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      double v = 0.0;
      if (f > lo && f < hi)
        v = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
      fb[m][k] = static_cast<float>(v);
      row_sum += v;
    }
    if (row_sum <= 0.0)
      throw ConfigError(fmt::format(
          "mel_filterbank: filter {} is empty; n_mels={} is too dense for "
          "n_fft={} at {} Hz",
          m, n_mels, n_fft, sample_rate));
  }
  return fb;
}

}  // namespace msr::dsp

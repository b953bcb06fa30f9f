#include "msr/sep/band_scheme.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "msr/common.hpp"
#include "msr/dsp/mel.hpp"

namespace msr::sep {

void BandSplitScheme::validate(int bins) const {
  if (bands.size() < 2)
    throw ConfigError("band scheme needs at least 2 bands");
  if (dim < 1) throw ConfigError("band scheme: embedding dim must be >= 1");
  int expected = 0;
  for (const auto& [start, end] : bands) {
    if (start != expected || end <= start)
      throw ConfigError(fmt::format(
          "band scheme: ranges must be contiguous and nonempty (got [{}, {}) after {})",
          start, end, expected));
    expected = end;
  }
  if (expected != bins)
    throw ConfigError(fmt::format(
        "band scheme covers {} bins but the spectrogram has {}", expected, bins));
}

BandSplitScheme mel_band_scheme(int n_bands, int n_fft, int sample_rate, int dim) {
  if (n_bands < 2) throw ConfigError("mel_band_scheme: need >= 2 bands");
  const int bins = n_fft / 2 + 1;
  if (n_bands > bins)
    throw ConfigError(fmt::format("mel_band_scheme: {} bands exceed {} bins", n_bands, bins));

  const double mel_hi = dsp::hz_to_mel(sample_rate / 2.0);
  const double bin_hz = static_cast<double>(sample_rate) / n_fft;
  std::vector<int> edges{0};
  for (int i = 1; i < n_bands; ++i) {
    const double hz = dsp::mel_to_hz(mel_hi * i / n_bands);
    int e = static_cast<int>(std::lround(hz / bin_hz));
    e = std::clamp(e, edges.back() + 1, bins - (n_bands - i));  // keep every band nonempty
    edges.push_back(e);
  }
  edges.push_back(bins);

  BandSplitScheme scheme;
  scheme.dim = dim;
  for (int b = 0; b < n_bands; ++b) scheme.bands.emplace_back(edges[b], edges[b + 1]);
  scheme.validate(bins);
  return scheme;
}

}  // namespace msr::sep

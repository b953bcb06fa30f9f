#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace msr::sep {

// Partition of STFT bins into contiguous bands: [start, end) pairs that are
// disjoint and cover every bin exactly once.
struct BandSplitScheme {
  std::vector<std::pair<int, int>> bands;
  int dim = 64;  // per-band embedding width

  int num_bands() const { return static_cast<int>(bands.size()); }
  int band_width(int b) const { return bands[b].second - bands[b].first; }
  int total_bins() const { return bands.empty() ? 0 : bands.back().second; }
  void validate(int bins) const;
};

// Mel-spaced band boundaries rounded to bins (at least one bin per band).
BandSplitScheme mel_band_scheme(int n_bands, int n_fft, int sample_rate, int dim);

}  // namespace msr::sep

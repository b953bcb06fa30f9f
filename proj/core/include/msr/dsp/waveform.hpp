#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace msr::dsp {

// Planar float audio buffer, channels x frames. Samples nominally in [-1, 1]
// (intermediate processing may exceed that; the limiter restores the bound).
struct Waveform {
  std::vector<float> samples;  // channel-major, size = channels * num_frames
  int channels = 0;
  int sample_rate = 0;

  Waveform() = default;
  Waveform(int channels, int64_t num_frames, int sample_rate);

  int64_t num_frames() const {
    return channels == 0 ? 0 : static_cast<int64_t>(samples.size()) / channels;
  }
  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(num_frames()) / sample_rate : 0.0;
  }
  std::span<float> channel(int c);
  std::span<const float> channel(int c) const;

  bool empty() const { return samples.empty(); }
  void validate() const;  // channels in {1,2}, all samples finite
};

float peak_abs(const Waveform& w);
double rms(std::span<const float> x);
bool is_silent(const Waveform& w, float threshold = 0.0f);

// Scales so the peak hits 10^(ceiling_db/20); silent input is returned as is.
Waveform peak_normalize(const Waveform& w, double ceiling_db);

Waveform mix(const Waveform& a, const Waveform& b);  // sample-wise sum
Waveform scaled(const Waveform& w, float gain);

}  // namespace msr::dsp

#include "msr/dsp/waveform.hpp"

#include <fmt/format.h>

#include <cmath>

#include "msr/common.hpp"

namespace msr::dsp {

Waveform::Waveform(int channels_, int64_t num_frames, int sample_rate_)
    : samples(static_cast<size_t>(channels_) * num_frames, 0.0f),
      channels(channels_),
      sample_rate(sample_rate_) {}

std::span<float> Waveform::channel(int c) {
  const auto n = num_frames();
  return {samples.data() + c * n, static_cast<size_t>(n)};
}

std::span<const float> Waveform::channel(int c) const {
  const auto n = num_frames();
  return {samples.data() + c * n, static_cast<size_t>(n)};
}

void Waveform::validate() const {
  if (channels != 1 && channels != 2)
    throw ShapeError(fmt::format("waveform must be mono or stereo, got {} channels", channels));
  if (sample_rate <= 0)
    throw ConfigError(fmt::format("invalid sample rate {}", sample_rate));
  for (float s : samples)
    if (!std::isfinite(s)) throw NumericError("waveform contains non-finite samples");
}

float peak_abs(const Waveform& w) {
  float peak = 0.0f;
  for (float s : w.samples) peak = std::max(peak, std::fabs(s));
  return peak;
}

double rms(std::span<const float> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

bool is_silent(const Waveform& w, float threshold) {
  return peak_abs(w) <= threshold;
}

Waveform peak_normalize(const Waveform& w, double ceiling_db) {
  const float peak = peak_abs(w);
  if (peak == 0.0f) return w;
  const double target = std::pow(10.0, ceiling_db / 20.0);
  Waveform out = w;
  const float g = static_cast<float>(target / peak);
  for (float& s : out.samples) s *= g;
  return out;
}

Waveform mix(const Waveform& a, const Waveform& b) {
  if (a.channels != b.channels || a.samples.size() != b.samples.size() ||
      a.sample_rate != b.sample_rate)
    throw ShapeError("mix: waveform layouts differ");
  Waveform out = a;
  for (size_t i = 0; i < out.samples.size(); ++i) out.samples[i] += b.samples[i];
  return out;
}

Waveform scaled(const Waveform& w, float gain) {
  Waveform out = w;
  for (float& s : out.samples) s *= gain;
  return out;
}

}  // namespace msr::dsp

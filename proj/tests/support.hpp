#pragma once

// Shared test fixtures and independent oracles. Everything here recomputes
// expected values from first principles (direct DFT, elementwise math,
// finite differences) so the checks stay independent of the library's own
// code paths.

#include <cmath>
#include <complex>
#include <filesystem>
#include <functional>
#include <vector>

#include "msr/dsp/waveform.hpp"
#include "msr/nn/tensor.hpp"
#include "msr/rng.hpp"

namespace msrtest {

// O(n^2) DFT of one real frame; the oracle for every FFT-backed check.
inline std::vector<std::complex<double>> direct_dft(const std::vector<double>& x) {
  const size_t n = x.size();
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (size_t k = 0; k < out.size(); ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (size_t i = 0; i < n; ++i) {
      const double ang = -2.0 * M_PI * static_cast<double>(k) * i / n;
      acc += x[i] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

inline msr::dsp::Waveform seeded_noise(int channels, int64_t frames, int sample_rate,
                                       uint64_t seed, double amplitude = 0.5) {
  msr::dsp::Waveform w(channels, frames, sample_rate);
  msr::CounterRng rng(msr::CounterRng::derive_key(seed, "test-noise"));
  for (auto& s : w.samples)
    s = static_cast<float>(rng.uniform(-amplitude, amplitude));
  return w;
}

inline msr::dsp::Waveform sine_wave(double freq_hz, int channels, int64_t frames,
                                    int sample_rate, double amplitude = 0.5) {
  msr::dsp::Waveform w(channels, frames, sample_rate);
  for (int c = 0; c < channels; ++c) {
    auto ch = w.channel(c);
    for (int64_t i = 0; i < frames; ++i)
      ch[i] = static_cast<float>(amplitude *
                                 std::sin(2.0 * M_PI * freq_hz * i / sample_rate));
  }
  return w;
}

// Reference SI-SNR, straight from the projection formula in double.
inline double ref_si_snr_db(const std::vector<float>& est, const std::vector<float>& ref) {
  double dot = 0.0, rr = 0.0;
  for (size_t i = 0; i < ref.size(); ++i) {
    dot += static_cast<double>(est[i]) * ref[i];
    rr += static_cast<double>(ref[i]) * ref[i];
  }
  const double a = dot / rr;
  double ss = 0.0, ee = 0.0;
  for (size_t i = 0; i < ref.size(); ++i) {
    const double s = a * ref[i];
    ss += s * s;
    ee += (est[i] - s) * (est[i] - s);
  }
  const double db = 10.0 * std::log10((ss + 1e-30) / (ee + 1e-30));
  return std::clamp(db, -100.0, 100.0);
}

inline double si_snr_between(const msr::dsp::Waveform& est, const msr::dsp::Waveform& ref) {
  return ref_si_snr_db(est.samples, ref.samples);
}

// Central finite difference d f / d x[i] with the realized step (x is float,
// so the nominal h gets rounded; using the actual difference keeps the
// comparison honest).
inline double central_diff(msr::nn::Tensor& x, int64_t i,
                           const std::function<double()>& f, double h = 1e-3) {
  const float orig = x[i];
  x[i] = static_cast<float>(orig + h);
  const double hp = static_cast<double>(x[i]) - orig;
  const double fp = f();
  x[i] = static_cast<float>(orig - h);
  const double hm = static_cast<double>(orig) - x[i];
  const double fm = f();
  x[i] = orig;
  return (fp - fm) / (hp + hm);
}

// Relative agreement check used by the gradient tests: |a-b| within rel of
// scale, with an absolute floor for near-zero pairs.
inline bool close_rel(double a, double b, double rel, double abs_floor = 1e-6) {
  const double scale = std::max(std::fabs(a), std::fabs(b));
  return std::fabs(a - b) <= std::max(rel * scale, abs_floor);
}

}  // namespace msrtest

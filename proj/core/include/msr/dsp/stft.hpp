#pragma once

#include <complex>
#include <string>
#include <vector>

#include "msr/dsp/waveform.hpp"

namespace msr::dsp {

enum class WindowKind { Hann, Rect };

WindowKind window_from_string(const std::string& s);
std::string to_string(WindowKind k);

// Analysis/synthesis configuration.
//
// Conventions (documented here once, relied on everywhere):
//  * forward DFT is unnormalized; bins 0..n_fft/2 are kept
//  * center=true reflect-pads by n_fft/2 on both sides, so
//    frames = floor(num_samples / hop) + 1
//  * center=false requires num_samples >= n_fft and gives
//    frames = floor((num_samples - n_fft) / hop) + 1
//  * the inverse windows each frame again and divides by the overlap-added
//    squared window (weighted overlap-add), which reconstructs exactly
//    wherever the squared-window overlap is nonzero
struct StftConfig {
  int n_fft = 2048;
  int hop = 512;
  WindowKind window = WindowKind::Hann;
  bool center = true;

  void validate() const;
  int bins() const { return n_fft / 2 + 1; }
  int64_t frames_for(int64_t num_samples) const;
  bool operator==(const StftConfig&) const = default;
};

// Separator front-end default (a declared choice).
inline StftConfig separator_stft() { return StftConfig{2048, 512, WindowKind::Hann, true}; }

struct ComplexSpectrogram {
  // channel-major, then frame-major: data[(c * frames + t) * bins + k]
  std::vector<std::complex<float>> data;
  int channels = 0;
  int64_t frames = 0;
  int bins = 0;
  StftConfig config;
  int sample_rate = 0;
  int64_t num_samples = 0;  // original waveform length, for exact inversion

  std::complex<float>& at(int c, int64_t t, int k) {
    return data[(static_cast<size_t>(c) * frames + t) * bins + k];
  }
  std::complex<float> at(int c, int64_t t, int k) const {
    return data[(static_cast<size_t>(c) * frames + t) * bins + k];
  }
};

// Periodic window of length n (the choice that overlap-adds cleanly).
std::vector<double> make_window(WindowKind kind, int n);

ComplexSpectrogram stft(const Waveform& wave, const StftConfig& cfg);
Waveform istft(const ComplexSpectrogram& spec);
Waveform istft(const ComplexSpectrogram& spec, int64_t num_samples);

// Double-precision real FFT helpers (FFTW-backed); also used by the
// gradient tape for transform adjoints and by test oracles.
void rfft(const double* in, std::complex<double>* out, int n);
void irfft(const std::complex<double>* in, double* out, int n);

// One STFT analysis pass of a single channel, without padding logic:
// frame i covers padded[i*hop .. i*hop+n_fft). Exposed for the tape.
std::vector<double> reflect_pad(std::span<const float> x, int pad);

}  // namespace msr::dsp

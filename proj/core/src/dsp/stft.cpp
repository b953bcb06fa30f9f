#include "msr/dsp/stft.hpp"

#include <fftw3.h>
#include <fmt/format.h>

#include <cmath>
#include <map>
#include <mutex>

#include "msr/common.hpp"

namespace msr::dsp {

namespace {

// FFTW's planner is not thread-safe; plans are cached per size and executed
// with the new-array interface on caller buffers (FFTW_UNALIGNED keeps the
// plans valid for any alignment).
struct PlanPair {
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;
};

std::mutex g_plan_mutex;
std::map<int, PlanPair>& plan_cache() {
  static std::map<int, PlanPair> cache;
  return cache;
}

PlanPair get_plans(int n) {
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  auto& cache = plan_cache();
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> re(n);
  std::vector<std::complex<double>> cx(n / 2 + 1);
  PlanPair p;
  p.fwd = fftw_plan_dft_r2c_1d(n, re.data(),
                               reinterpret_cast<fftw_complex*>(cx.data()),
                               FFTW_ESTIMATE | FFTW_UNALIGNED);
  p.inv = fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(cx.data()),
                               re.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
  cache[n] = p;
  return p;
}

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

void rfft(const double* in, std::complex<double>* out, int n) {
  PlanPair p = get_plans(n);
  // r2c does not modify its input for 1-D transforms
  fftw_execute_dft_r2c(p.fwd, const_cast<double*>(in),
                       reinterpret_cast<fftw_complex*>(out));
}

void irfft(const std::complex<double>* in, double* out, int n) {
  // c2r destroys its input, so transform a copy; output carries the usual
  // FFTW scaling of n, normalized away here. DC/Nyquist imaginary parts are
  // dropped so the transform ignores them regardless of backend behavior.
  std::vector<std::complex<double>> tmp(in, in + n / 2 + 1);
  tmp.front() = std::complex<double>(tmp.front().real(), 0.0);
  tmp.back() = std::complex<double>(tmp.back().real(), 0.0);
  PlanPair p = get_plans(n);
  fftw_execute_dft_c2r(p.inv, reinterpret_cast<fftw_complex*>(tmp.data()), out);
  const double inv_n = 1.0 / n;
  for (int i = 0; i < n; ++i) out[i] *= inv_n;
}

WindowKind window_from_string(const std::string& s) {
  if (s == "hann") return WindowKind::Hann;
  if (s == "rect") return WindowKind::Rect;
  throw ConfigError(fmt::format("unknown window kind '{}' (expected hann|rect)", s));
}

std::string to_string(WindowKind k) {
  return k == WindowKind::Hann ? "hann" : "rect";
}

std::vector<double> make_window(WindowKind kind, int n) {
  std::vector<double> w(n, 1.0);
  if (kind == WindowKind::Hann) {
    for (int i = 0; i < n; ++i)
      w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
  }
  return w;
}

void StftConfig::validate() const {
  if (!is_pow2(n_fft))
    throw ConfigError(fmt::format("n_fft must be a power of two, got {}", n_fft));
  if (hop <= 0 || hop > n_fft)
    throw ConfigError(fmt::format("hop must satisfy 0 < hop <= n_fft, got hop={} n_fft={}", hop, n_fft));
  // Invertibility: the overlap-added squared window must never vanish.
  const auto w = make_window(window, n_fft);
  std::vector<double> cover(hop, 0.0);
  for (int i = 0; i < n_fft; ++i) cover[i % hop] += w[i] * w[i];
  double lo = cover[0];
  for (double v : cover) lo = std::min(lo, v);
  if (lo < 1e-9)
    throw ConfigError(fmt::format(
        "window '{}' does not satisfy the overlap-add condition at hop {} (coverage gap)",
        to_string(window), hop));
}

int64_t StftConfig::frames_for(int64_t num_samples) const {
  if (center) return num_samples / hop + 1;
  if (num_samples < n_fft)
    throw ShapeError(fmt::format(
        "center=false needs at least n_fft={} samples, got {}", n_fft, num_samples));
  return (num_samples - n_fft) / hop + 1;
}

std::vector<double> reflect_pad(std::span<const float> x, int pad) {
  const int64_t n = static_cast<int64_t>(x.size());
  if (n < 2 || pad >= n)
    throw ShapeError(fmt::format(
        "reflect padding of {} needs more than {} samples, got {}", pad, pad, n));
  std::vector<double> out(n + 2 * pad);
  for (int64_t i = 0; i < n; ++i) out[pad + i] = x[i];
  for (int64_t i = 1; i <= pad; ++i) {
    out[pad - i] = x[i];              // mirror without repeating the edge
    out[pad + n - 1 + i] = x[n - 1 - i];
  }
  return out;
}

ComplexSpectrogram stft(const Waveform& wave, const StftConfig& cfg) {
  cfg.validate();
  if (wave.empty()) throw ShapeError("stft: empty waveform");
  wave.validate();

  const int64_t n = wave.num_frames();
  const int64_t frames = cfg.frames_for(n);
  const int bins = cfg.bins();
  const auto w = make_window(cfg.window, cfg.n_fft);

  ComplexSpectrogram spec;
  spec.channels = wave.channels;
  spec.frames = frames;
  spec.bins = bins;
  spec.config = cfg;
  spec.sample_rate = wave.sample_rate;
  spec.num_samples = n;
  spec.data.resize(static_cast<size_t>(wave.channels) * frames * bins);

  std::vector<double> frame(cfg.n_fft);
  std::vector<std::complex<double>> out(bins);
  for (int c = 0; c < wave.channels; ++c) {
    const std::vector<double> padded =
        cfg.center ? reflect_pad(wave.channel(c), cfg.n_fft / 2)
                   : std::vector<double>(wave.channel(c).begin(), wave.channel(c).end());
    for (int64_t t = 0; t < frames; ++t) {
      const double* src = padded.data() + t * cfg.hop;
      for (int i = 0; i < cfg.n_fft; ++i) frame[i] = src[i] * w[i];
      rfft(frame.data(), out.data(), cfg.n_fft);
      std::complex<float>* dst = &spec.at(c, t, 0);
      for (int k = 0; k < bins; ++k)
        dst[k] = std::complex<float>(static_cast<float>(out[k].real()),
                                     static_cast<float>(out[k].imag()));
    }
  }
  return spec;
}

Waveform istft(const ComplexSpectrogram& spec) {
  return istft(spec, spec.num_samples);
}

Waveform istft(const ComplexSpectrogram& spec, int64_t num_samples) {
  const StftConfig& cfg = spec.config;
  cfg.validate();
  if (spec.bins != cfg.bins())
    throw ShapeError(fmt::format("istft: spectrogram has {} bins but config expects {}",
                                 spec.bins, cfg.bins()));
  if (num_samples <= 0)
    throw ShapeError("istft: unknown output length");

  const int64_t offset0 = cfg.center ? cfg.n_fft / 2 : 0;
  const int64_t padded_len =
      std::max((spec.frames - 1) * cfg.hop + cfg.n_fft, offset0 + num_samples);
  const auto w = make_window(cfg.window, cfg.n_fft);

  Waveform out(spec.channels, num_samples, spec.sample_rate);
  std::vector<std::complex<double>> in(spec.bins);
  std::vector<double> frame(cfg.n_fft);
  std::vector<double> acc(padded_len);
  std::vector<double> norm(padded_len);
  for (int c = 0; c < spec.channels; ++c) {
    std::fill(acc.begin(), acc.end(), 0.0);
    std::fill(norm.begin(), norm.end(), 0.0);
    for (int64_t t = 0; t < spec.frames; ++t) {
      const std::complex<float>* src =
          spec.data.data() + (static_cast<size_t>(c) * spec.frames + t) * spec.bins;
      for (int k = 0; k < spec.bins; ++k)
        in[k] = std::complex<double>(src[k].real(), src[k].imag());
      irfft(in.data(), frame.data(), cfg.n_fft);
      double* a = acc.data() + t * cfg.hop;
      double* nrm = norm.data() + t * cfg.hop;
      for (int i = 0; i < cfg.n_fft; ++i) {
        a[i] += frame[i] * w[i];
        nrm[i] += w[i] * w[i];
      }
    }
    auto dst = out.channel(c);
    for (int64_t i = 0; i < num_samples; ++i) {
      const double d = norm[offset0 + i];
      dst[i] = static_cast<float>(d > 1e-11 ? acc[offset0 + i] / d : 0.0);
    }
  }
  return out;
}

}  // namespace msr::dsp

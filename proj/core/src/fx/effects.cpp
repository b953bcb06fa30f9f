#include "msr/fx/effects.hpp"

#include <fmt/format.h>

#include <cmath>
#include <complex>
#include <deque>

#include "msr/common.hpp"
#include "msr/dsp/stft.hpp"
#include "msr/rng.hpp"

namespace msr::fx {

namespace {

double db_to_lin(double db) { return std::pow(10.0, db / 20.0); }

// one-pole coefficient for a time constant in ms
double smoothing_coef(double time_ms, int sample_rate) {
  if (time_ms <= 0.0) return 1.0;
  return 1.0 - std::exp(-1000.0 / (time_ms * sample_rate));
}

struct Biquad {
  double b0, b1, b2, a1, a2;  // normalized (a0 == 1)
};

// Audio-EQ-cookbook peaking and shelving filters.
Biquad design_eq(const EqParams& p, int sample_rate) {
  const double w0 = 2.0 * M_PI * p.center_hz / sample_rate;
  const double cw = std::cos(w0), sw = std::sin(w0);
  const double a = std::pow(10.0, p.gain_db / 40.0);
  const double alpha = sw / (2.0 * p.q);
  double b0, b1, b2, a0, a1, a2;
  switch (p.type) {
    case EqParams::Type::Peaking:
      b0 = 1 + alpha * a;
      b1 = -2 * cw;
      b2 = 1 - alpha * a;
      a0 = 1 + alpha / a;
      a1 = -2 * cw;
      a2 = 1 - alpha / a;
      break;
    case EqParams::Type::LowShelf: {
      const double s = 2.0 * std::sqrt(a) * alpha;
      b0 = a * ((a + 1) - (a - 1) * cw + s);
      b1 = 2 * a * ((a - 1) - (a + 1) * cw);
      b2 = a * ((a + 1) - (a - 1) * cw - s);
      a0 = (a + 1) + (a - 1) * cw + s;
      a1 = -2 * ((a - 1) + (a + 1) * cw);
      a2 = (a + 1) + (a - 1) * cw - s;
      break;
    }
    case EqParams::Type::HighShelf:
    default: {
      const double s = 2.0 * std::sqrt(a) * alpha;
      b0 = a * ((a + 1) + (a - 1) * cw + s);
      b1 = -2 * a * ((a - 1) + (a + 1) * cw);
      b2 = a * ((a + 1) + (a - 1) * cw - s);
      a0 = (a + 1) - (a - 1) * cw + s;
      a1 = 2 * ((a - 1) - (a + 1) * cw);
      a2 = (a + 1) - (a - 1) * cw - s;
      break;
    }
  }
  Biquad bq{b0 / a0, b1 / a0, b2 / a0, a1 / a0, a2 / a0};
  // stability: poles inside the unit circle
  if (!(std::fabs(bq.a2) < 1.0 && std::fabs(bq.a1) < 1.0 + bq.a2))
    throw ConfigError(fmt::format(
        "eq: unstable coefficients (center {} Hz, q {}, gain {} dB)",
        p.center_hz, p.q, p.gain_db));
  return bq;
}

}  // namespace

std::string to_string(EffectKind kind) {
  switch (kind) {
    case EffectKind::Eq: return "eq";
    case EffectKind::Compressor: return "compressor";
    case EffectKind::Reverb: return "reverb";
    case EffectKind::Saturator: return "saturator";
    case EffectKind::StereoWidener: return "stereo_widener";
    case EffectKind::Limiter: return "limiter";
    case EffectKind::CodecSim: return "codec_sim";
  }
  return "?";
}

dsp::Waveform eq_apply(const dsp::Waveform& wave, const EqParams& p) {
  if (p.center_hz <= 0.0 || p.center_hz >= wave.sample_rate / 2.0)
    throw ConfigError(fmt::format("eq: center {} Hz outside (0, Nyquist)", p.center_hz));
  if (p.q <= 0.0) throw ConfigError("eq: q must be positive");
  const Biquad bq = design_eq(p, wave.sample_rate);

  dsp::Waveform out = wave;
  for (int c = 0; c < wave.channels; ++c) {
    auto x = wave.channel(c);
    auto y = out.channel(c);
    double z1 = 0.0, z2 = 0.0;  // transposed direct form II
    for (size_t i = 0; i < x.size(); ++i) {
      const double in = x[i];
      const double o = bq.b0 * in + z1;
      z1 = bq.b1 * in - bq.a1 * o + z2;
      z2 = bq.b2 * in - bq.a2 * o;
      y[i] = static_cast<float>(o);
    }
  }
  return out;
}

dsp::Waveform compressor_apply(const dsp::Waveform& wave, const CompressorParams& p) {
  if (p.ratio < 1.0) throw ConfigError("compressor: ratio must be >= 1");
  if (p.attack_ms <= 0.0 || p.release_ms <= 0.0)
    throw ConfigError("compressor: time constants must be positive");
  const double att = smoothing_coef(p.attack_ms, wave.sample_rate);
  const double rel = smoothing_coef(p.release_ms, wave.sample_rate);
  const double makeup = db_to_lin(p.makeup_db);

  const int64_t n = wave.num_frames();
  dsp::Waveform out = wave;
  double env = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    // stereo-linked peak detector
    double level = 0.0;
    for (int c = 0; c < wave.channels; ++c)
      level = std::max(level, std::fabs(static_cast<double>(wave.channel(c)[i])));
    env += (level - env) * (level > env ? att : rel);

    double gain_db = 0.0;
    const double env_db = 20.0 * std::log10(env + 1e-12);
    if (env_db > p.threshold_db)
      gain_db = p.threshold_db + (env_db - p.threshold_db) / p.ratio - env_db;
    const double g = db_to_lin(gain_db) * makeup;
    for (int c = 0; c < wave.channels; ++c)
      out.channel(c)[i] = static_cast<float>(wave.channel(c)[i] * g);
  }
  return out;
}

dsp::Waveform make_reverb_ir(const ReverbParams& p, int sample_rate, int channels) {
  const int64_t len = std::max<int64_t>(8, static_cast<int64_t>(std::llround(p.decay_s * sample_rate)));
  dsp::Waveform ir(channels, len, sample_rate);
  // amplitude envelope falling 60 dB across decay_s
  const double k = std::log(1000.0) / static_cast<double>(len);
  for (int c = 0; c < channels; ++c) {
    CounterRng rng(CounterRng::derive_key(p.seed, "reverb-ir", std::to_string(c)));
    auto ch = ir.channel(c);
    double energy = 0.0;
    for (int64_t i = 0; i < len; ++i) {
      const double v = rng.gaussian() * std::exp(-k * static_cast<double>(i));
      ch[i] = static_cast<float>(v);
      energy += v * v;
    }
    const float norm = static_cast<float>(1.0 / std::sqrt(energy + 1e-30));
    for (auto& v : ch) v *= norm;
  }
  return ir;
}

dsp::Waveform reverb_apply(const dsp::Waveform& wave, const ReverbParams& p) {
  if (p.decay_s <= 0.0) throw ConfigError("reverb: decay must be positive");
  if (p.wet < 0.0 || p.wet > 1.0) throw ConfigError("reverb: wet must be in [0, 1]");
  if (p.wet == 0.0) return wave;

  const dsp::Waveform ir = make_reverb_ir(p, wave.sample_rate, wave.channels);
  const int64_t n = wave.num_frames();
  const int64_t m = ir.num_frames();
  int64_t fft_n = 1;
  while (fft_n < n + m - 1) fft_n <<= 1;

  dsp::Waveform out = wave;
  std::vector<double> buf(fft_n);
  std::vector<std::complex<double>> xs(fft_n / 2 + 1), hs(fft_n / 2 + 1);
  for (int c = 0; c < wave.channels; ++c) {
    std::fill(buf.begin(), buf.end(), 0.0);
    auto x = wave.channel(c);
    for (int64_t i = 0; i < n; ++i) buf[i] = x[i];
    dsp::rfft(buf.data(), xs.data(), static_cast<int>(fft_n));
    std::fill(buf.begin(), buf.end(), 0.0);
    auto h = ir.channel(c);
    for (int64_t i = 0; i < m; ++i) buf[i] = h[i];
    dsp::rfft(buf.data(), hs.data(), static_cast<int>(fft_n));
    for (size_t i = 0; i < xs.size(); ++i) xs[i] *= hs[i];
    dsp::irfft(xs.data(), buf.data(), static_cast<int>(fft_n));
    auto y = out.channel(c);
    for (int64_t i = 0; i < n; ++i)
      y[i] = static_cast<float>((1.0 - p.wet) * x[i] + p.wet * buf[i]);
  }
  return out;
}

dsp::Waveform saturate_apply(const dsp::Waveform& wave, const SaturatorParams& p) {
  if (p.drive < 0.0) throw ConfigError("saturator: drive must be >= 0");
  // y = tanh(g x)/tanh(g) with g = drive; the g->0 limit is the identity
  if (p.drive < 1e-4) return wave;
  dsp::Waveform out = wave;
  const double g = p.drive;
  const double norm = 1.0 / std::tanh(g);
  for (auto& s : out.samples)
    s = static_cast<float>(std::tanh(g * s) * norm);
  return out;
}

dsp::Waveform stereo_widen_apply(const dsp::Waveform& wave, const WidenerParams& p) {
  if (wave.channels != 2)
    throw ConfigError("stereo_widener: input must be stereo");
  if (p.width < 0.0) throw ConfigError("stereo_widener: width must be >= 0");
  dsp::Waveform out = wave;
  auto l = out.channel(0);
  auto r = out.channel(1);
  for (size_t i = 0; i < l.size(); ++i) {
    const double mid = 0.5 * (static_cast<double>(l[i]) + r[i]);
    const double side = 0.5 * (static_cast<double>(l[i]) - r[i]) * p.width;
    l[i] = static_cast<float>(mid + side);
    r[i] = static_cast<float>(mid - side);
  }
  return out;
}

dsp::Waveform limiter_apply(const dsp::Waveform& wave, const LimiterParams& p) {
  if (p.ceiling_db > 0.0) throw ConfigError("limiter: ceiling must be <= 0 dBFS");
  const double ceiling = db_to_lin(p.ceiling_db);
  const int64_t n = wave.num_frames();
  const int64_t look = std::max<int64_t>(
      0, static_cast<int64_t>(std::llround(p.lookahead_ms * wave.sample_rate / 1000.0)));
  const double rel = smoothing_coef(p.release_ms, wave.sample_rate);

  // per-sample gain that would put the louder channel exactly at the ceiling
  std::vector<double> desired(n, 1.0);
  for (int64_t i = 0; i < n; ++i) {
    double level = 0.0;
    for (int c = 0; c < wave.channels; ++c)
      level = std::max(level, std::fabs(static_cast<double>(wave.channel(c)[i])));
    if (level > ceiling) desired[i] = ceiling / level;
  }

  // sliding minimum over the lookahead window [i, i+look]
  std::vector<double> floor_gain(n, 1.0);
  std::deque<int64_t> dq;
  for (int64_t i = n - 1; i >= 0; --i) {
    while (!dq.empty() && dq.front() > i + look) dq.pop_front();
    while (!dq.empty() && desired[dq.back()] >= desired[i]) dq.pop_back();
    dq.push_back(i);
    floor_gain[i] = desired[dq.front()];
  }

  // exponential release toward unity, clamped under the lookahead floor so
  // the ceiling is a hard bound
  dsp::Waveform out = wave;
  double g = floor_gain.empty() ? 1.0 : floor_gain[0];
  for (int64_t i = 0; i < n; ++i) {
    g += (1.0 - g) * rel;
    g = std::min(g, floor_gain[i]);
    for (int c = 0; c < wave.channels; ++c)
      out.channel(c)[i] = static_cast<float>(wave.channel(c)[i] * g);
  }
  return out;
}

dsp::Waveform codec_sim_apply(const dsp::Waveform& wave, const CodecSimParams& p) {
  if (p.cutoff_hz >= wave.sample_rate / 2.0)
    throw ConfigError("codec_sim: cutoff must be below Nyquist");
  if (p.bits < 2 || p.bits > 16)
    throw ConfigError("codec_sim: bits must be in [2, 16]");
  if (dsp::is_silent(wave)) return wave;

  dsp::StftConfig cfg{p.frame_size, p.frame_size / 2, dsp::WindowKind::Hann, true};
  auto spec = dsp::stft(wave, cfg);
  const double bin_hz = static_cast<double>(wave.sample_rate) / cfg.n_fft;
  const double levels = static_cast<double>((1 << p.bits) - 1);
  for (int c = 0; c < spec.channels; ++c) {
    for (int64_t t = 0; t < spec.frames; ++t) {
      double peak = 0.0;
      for (int k = 0; k < spec.bins; ++k)
        peak = std::max(peak, std::abs(std::complex<double>(spec.at(c, t, k))));
      const double step = peak / levels;
      for (int k = 0; k < spec.bins; ++k) {
        auto& v = spec.at(c, t, k);
        if (k * bin_hz > p.cutoff_hz) {
          v = 0.0f;  // brickwall low-pass
          continue;
        }
        const double mag = std::abs(std::complex<double>(v));
        if (mag < 1e-12 || step <= 0.0) continue;
        const double q = std::round(mag / step) * step;
        v *= static_cast<float>(q / mag);
      }
    }
  }
  return dsp::istft(spec);
}

dsp::Waveform apply_effect(const dsp::Waveform& wave, const EffectOp& op) {
  switch (op.kind) {
    case EffectKind::Eq: return eq_apply(wave, std::get<EqParams>(op.params));
    case EffectKind::Compressor:
      return compressor_apply(wave, std::get<CompressorParams>(op.params));
    case EffectKind::Reverb: return reverb_apply(wave, std::get<ReverbParams>(op.params));
    case EffectKind::Saturator:
      return saturate_apply(wave, std::get<SaturatorParams>(op.params));
    case EffectKind::StereoWidener:
      return stereo_widen_apply(wave, std::get<WidenerParams>(op.params));
    case EffectKind::Limiter:
      return limiter_apply(wave, std::get<LimiterParams>(op.params));
    case EffectKind::CodecSim:
      return codec_sim_apply(wave, std::get<CodecSimParams>(op.params));
  }
  throw ConfigError("unknown effect kind");
}

}  // namespace msr::fx

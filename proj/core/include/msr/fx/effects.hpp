#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include "msr/dsp/waveform.hpp"

namespace msr::fx {

// Parameter records for the degradation/mastering operators. Frequencies in
// Hz, gains in dB, times in ms unless noted.

struct EqParams {
  enum class Type { Peaking, LowShelf, HighShelf };
  Type type = Type::Peaking;
  double center_hz = 1000.0;
  double gain_db = 0.0;
  double q = 0.707;
};

struct CompressorParams {
  double threshold_db = -18.0;
  double ratio = 2.0;  // >= 1
  double attack_ms = 5.0;
  double release_ms = 100.0;
  double makeup_db = 0.0;
};

struct ReverbParams {
  double decay_s = 0.5;  // time for the tail to fall 60 dB
  double wet = 0.3;      // 0..1 wet/dry mix
  uint64_t seed = 0;     // impulse-response noise seed
};

struct SaturatorParams {
  double drive = 0.0;  // >= 0; 0 is the identity limit
};

struct WidenerParams {
  double width = 1.0;  // side-channel scale, >= 0
};

struct LimiterParams {
  double ceiling_db = -1.0;  // <= 0 dBFS, hard output bound
  double lookahead_ms = 5.0;
  double release_ms = 50.0;
};

struct CodecSimParams {
  double cutoff_hz = 16000.0;
  int bits = 8;  // magnitude quantization depth, 2..16
  int frame_size = 1024;
};

enum class EffectKind {
  Eq,
  Compressor,
  Reverb,
  Saturator,
  StereoWidener,
  Limiter,
  CodecSim,
};

std::string to_string(EffectKind kind);

struct EffectOp {
  EffectKind kind;
  std::variant<EqParams, CompressorParams, ReverbParams, SaturatorParams,
               WidenerParams, LimiterParams, CodecSimParams>
      params;
};

dsp::Waveform eq_apply(const dsp::Waveform& wave, const EqParams& p);
dsp::Waveform compressor_apply(const dsp::Waveform& wave, const CompressorParams& p);
dsp::Waveform reverb_apply(const dsp::Waveform& wave, const ReverbParams& p);
dsp::Waveform saturate_apply(const dsp::Waveform& wave, const SaturatorParams& p);
dsp::Waveform stereo_widen_apply(const dsp::Waveform& wave, const WidenerParams& p);
dsp::Waveform limiter_apply(const dsp::Waveform& wave, const LimiterParams& p);
dsp::Waveform codec_sim_apply(const dsp::Waveform& wave, const CodecSimParams& p);

dsp::Waveform apply_effect(const dsp::Waveform& wave, const EffectOp& op);

// The seeded impulse response reverb_apply convolves with: exponentially
// decaying noise, decorrelated per channel, unit energy per channel.
dsp::Waveform make_reverb_ir(const ReverbParams& p, int sample_rate, int channels);

}  // namespace msr::fx

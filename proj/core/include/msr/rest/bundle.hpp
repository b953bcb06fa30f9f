#pragma once

#include <filesystem>

#include "msr/dsp/stft.hpp"
#include "msr/nn/checkpoint.hpp"
#include "msr/nn/layers.hpp"

namespace msr::rest {

// Plain convolution weights (forward only; restoration training beyond the
// separator pipeline is out of scope here).
struct Conv2d {
  nn::Tensor weight;  // [out_ch x in_ch x kh x kw]
  nn::Tensor bias;    // [out_ch]
  int stride = 1;     // both axes
};

struct Conv1d {
  nn::Tensor weight;  // [out_ch x in_ch x k]
  nn::Tensor bias;    // [out_ch]
  int stride = 1;
};

struct RestorationHParams {
  int sample_rate = 44100;
  int n_fft = 1024;
  int hop = 256;
  int spec_channels = 8;   // SpectralUNet width
  int wave_channels = 8;   // waveform-rate feature channels
  int wave_kernel = 15;
  int mask_hidden = 64;    // SpectralMaskNet per-frame MLP

  dsp::StftConfig stft() const { return {n_fft, hop, dsp::WindowKind::Hann, true}; }
  void validate() const;
};

// Four-stage restoration network: a 2-D UNet over log magnitudes, a learned
// upsampler to waveform-rate features, a 1-D UNet refining the waveform
// around a residual connection, and a real-valued spectral mask for residual
// spectral correction. Length-preserving end to end.
struct RestorationBundle {
  RestorationHParams hparams;

  // SpectralUNet: 3 levels with skip connections
  Conv2d su_in;     // 1 -> c
  Conv2d su_down1;  // c -> 2c, stride 2
  Conv2d su_down2;  // 2c -> 4c, stride 2
  Conv2d su_up1;    // 4c -> 2c (after x2 nearest upsample)
  Conv2d su_up2;    // 2c -> c
  Conv2d su_out;    // c -> c

  // Upsampler: per-frame linear map, (c * bins) -> (hop * wave_channels)
  nn::LinearLayer upsampler;

  // WaveUNet over [wave_channels + 1, n] (input waveform concatenated)
  Conv1d wu_in;    // c_w+1 -> c_w
  Conv1d wu_down;  // c_w -> 2c_w, stride 4
  Conv1d wu_mid;   // 2c_w -> 2c_w
  Conv1d wu_up;    // 2c_w -> c_w (after x4 nearest upsample)
  Conv1d wu_out;   // c_w -> 1

  // SpectralMaskNet: per-frame MLP on log magnitudes, mask = exp(raw)
  nn::LinearLayer mask_hidden_layer;  // bins -> mask_hidden
  nn::LinearLayer mask_out_layer;     // mask_hidden -> bins

  nn::Checkpoint to_checkpoint() const;
  static RestorationBundle from_checkpoint(const nn::Checkpoint& ckpt);
  void save(const std::filesystem::path& path) const;
  static RestorationBundle load(const std::filesystem::path& path);
  uint64_t parameter_checksum() const;
};

// All-zero weights: the bundle reduces to STFT-roundtrip passthrough
// (SI-SNR >= 60 dB against the input).
RestorationBundle make_identity_bundle(const RestorationHParams& hp = {});
RestorationBundle make_random_bundle(const RestorationHParams& hp, uint64_t seed);

// Forward pass; deterministic and length-preserving.
dsp::Waveform restore(const dsp::Waveform& wave, const RestorationBundle& bundle);

}  // namespace msr::rest

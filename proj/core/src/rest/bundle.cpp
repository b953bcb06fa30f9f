#include "msr/rest/bundle.hpp"

#include <fmt/format.h>

#include <cmath>

#include "msr/common.hpp"
#include "msr/nn/layers.hpp"
#include "msr/rng.hpp"

namespace msr::rest {

namespace {

using nn::Tensor;

int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

// zero-padded "same" convolution; output spatial dims are ceil(dim/stride)
Tensor conv2d_forward(const Tensor& x, const Conv2d& c) {
  const int64_t in_ch = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int64_t out_ch = c.weight.dim(0), kh = c.weight.dim(2), kw = c.weight.dim(3);
  if (c.weight.dim(1) != in_ch)
    throw ShapeError(fmt::format("conv2d: {} input channels but weight expects {}",
                                 in_ch, c.weight.dim(1)));
  const int64_t oh = ceil_div(h, c.stride), ow = ceil_div(w, c.stride);
  const int64_t ph = kh / 2, pw = kw / 2;
  Tensor y({out_ch, oh, ow});
  for (int64_t oc = 0; oc < out_ch; ++oc) {
    for (int64_t i = 0; i < oh; ++i) {
      for (int64_t j = 0; j < ow; ++j) {
        double acc = c.bias[oc];
        for (int64_t ic = 0; ic < in_ch; ++ic) {
          for (int64_t a = 0; a < kh; ++a) {
            const int64_t src_i = i * c.stride + a - ph;
            if (src_i < 0 || src_i >= h) continue;
            for (int64_t b = 0; b < kw; ++b) {
              const int64_t src_j = j * c.stride + b - pw;
              if (src_j < 0 || src_j >= w) continue;
              acc += static_cast<double>(
                         c.weight[((oc * in_ch + ic) * kh + a) * kw + b]) *
                     x[(ic * h + src_i) * w + src_j];
            }
          }
        }
        y[(oc * oh + i) * ow + j] = static_cast<float>(acc);
      }
    }
  }
  return y;
}

Tensor conv1d_forward(const Tensor& x, const Conv1d& c) {
  const int64_t in_ch = x.dim(0), n = x.dim(1);
  const int64_t out_ch = c.weight.dim(0), k = c.weight.dim(2);
  if (c.weight.dim(1) != in_ch)
    throw ShapeError("conv1d: channel mismatch");
  const int64_t on = ceil_div(n, c.stride);
  const int64_t pad = k / 2;
  Tensor y({out_ch, on});
  for (int64_t oc = 0; oc < out_ch; ++oc) {
    for (int64_t i = 0; i < on; ++i) {
      double acc = c.bias[oc];
      for (int64_t ic = 0; ic < in_ch; ++ic) {
        const float* row = x.data() + ic * n;
        const float* wrow = c.weight.data() + (oc * in_ch + ic) * k;
        for (int64_t a = 0; a < k; ++a) {
          const int64_t src = i * c.stride + a - pad;
          if (src < 0 || src >= n) continue;
          acc += static_cast<double>(wrow[a]) * row[src];
        }
      }
      y[oc * on + i] = static_cast<float>(acc);
    }
  }
  return y;
}

Tensor upsample2d_to(const Tensor& x, int64_t th, int64_t tw) {
  const int64_t ch = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor y({ch, th, tw});
  for (int64_t c = 0; c < ch; ++c)
    for (int64_t i = 0; i < th; ++i)
      for (int64_t j = 0; j < tw; ++j)
        y[(c * th + i) * tw + j] =
            x[(c * h + std::min(i / 2, h - 1)) * w + std::min(j / 2, w - 1)];
  return y;
}

Tensor upsample1d_to(const Tensor& x, int64_t tn, int64_t factor) {
  const int64_t ch = x.dim(0), n = x.dim(1);
  Tensor y({ch, tn});
  for (int64_t c = 0; c < ch; ++c)
    for (int64_t i = 0; i < tn; ++i)
      y[c * tn + i] = x[c * n + std::min(i / factor, n - 1)];
  return y;
}

Tensor add_inplace(Tensor a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("residual add: shapes differ");
  for (int64_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

Conv2d zero_conv2d(int64_t out_ch, int64_t in_ch, int64_t k, int stride) {
  return {Tensor({out_ch, in_ch, k, k}), Tensor({out_ch}), stride};
}

Conv1d zero_conv1d(int64_t out_ch, int64_t in_ch, int64_t k, int stride) {
  return {Tensor({out_ch, in_ch, k}), Tensor({out_ch}), stride};
}

void randomize(Tensor& t, CounterRng rng, double scale) {
  for (int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<float>(rng.gaussian() * scale);
}

}  // namespace

void RestorationHParams::validate() const {
  if (sample_rate <= 0 || spec_channels < 1 || wave_channels < 1 ||
      wave_kernel < 1 || mask_hidden < 1)
    throw ConfigError("restoration hparams: values out of range");
  stft().validate();
}

RestorationBundle make_identity_bundle(const RestorationHParams& hp) {
  hp.validate();
  const int c = hp.spec_channels;
  const int cw = hp.wave_channels;
  const int bins = hp.n_fft / 2 + 1;
  RestorationBundle b;
  b.hparams = hp;
  b.su_in = zero_conv2d(c, 1, 3, 1);
  b.su_down1 = zero_conv2d(2 * c, c, 3, 2);
  b.su_down2 = zero_conv2d(4 * c, 2 * c, 3, 2);
  b.su_up1 = zero_conv2d(2 * c, 4 * c, 3, 1);
  b.su_up2 = zero_conv2d(c, 2 * c, 3, 1);
  b.su_out = zero_conv2d(c, c, 3, 1);
  b.upsampler.weight = Tensor({static_cast<int64_t>(hp.hop) * cw,
                               static_cast<int64_t>(c) * bins});
  b.upsampler.bias = Tensor({static_cast<int64_t>(hp.hop) * cw});
  b.wu_in = zero_conv1d(cw, cw + 1, hp.wave_kernel, 1);
  b.wu_down = zero_conv1d(2 * cw, cw, hp.wave_kernel, 4);
  b.wu_mid = zero_conv1d(2 * cw, 2 * cw, hp.wave_kernel, 1);
  b.wu_up = zero_conv1d(cw, 2 * cw, hp.wave_kernel, 1);
  b.wu_out = zero_conv1d(1, cw, hp.wave_kernel, 1);
  b.mask_hidden_layer.weight = Tensor({hp.mask_hidden, bins});
  b.mask_hidden_layer.bias = Tensor({hp.mask_hidden});
  b.mask_out_layer.weight = Tensor({bins, hp.mask_hidden});
  b.mask_out_layer.bias = Tensor({bins});
  return b;
}

RestorationBundle make_random_bundle(const RestorationHParams& hp, uint64_t seed) {
  RestorationBundle b = make_identity_bundle(hp);
  // small weights keep the forward path well inside float range
  constexpr double kScale = 0.02;
  auto rng_for = [&](const char* name) {
    return CounterRng(CounterRng::derive_key(seed, "restoration", name));
  };
  randomize(b.su_in.weight, rng_for("su.in"), kScale);
  randomize(b.su_down1.weight, rng_for("su.down1"), kScale);
  randomize(b.su_down2.weight, rng_for("su.down2"), kScale);
  randomize(b.su_up1.weight, rng_for("su.up1"), kScale);
  randomize(b.su_up2.weight, rng_for("su.up2"), kScale);
  randomize(b.su_out.weight, rng_for("su.out"), kScale);
  randomize(b.upsampler.weight, rng_for("upsampler"), kScale);
  randomize(b.wu_in.weight, rng_for("wu.in"), kScale);
  randomize(b.wu_down.weight, rng_for("wu.down"), kScale);
  randomize(b.wu_mid.weight, rng_for("wu.mid"), kScale);
  randomize(b.wu_up.weight, rng_for("wu.up"), kScale);
  randomize(b.wu_out.weight, rng_for("wu.out"), kScale);
  randomize(b.mask_hidden_layer.weight, rng_for("mask.hidden"), kScale);
  randomize(b.mask_out_layer.weight, rng_for("mask.out"), kScale);
  return b;
}

dsp::Waveform restore(const dsp::Waveform& wave, const RestorationBundle& bundle) {
  const auto& hp = bundle.hparams;
  if (wave.sample_rate != hp.sample_rate)
    throw ConfigError(fmt::format("restore: waveform rate {} but bundle expects {}",
                                  wave.sample_rate, hp.sample_rate));
  const int64_t n = wave.num_frames();
  const int bins = hp.n_fft / 2 + 1;
  const dsp::StftConfig cfg = hp.stft();

  dsp::Waveform out(wave.channels, n, wave.sample_rate);
  for (int ch = 0; ch < wave.channels; ++ch) {
    dsp::Waveform mono(1, n, wave.sample_rate);
    std::copy(wave.channel(ch).begin(), wave.channel(ch).end(),
              mono.channel(0).begin());
    const auto spec = dsp::stft(mono, cfg);

    // SpectralUNet on log magnitudes
    Tensor logmag({1, bins, spec.frames});
    for (int64_t t = 0; t < spec.frames; ++t)
      for (int k = 0; k < bins; ++k)
        logmag[static_cast<int64_t>(k) * spec.frames + t] = static_cast<float>(
            std::log1p(std::abs(std::complex<double>(spec.at(0, t, k)))));
    const Tensor e1 = nn::gelu(conv2d_forward(logmag, bundle.su_in));
    const Tensor d1 = nn::gelu(conv2d_forward(e1, bundle.su_down1));
    const Tensor d2 = nn::gelu(conv2d_forward(d1, bundle.su_down2));
    Tensor u1 = add_inplace(
        nn::gelu(conv2d_forward(upsample2d_to(d2, d1.dim(1), d1.dim(2)), bundle.su_up1)), d1);
    Tensor u2 = add_inplace(
        nn::gelu(conv2d_forward(upsample2d_to(u1, e1.dim(1), e1.dim(2)), bundle.su_up2)), e1);
    const Tensor feat2d = conv2d_forward(u2, bundle.su_out);  // [c x bins x frames]

    // learned channel expansion to waveform rate
    const int c = hp.spec_channels;
    const int cw = hp.wave_channels;
    Tensor frame_in({spec.frames, static_cast<int64_t>(c) * bins});
    for (int64_t t = 0; t < spec.frames; ++t) {
      auto row = frame_in.row(t);
      for (int cc = 0; cc < c; ++cc)
        for (int k = 0; k < bins; ++k)
          row[cc * bins + k] = feat2d[(static_cast<int64_t>(cc) * bins + k) * spec.frames + t];
    }
    const Tensor frame_out = nn::linear_forward(frame_in, bundle.upsampler);
    Tensor wave_feats({cw + 1, n});
    for (int64_t t = 0; t < spec.frames; ++t) {
      auto row = frame_out.row(t);
      for (int w = 0; w < cw; ++w)
        for (int i = 0; i < hp.hop; ++i) {
          const int64_t pos = t * hp.hop + i;
          if (pos < n) wave_feats[w * n + pos] = row[w * hp.hop + i];
        }
    }
    std::copy(mono.channel(0).begin(), mono.channel(0).end(),
              wave_feats.data() + static_cast<int64_t>(cw) * n);

    // WaveUNet refinement with a residual to the input
    const Tensor w1 = nn::gelu(conv1d_forward(wave_feats, bundle.wu_in));
    const Tensor wd = nn::gelu(conv1d_forward(w1, bundle.wu_down));
    const Tensor wm = nn::gelu(conv1d_forward(wd, bundle.wu_mid));
    Tensor wu = add_inplace(
        nn::gelu(conv1d_forward(upsample1d_to(wm, w1.dim(1), 4), bundle.wu_up)), w1);
    const Tensor delta = conv1d_forward(wu, bundle.wu_out);  // [1 x n]
    dsp::Waveform refined(1, n, wave.sample_rate);
    for (int64_t i = 0; i < n; ++i)
      refined.channel(0)[i] = mono.channel(0)[i] + delta[i];

    // SpectralMaskNet: real mask on the refined signal's spectrum
    auto rspec = dsp::stft(refined, cfg);
    Tensor mag_rows({rspec.frames, bins});
    for (int64_t t = 0; t < rspec.frames; ++t)
      for (int k = 0; k < bins; ++k)
        mag_rows[t * bins + k] = static_cast<float>(
            std::log1p(std::abs(std::complex<double>(rspec.at(0, t, k)))));
    const Tensor raw = nn::linear_forward(
        nn::gelu(nn::linear_forward(mag_rows, bundle.mask_hidden_layer)),
        bundle.mask_out_layer);
    for (int64_t t = 0; t < rspec.frames; ++t)
      for (int k = 0; k < bins; ++k) {
        const double r = std::clamp<double>(raw[t * bins + k], -10.0, 10.0);
        rspec.at(0, t, k) *= static_cast<float>(std::exp(r));
      }
    const dsp::Waveform restored = dsp::istft(rspec, n);
    std::copy(restored.channel(0).begin(), restored.channel(0).end(),
              out.channel(ch).begin());
  }
  if (!out.samples.empty() && out.num_frames() != n)
    throw NumericError("restore: length changed");
  return out;
}

namespace {

struct BundleParam {
  std::string name;
  const Tensor* tensor;
};

std::vector<BundleParam> bundle_params(const RestorationBundle& b) {
  return {
      {"su.in.weight", &b.su_in.weight},         {"su.in.bias", &b.su_in.bias},
      {"su.down1.weight", &b.su_down1.weight},   {"su.down1.bias", &b.su_down1.bias},
      {"su.down2.weight", &b.su_down2.weight},   {"su.down2.bias", &b.su_down2.bias},
      {"su.up1.weight", &b.su_up1.weight},       {"su.up1.bias", &b.su_up1.bias},
      {"su.up2.weight", &b.su_up2.weight},       {"su.up2.bias", &b.su_up2.bias},
      {"su.out.weight", &b.su_out.weight},       {"su.out.bias", &b.su_out.bias},
      {"upsampler.weight", &b.upsampler.weight}, {"upsampler.bias", &*b.upsampler.bias},
      {"wu.in.weight", &b.wu_in.weight},         {"wu.in.bias", &b.wu_in.bias},
      {"wu.down.weight", &b.wu_down.weight},     {"wu.down.bias", &b.wu_down.bias},
      {"wu.mid.weight", &b.wu_mid.weight},       {"wu.mid.bias", &b.wu_mid.bias},
      {"wu.up.weight", &b.wu_up.weight},         {"wu.up.bias", &b.wu_up.bias},
      {"wu.out.weight", &b.wu_out.weight},       {"wu.out.bias", &b.wu_out.bias},
      {"mask.hidden.weight", &b.mask_hidden_layer.weight},
      {"mask.hidden.bias", &*b.mask_hidden_layer.bias},
      {"mask.out.weight", &b.mask_out_layer.weight},
      {"mask.out.bias", &*b.mask_out_layer.bias},
  };
}

}  // namespace

nn::Checkpoint RestorationBundle::to_checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.meta["kind"] = "restoration";
  ckpt.meta["hparams"] = {
      {"sample_rate", hparams.sample_rate}, {"n_fft", hparams.n_fft},
      {"hop", hparams.hop},                 {"spec_channels", hparams.spec_channels},
      {"wave_channels", hparams.wave_channels},
      {"wave_kernel", hparams.wave_kernel}, {"mask_hidden", hparams.mask_hidden},
  };
  for (const auto& p : bundle_params(*this)) ckpt.add(p.name, *p.tensor);
  return ckpt;
}

RestorationBundle RestorationBundle::from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.meta.value("kind", "") != "restoration")
    throw ConfigError("checkpoint is not a restoration bundle");
  const auto& hj = ckpt.meta.at("hparams");
  RestorationHParams hp;
  hp.sample_rate = hj.at("sample_rate").get<int>();
  hp.n_fft = hj.at("n_fft").get<int>();
  hp.hop = hj.at("hop").get<int>();
  hp.spec_channels = hj.at("spec_channels").get<int>();
  hp.wave_channels = hj.at("wave_channels").get<int>();
  hp.wave_kernel = hj.at("wave_kernel").get<int>();
  hp.mask_hidden = hj.at("mask_hidden").get<int>();

  RestorationBundle b = make_identity_bundle(hp);
  size_t filled = 0;
  for (const auto& p : bundle_params(b)) {
    const auto& nt = ckpt.get(p.name);
    Tensor* dst = const_cast<Tensor*>(p.tensor);
    if (!dst->same_shape(nt.tensor))
      throw ShapeError(fmt::format("restoration tensor '{}': shape mismatch", p.name));
    *dst = nt.tensor;
    ++filled;
  }
  if (filled != ckpt.tensors.size())
    throw ConfigError("restoration checkpoint holds unexpected tensors");
  return b;
}

void RestorationBundle::save(const std::filesystem::path& path) const {
  nn::save_checkpoint(path, to_checkpoint());
}

RestorationBundle RestorationBundle::load(const std::filesystem::path& path) {
  return from_checkpoint(nn::load_checkpoint(path));
}

uint64_t RestorationBundle::parameter_checksum() const {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& p : bundle_params(*this))
    h = fnv1a64(p.tensor->data(),
                static_cast<size_t>(p.tensor->size()) * sizeof(float), h);
  return h;
}

}  // namespace msr::rest

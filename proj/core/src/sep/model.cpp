#include "msr/sep/model.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "msr/common.hpp"

namespace msr::sep {

namespace {

using nn::LinearLayer;
using nn::LoraAdapter;
using nn::Tensor;

CounterRng name_rng(uint64_t seed, const std::string& name) {
  return CounterRng(CounterRng::derive_key(seed, "separator", name));
}

LinearLayer seeded_linear(int64_t in, int64_t out, uint64_t seed,
                          const std::string& name, double scale = 1.0) {
  CounterRng rng = name_rng(seed, name);
  LinearLayer l = nn::make_linear(in, out, rng);
  if (scale != 1.0)
    for (int64_t i = 0; i < l.weight.size(); ++i)
      l.weight[i] = static_cast<float>(l.weight[i] * scale);
  return l;
}

AttentionWeights make_attention(int dim, uint64_t seed, const std::string& prefix) {
  AttentionWeights aw;
  aw.norm_gamma = Tensor::full({dim}, 1.0f);
  aw.norm_beta = Tensor({dim});
  aw.q = seeded_linear(dim, dim, seed, prefix + ".q");
  aw.k = seeded_linear(dim, dim, seed, prefix + ".k");
  aw.v = seeded_linear(dim, dim, seed, prefix + ".v");
  aw.out = seeded_linear(dim, dim, seed, prefix + ".out");
  return aw;
}

FeedForward make_ff(int dim, uint64_t seed, const std::string& prefix) {
  FeedForward ff;
  ff.norm_gamma = Tensor::full({dim}, 1.0f);
  ff.norm_beta = Tensor({dim});
  ff.in = seeded_linear(dim, 4 * dim, seed, prefix + ".in");
  ff.out = seeded_linear(4 * dim, dim, seed, prefix + ".out");
  return ff;
}

// mask-head output layers start small so fresh heads emit near-silent stems
constexpr double kHeadOutputScale = 0.05;

MaskHead make_head(const BandSplitScheme& scheme, int hidden, uint64_t seed,
                   const std::string& prefix) {
  MaskHead head;
  for (int b = 0; b < scheme.num_bands(); ++b) {
    head.hidden.push_back(seeded_linear(scheme.dim, hidden, seed,
                                        fmt::format("{}.b{}.hidden", prefix, b)));
    head.output.push_back(seeded_linear(hidden, 2 * scheme.band_width(b), seed,
                                        fmt::format("{}.b{}.output", prefix, b),
                                        kHeadOutputScale));
  }
  return head;
}

// parameter enumeration shared by checksums and checkpoint io
struct ParamRef {
  std::string name;
  const Tensor* tensor;
  bool trainable;
};

void collect_attention(const AttentionWeights& aw, const std::string& prefix,
                       std::vector<ParamRef>& out, bool backbone_trainable,
                       bool lora_trainable) {
  out.push_back({prefix + ".norm.gamma", &aw.norm_gamma, backbone_trainable});
  out.push_back({prefix + ".norm.beta", &aw.norm_beta, backbone_trainable});
  auto proj = [&](const char* tag, const LinearLayer& l, const std::optional<LoraAdapter>& a) {
    out.push_back({fmt::format("{}.{}.weight", prefix, tag), &l.weight, l.trainable});
    if (l.bias) out.push_back({fmt::format("{}.{}.bias", prefix, tag), &*l.bias, l.trainable});
    if (a) {
      out.push_back({fmt::format("{}.{}.lora_down", prefix, tag), &a->down, lora_trainable});
      out.push_back({fmt::format("{}.{}.lora_up", prefix, tag), &a->up, lora_trainable});
    }
  };
  proj("q", aw.q, aw.lora_q);
  proj("k", aw.k, aw.lora_k);
  proj("v", aw.v, aw.lora_v);
  proj("out", aw.out, aw.lora_out);
}

std::vector<ParamRef> collect_params(const SeparatorModel& m, bool lora_trainable) {
  std::vector<ParamRef> out;
  for (size_t b = 0; b < m.band_encoders.size(); ++b) {
    const auto& enc = m.band_encoders[b];
    out.push_back({fmt::format("encoder.b{}.weight", b), &enc.weight, enc.trainable});
    if (enc.bias) out.push_back({fmt::format("encoder.b{}.bias", b), &*enc.bias, enc.trainable});
  }
  for (size_t i = 0; i < m.blocks.size(); ++i) {
    const auto& blk = m.blocks[i];
    collect_attention(blk.time_attn, fmt::format("block{}.time", i), out,
                      m.backbone_trainable, lora_trainable);
    collect_attention(blk.band_attn, fmt::format("block{}.band", i), out,
                      m.backbone_trainable, lora_trainable);
    const std::string ff = fmt::format("block{}.ff", i);
    out.push_back({ff + ".norm.gamma", &blk.ff.norm_gamma, m.backbone_trainable});
    out.push_back({ff + ".norm.beta", &blk.ff.norm_beta, m.backbone_trainable});
    out.push_back({ff + ".in.weight", &blk.ff.in.weight, blk.ff.in.trainable});
    if (blk.ff.in.bias) out.push_back({ff + ".in.bias", &*blk.ff.in.bias, blk.ff.in.trainable});
    out.push_back({ff + ".out.weight", &blk.ff.out.weight, blk.ff.out.trainable});
    if (blk.ff.out.bias) out.push_back({ff + ".out.bias", &*blk.ff.out.bias, blk.ff.out.trainable});
  }
  for (size_t h = 0; h < m.heads.size(); ++h) {
    const auto& head = m.heads[h];
    const std::string prefix = fmt::format("head.{}", m.stem_ids[h]);
    for (size_t b = 0; b < head.hidden.size(); ++b) {
      const std::string bp = fmt::format("{}.b{}", prefix, b);
      out.push_back({bp + ".hidden.weight", &head.hidden[b].weight, head.trainable});
      if (head.hidden[b].bias)
        out.push_back({bp + ".hidden.bias", &*head.hidden[b].bias, head.trainable});
      out.push_back({bp + ".output.weight", &head.output[b].weight, head.trainable});
      if (head.output[b].bias)
        out.push_back({bp + ".output.bias", &*head.output[b].bias, head.trainable});
    }
  }
  return out;
}

Tensor to_heads(const Tensor& x, int heads) {
  const int64_t seq = x.dim(0), dim = x.dim(1), dh = dim / heads;
  Tensor y({heads, seq, dh});
  for (int64_t s = 0; s < seq; ++s)
    for (int h = 0; h < heads; ++h)
      for (int64_t t = 0; t < dh; ++t)
        y[(h * seq + s) * dh + t] = x[s * dim + h * dh + t];
  return y;
}

Tensor from_heads(const Tensor& x) {
  const int64_t heads = x.dim(0), seq = x.dim(1), dh = x.dim(2);
  Tensor y({seq, heads * dh});
  for (int64_t h = 0; h < heads; ++h)
    for (int64_t s = 0; s < seq; ++s)
      for (int64_t t = 0; t < dh; ++t)
        y[s * heads * dh + h * dh + t] = x[(h * seq + s) * dh + t];
  return y;
}

Tensor project(const Tensor& x, const LinearLayer& l,
               const std::optional<LoraAdapter>& a) {
  return a ? nn::lora_forward(x, l, *a) : nn::linear_forward(x, l);
}

// x [seq x dim] -> attention output (no residual); rotary on q and k.
Tensor attention_sub_block(const Tensor& x, const AttentionWeights& aw, int heads,
                           double rotary_base) {
  const Tensor normed = nn::layer_norm_forward(x, aw.norm_gamma, aw.norm_beta);
  Tensor q = to_heads(project(normed, aw.q, aw.lora_q), heads);
  Tensor k = to_heads(project(normed, aw.k, aw.lora_k), heads);
  const Tensor v = to_heads(project(normed, aw.v, aw.lora_v), heads);
  q = nn::rotary_embed(q, rotary_base);
  k = nn::rotary_embed(k, rotary_base);
  const Tensor attended = from_heads(nn::attention_forward(q, k, v));
  return project(attended, aw.out, aw.lora_out);
}

}  // namespace

void SeparatorHParams::validate() const {
  if (sample_rate <= 0 || n_fft <= 0 || hop <= 0 || bands < 2 || dim < 2 ||
      blocks < 0 || attn_heads < 1 || head_hidden < 1)
    throw ConfigError("separator hparams: values out of range");
  if (dim % attn_heads != 0)
    throw ConfigError(fmt::format("separator hparams: dim {} not divisible by {} heads",
                                  dim, attn_heads));
  if ((dim / attn_heads) % 2 != 0)
    throw ConfigError("separator hparams: per-head dim must be even for rotary pairs");
  stft().validate();
}

SeparatorModel SeparatorModel::create(const SeparatorHParams& hp,
                                      const std::vector<std::string>& stems,
                                      uint64_t seed) {
  hp.validate();
  if (stems.empty()) throw ConfigError("separator: no stems");
  if (std::count(stems.begin(), stems.end(), "other") != 1)
    throw ConfigError("separator: stem list must contain 'other' exactly once");

  SeparatorModel m;
  m.hparams = hp;
  m.scheme = mel_band_scheme(hp.bands, hp.n_fft, hp.sample_rate, hp.dim);
  for (int b = 0; b < m.scheme.num_bands(); ++b)
    m.band_encoders.push_back(seeded_linear(2 * m.scheme.band_width(b), hp.dim,
                                            seed, fmt::format("encoder.b{}", b)));
  for (int i = 0; i < hp.blocks; ++i) {
    TransformerBlock blk;
    blk.time_attn = make_attention(hp.dim, seed, fmt::format("block{}.time", i));
    blk.band_attn = make_attention(hp.dim, seed, fmt::format("block{}.band", i));
    blk.ff = make_ff(hp.dim, seed, fmt::format("block{}.ff", i));
    m.blocks.push_back(std::move(blk));
  }
  m.stem_ids = stems;
  for (const auto& stem : stems)
    m.heads.push_back(make_head(m.scheme, hp.head_hidden, seed, fmt::format("head.{}", stem)));
  return m;
}

int SeparatorModel::head_index(const std::string& stem_id) const {
  auto it = std::find(stem_ids.begin(), stem_ids.end(), stem_id);
  return it == stem_ids.end() ? -1 : static_cast<int>(it - stem_ids.begin());
}

bool SeparatorModel::has_lora() const {
  for (const auto& blk : blocks)
    if (blk.time_attn.lora_q || blk.band_attn.lora_q) return true;
  return false;
}

std::map<std::string, uint64_t> SeparatorModel::parameter_checksums() const {
  std::map<std::string, uint64_t> out;
  for (const auto& p : collect_params(*this, /*lora_trainable=*/false))
    out[p.name] = nn::tensor_checksum(*p.tensor);
  return out;
}

nn::Tensor band_split(const dsp::ComplexSpectrogram& spec,
                      const SeparatorModel& model, int channel) {
  if (spec.bins != model.scheme.total_bins())
    throw ShapeError(fmt::format("band_split: {} bins but scheme covers {}",
                                 spec.bins, model.scheme.total_bins()));
  if (channel < 0 || channel >= spec.channels)
    throw ShapeError("band_split: channel out of range");
  const int64_t frames = spec.frames;
  const int dim = model.scheme.dim;
  Tensor features({frames, model.scheme.num_bands(), dim});
  for (int b = 0; b < model.scheme.num_bands(); ++b) {
    const auto [start, end] = model.scheme.bands[b];
    const int width = end - start;
    Tensor in({frames, 2 * width});
    for (int64_t t = 0; t < frames; ++t) {
      auto row = in.row(t);
      for (int k = 0; k < width; ++k) {
        const auto v = spec.at(channel, t, start + k);
        row[2 * k] = v.real();
        row[2 * k + 1] = v.imag();
      }
    }
    const Tensor enc = nn::linear_forward(in, model.band_encoders[b]);
    for (int64_t t = 0; t < frames; ++t)
      std::copy(enc.row(t).begin(), enc.row(t).end(),
                features.data() + (t * model.scheme.num_bands() + b) * dim);
  }
  return features;
}

nn::Tensor backbone_forward(const nn::Tensor& features, const SeparatorModel& model) {
  if (features.rank() != 3 || features.dim(1) != model.scheme.num_bands() ||
      features.dim(2) != model.scheme.dim)
    throw ShapeError(fmt::format("backbone_forward: bad feature shape {}",
                                 features.shape_str()));
  const int64_t frames = features.dim(0);
  const int bands = model.scheme.num_bands();
  const int dim = model.scheme.dim;
  const int heads = model.hparams.attn_heads;
  const double base = model.hparams.rotary_base;

  Tensor work = features;
  auto band_slice = [&](int b) {
    Tensor x({frames, dim});
    for (int64_t t = 0; t < frames; ++t)
      std::copy(work.data() + (t * bands + b) * dim,
                work.data() + (t * bands + b) * dim + dim, x.row(t).begin());
    return x;
  };
  auto frame_slice = [&](int64_t t) {
    Tensor x({bands, dim});
    std::copy(work.data() + t * bands * dim, work.data() + (t + 1) * bands * dim,
              x.data());
    return x;
  };

  for (const auto& blk : model.blocks) {
    for (int b = 0; b < bands; ++b) {  // attention along time, one band at a time
      Tensor x = band_slice(b);
      const Tensor y = attention_sub_block(x, blk.time_attn, heads, base);
      for (int64_t t = 0; t < frames; ++t) {
        float* dst = work.data() + (t * bands + b) * dim;
        for (int d = 0; d < dim; ++d) dst[d] += y[t * dim + d];
      }
    }
    for (int64_t t = 0; t < frames; ++t) {  // attention across bands, per frame
      Tensor x = frame_slice(t);
      const Tensor y = attention_sub_block(x, blk.band_attn, heads, base);
      float* dst = work.data() + t * bands * dim;
      for (int64_t i = 0; i < y.size(); ++i) dst[i] += y[i];
    }
    {  // position-wise feed-forward
      const Tensor flat = work.reshaped({frames * bands, dim});
      const Tensor normed = nn::layer_norm_forward(flat, blk.ff.norm_gamma, blk.ff.norm_beta);
      const Tensor y = nn::linear_forward(nn::gelu(nn::linear_forward(normed, blk.ff.in)),
                                          blk.ff.out);
      for (int64_t i = 0; i < work.size(); ++i) work[i] += y[i];
    }
  }
  if (!work.all_finite())
    throw NumericError("backbone_forward: non-finite activations");
  return work;
}

std::map<std::string, nn::Tensor> estimate_masks(const nn::Tensor& features,
                                                 const SeparatorModel& model) {
  const int64_t frames = features.dim(0);
  const int bands = model.scheme.num_bands();
  const int dim = model.scheme.dim;
  const int bins = model.scheme.total_bins();

  std::map<std::string, Tensor> masks;
  for (size_t h = 0; h < model.heads.size(); ++h) {
    const MaskHead& head = model.heads[h];
    Tensor mask({frames, 2 * bins});
    for (int b = 0; b < bands; ++b) {
      Tensor x({frames, dim});
      for (int64_t t = 0; t < frames; ++t)
        std::copy(features.data() + (t * bands + b) * dim,
                  features.data() + (t * bands + b) * dim + dim, x.row(t).begin());
      const Tensor y = nn::linear_forward(
          nn::gelu(nn::linear_forward(x, head.hidden[b])), head.output[b]);
      const int start = model.scheme.bands[b].first;
      for (int64_t t = 0; t < frames; ++t)
        std::copy(y.row(t).begin(), y.row(t).end(),
                  mask.row(t).begin() + 2 * start);
    }
    masks.emplace(model.stem_ids[h], std::move(mask));
  }
  return masks;
}

dsp::ComplexSpectrogram apply_mask(const dsp::ComplexSpectrogram& mix,
                                   const dsp::ComplexSpectrogram& mask) {
  if (mix.channels != mask.channels || mix.frames != mask.frames ||
      mix.bins != mask.bins)
    throw ShapeError("apply_mask: mask/mix shapes differ");
  dsp::ComplexSpectrogram out = mix;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = mask.data[i] * mix.data[i];
  return out;
}

StemSet separate(const dsp::Waveform& x, const SeparatorModel& model) {
  if (x.sample_rate != model.hparams.sample_rate)
    throw ConfigError(fmt::format("separate: waveform rate {} but model expects {}",
                                  x.sample_rate, model.hparams.sample_rate));
  const dsp::ComplexSpectrogram mix = dsp::stft(x, model.hparams.stft());

  // per-stem complex masks, assembled channel by channel
  std::map<std::string, dsp::ComplexSpectrogram> masks;
  for (const auto& stem : model.stem_ids) {
    dsp::ComplexSpectrogram m = mix;
    std::fill(m.data.begin(), m.data.end(), std::complex<float>(0.0f, 0.0f));
    masks.emplace(stem, std::move(m));
  }
  for (int c = 0; c < mix.channels; ++c) {
    const Tensor features = backbone_forward(band_split(mix, model, c), model);
    auto channel_masks = estimate_masks(features, model);
    for (auto& [stem, mt] : channel_masks) {
      auto& dst = masks.at(stem);
      for (int64_t t = 0; t < mix.frames; ++t) {
        auto row = mt.row(t);
        for (int k = 0; k < mix.bins; ++k)
          dst.at(c, t, k) = std::complex<float>(row[2 * k], row[2 * k + 1]);
      }
    }
  }

  StemSet out;
  for (const auto& stem : model.stem_ids)
    out.emplace(stem, dsp::istft(apply_mask(mix, masks.at(stem))));
  return out;
}

SeparatorModel expand_heads(const SeparatorModel& model4,
                            const std::vector<std::string>& new_stem_ids,
                            uint64_t seed) {
  if (model4.has_lora())
    throw ConfigError("expand_heads: merge LoRA adapters before expanding");
  SeparatorModel m = model4;  // shared layers and old heads copied verbatim
  for (const auto& stem : new_stem_ids) {
    if (m.head_index(stem) >= 0)
      throw ConfigError(fmt::format("expand_heads: stem '{}' already present", stem));
    if (std::count(new_stem_ids.begin(), new_stem_ids.end(), stem) != 1)
      throw ConfigError(fmt::format("expand_heads: duplicate new stem '{}'", stem));
  }
  // freeze the backbone and existing heads; only new heads train
  m.backbone_trainable = false;
  for (auto& enc : m.band_encoders) enc.trainable = false;
  for (auto& blk : m.blocks) {
    for (auto* aw : {&blk.time_attn, &blk.band_attn})
      for (auto* l : {&aw->q, &aw->k, &aw->v, &aw->out}) l->trainable = false;
    blk.ff.in.trainable = false;
    blk.ff.out.trainable = false;
  }
  for (auto& head : m.heads) head.trainable = false;
  for (const auto& stem : new_stem_ids) {
    MaskHead head = make_head(m.scheme, m.hparams.head_hidden, seed,
                              fmt::format("head.{}", stem));
    head.trainable = true;
    for (auto& l : head.hidden) l.trainable = true;
    for (auto& l : head.output) l.trainable = true;
    m.stem_ids.push_back(stem);
    m.heads.push_back(std::move(head));
  }
  return m;
}

void attach_lora(SeparatorModel& model, int64_t rank, float alpha, uint64_t seed) {
  if (model.has_lora()) throw ConfigError("attach_lora: adapters already attached");
  for (size_t i = 0; i < model.blocks.size(); ++i) {
    auto& blk = model.blocks[i];
    auto attach = [&](AttentionWeights& aw, const std::string& prefix) {
      auto one = [&](const LinearLayer& l, const char* tag) {
        CounterRng rng = name_rng(seed, fmt::format("{}.{}.lora", prefix, tag));
        return nn::make_lora(l, rank, alpha, rng);
      };
      aw.lora_q = one(aw.q, "q");
      aw.lora_k = one(aw.k, "k");
      aw.lora_v = one(aw.v, "v");
      aw.lora_out = one(aw.out, "out");
    };
    attach(blk.time_attn, fmt::format("block{}.time", i));
    attach(blk.band_attn, fmt::format("block{}.band", i));
  }
}

void merge_lora(SeparatorModel& model) {
  if (!model.has_lora()) {
    log_info("merge_lora: no adapters attached, model unchanged");
    return;
  }
  for (auto& blk : model.blocks) {
    for (auto* aw : {&blk.time_attn, &blk.band_attn}) {
      auto merge_one = [](LinearLayer& l, std::optional<LoraAdapter>& a) {
        if (a) {
          l = nn::lora_merge(l, *a);
          a.reset();
        }
      };
      merge_one(aw->q, aw->lora_q);
      merge_one(aw->k, aw->lora_k);
      merge_one(aw->v, aw->lora_v);
      merge_one(aw->out, aw->lora_out);
    }
  }
}

nn::Checkpoint SeparatorModel::to_checkpoint() const {
  nn::Checkpoint ckpt;
  nlohmann::ordered_json meta = extra_meta;
  meta["kind"] = "separator";
  meta["hparams"] = {
      {"sample_rate", hparams.sample_rate}, {"n_fft", hparams.n_fft},
      {"hop", hparams.hop},                 {"bands", hparams.bands},
      {"dim", hparams.dim},                 {"blocks", hparams.blocks},
      {"attn_heads", hparams.attn_heads},   {"head_hidden", hparams.head_hidden},
      {"rotary_base", hparams.rotary_base},
  };
  meta["stem_ids"] = stem_ids;
  auto bands_json = nlohmann::ordered_json::array();
  for (const auto& [s, e] : scheme.bands) bands_json.push_back({s, e});
  meta["scheme"] = {{"dim", scheme.dim}, {"bands", bands_json}};
  if (has_lora()) {
    const auto& a = *blocks.front().time_attn.lora_q;
    meta["lora"] = {{"rank", a.rank()}, {"alpha", a.alpha}};
  } else {
    meta.erase("lora");
  }
  meta["backbone_trainable"] = backbone_trainable;
  ckpt.meta = std::move(meta);
  for (const auto& p : collect_params(*this, lora_trainable))
    ckpt.add(p.name, *p.tensor, p.trainable);
  return ckpt;
}

SeparatorModel SeparatorModel::from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.meta.value("kind", "") != "separator")
    throw ConfigError("checkpoint is not a separator model");
  const auto& hp_json = ckpt.meta.at("hparams");
  SeparatorHParams hp;
  hp.sample_rate = hp_json.at("sample_rate").get<int>();
  hp.n_fft = hp_json.at("n_fft").get<int>();
  hp.hop = hp_json.at("hop").get<int>();
  hp.bands = hp_json.at("bands").get<int>();
  hp.dim = hp_json.at("dim").get<int>();
  hp.blocks = hp_json.at("blocks").get<int>();
  hp.attn_heads = hp_json.at("attn_heads").get<int>();
  hp.head_hidden = hp_json.at("head_hidden").get<int>();
  hp.rotary_base = hp_json.at("rotary_base").get<double>();

  const auto stems = ckpt.meta.at("stem_ids").get<std::vector<std::string>>();
  SeparatorModel m = create(hp, stems, /*seed=*/0);

  // scheme comes from the checkpoint, not re-derived
  BandSplitScheme scheme;
  scheme.dim = ckpt.meta.at("scheme").at("dim").get<int>();
  for (const auto& pair : ckpt.meta.at("scheme").at("bands"))
    scheme.bands.emplace_back(pair[0].get<int>(), pair[1].get<int>());
  scheme.validate(hp.n_fft / 2 + 1);
  if (scheme.bands != m.scheme.bands || scheme.dim != m.scheme.dim)
    throw ConfigError("checkpoint band scheme does not match hparams derivation");

  if (ckpt.meta.contains("lora"))
    attach_lora(m, ckpt.meta.at("lora").at("rank").get<int64_t>(),
                ckpt.meta.at("lora").at("alpha").get<float>(), /*seed=*/0);

  // overwrite every tensor by name and restore trainable flags
  auto refs = collect_params(m, false);
  std::map<std::string, const ParamRef*> by_name;
  for (const auto& r : refs) by_name[r.name] = &r;
  size_t used = 0;
  bool lora_trainable = false;
  for (const auto& nt : ckpt.tensors) {
    auto it = by_name.find(nt.name);
    if (it == by_name.end())
      throw ConfigError(fmt::format("checkpoint tensor '{}' has no slot in the model", nt.name));
    Tensor* dst = const_cast<Tensor*>(it->second->tensor);
    if (!dst->same_shape(nt.tensor))
      throw ShapeError(fmt::format("checkpoint tensor '{}': shape {} vs model {}",
                                   nt.name, nt.tensor.shape_str(), dst->shape_str()));
    *dst = nt.tensor;
    ++used;
    if (nt.name.find(".lora_") != std::string::npos && nt.trainable)
      lora_trainable = true;
  }
  if (used != refs.size())
    throw ConfigError(fmt::format("checkpoint holds {} tensors but the model needs {}",
                                  used, refs.size()));

  // trainable flags: layer-level, derived from the stored per-tensor flags
  auto flag_of = [&](const std::string& name) {
    for (const auto& nt : ckpt.tensors)
      if (nt.name == name) return nt.trainable;
    return false;
  };
  m.backbone_trainable = flag_of("block0.time.norm.gamma");
  for (size_t b = 0; b < m.band_encoders.size(); ++b)
    m.band_encoders[b].trainable = flag_of(fmt::format("encoder.b{}.weight", b));
  for (size_t i = 0; i < m.blocks.size(); ++i) {
    auto& blk = m.blocks[i];
    for (auto [aw, tag] : {std::pair{&blk.time_attn, "time"}, {&blk.band_attn, "band"}}) {
      aw->q.trainable = flag_of(fmt::format("block{}.{}.q.weight", i, tag));
      aw->k.trainable = flag_of(fmt::format("block{}.{}.k.weight", i, tag));
      aw->v.trainable = flag_of(fmt::format("block{}.{}.v.weight", i, tag));
      aw->out.trainable = flag_of(fmt::format("block{}.{}.out.weight", i, tag));
    }
    blk.ff.in.trainable = flag_of(fmt::format("block{}.ff.in.weight", i));
    blk.ff.out.trainable = flag_of(fmt::format("block{}.ff.out.weight", i));
  }
  for (size_t h = 0; h < m.heads.size(); ++h) {
    const bool t = flag_of(fmt::format("head.{}.b0.hidden.weight", m.stem_ids[h]));
    m.heads[h].trainable = t;
    for (auto& l : m.heads[h].hidden) l.trainable = t;
    for (auto& l : m.heads[h].output) l.trainable = t;
  }
  m.lora_trainable = lora_trainable;
  m.extra_meta = ckpt.meta;
  return m;
}

void SeparatorModel::save(const std::filesystem::path& path) const {
  nn::save_checkpoint(path, to_checkpoint());
}

SeparatorModel SeparatorModel::load(const std::filesystem::path& path) {
  return from_checkpoint(nn::load_checkpoint(path));
}

}  // namespace msr::sep

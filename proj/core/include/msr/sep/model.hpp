#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "msr/dsp/stft.hpp"
#include "msr/nn/checkpoint.hpp"
#include "msr/nn/layers.hpp"
#include "msr/sep/band_scheme.hpp"
#include "msr/stem_set.hpp"

namespace msr::sep {

struct SeparatorHParams {
  int sample_rate = 44100;
  int n_fft = 2048;
  int hop = 512;
  int bands = 8;
  int dim = 64;         // per-band embedding width
  int blocks = 2;
  int attn_heads = 4;
  int head_hidden = 64;  // mask-head MLP hidden width
  double rotary_base = 10000.0;

  dsp::StftConfig stft() const { return {n_fft, hop, dsp::WindowKind::Hann, true}; }
  void validate() const;
};

// One attention sub-block (pre-norm): LN -> qkv -> rotary -> attention -> out.
struct AttentionWeights {
  nn::Tensor norm_gamma, norm_beta;
  nn::LinearLayer q, k, v, out;
  std::optional<nn::LoraAdapter> lora_q, lora_k, lora_v, lora_out;
};

struct FeedForward {
  nn::Tensor norm_gamma, norm_beta;
  nn::LinearLayer in;   // dim -> 4*dim
  nn::LinearLayer out;  // 4*dim -> dim
};

// Alternating attention over the time axis (per band) and the band axis
// (per frame), each followed residually, then a feed-forward.
struct TransformerBlock {
  AttentionWeights time_attn;
  AttentionWeights band_attn;
  FeedForward ff;
};

// Per-band two-layer MLP emitting interleaved (re, im) mask values.
struct MaskHead {
  std::vector<nn::LinearLayer> hidden;  // per band: dim -> head_hidden
  std::vector<nn::LinearLayer> output;  // per band: head_hidden -> 2*band_width
  bool trainable = false;
};

class SeparatorModel {
 public:
  SeparatorHParams hparams;
  BandSplitScheme scheme;
  std::vector<nn::LinearLayer> band_encoders;  // per band: 2*width -> dim
  std::vector<TransformerBlock> blocks;
  std::vector<std::string> stem_ids;  // head order
  std::vector<MaskHead> heads;        // aligned with stem_ids
  bool backbone_trainable = false;
  bool lora_trainable = false;
  // meta fields carried through load/save untouched (e.g. surgery provenance),
  // so checkpoint round trips stay byte-identical
  nlohmann::ordered_json extra_meta = nlohmann::ordered_json::object();

  static SeparatorModel create(const SeparatorHParams& hp,
                               const std::vector<std::string>& stems,
                               uint64_t seed);

  int head_index(const std::string& stem_id) const;  // -1 if absent
  bool has_lora() const;

  // parameter-wise checksums, keyed by tensor name (tests and the frozen
  // -backbone guarantee rely on these)
  std::map<std::string, uint64_t> parameter_checksums() const;

  nn::Checkpoint to_checkpoint() const;
  static SeparatorModel from_checkpoint(const nn::Checkpoint& ckpt);
  void save(const std::filesystem::path& path) const;
  static SeparatorModel load(const std::filesystem::path& path);
};

// Per-band encoding of one channel: frames x bands x dim.
nn::Tensor band_split(const dsp::ComplexSpectrogram& spec,
                      const SeparatorModel& model, int channel = 0);

nn::Tensor backbone_forward(const nn::Tensor& features, const SeparatorModel& model);

// Complex masks assembled across bands, one per stem, for one channel's
// features; each mask is [frames x 2*bins] interleaved (re, im).
std::map<std::string, nn::Tensor> estimate_masks(const nn::Tensor& features,
                                                 const SeparatorModel& model);

// Elementwise complex product mask * mix.
dsp::ComplexSpectrogram apply_mask(const dsp::ComplexSpectrogram& mix,
                                   const dsp::ComplexSpectrogram& mask);

// Full separation: stft -> band split -> backbone -> masks -> istft per stem.
StemSet separate(const dsp::Waveform& x, const SeparatorModel& model);

// Checkpoint surgery: copy shared layers and existing heads verbatim, add
// seeded random heads for the new stems, freeze everything but the new heads.
SeparatorModel expand_heads(const SeparatorModel& model4,
                            const std::vector<std::string>& new_stem_ids,
                            uint64_t seed);

// LoRA handling for the three-stage curriculum.
void attach_lora(SeparatorModel& model, int64_t rank, float alpha, uint64_t seed);
void merge_lora(SeparatorModel& model);  // folds adapters into weights, drops them

}  // namespace msr::sep

#pragma once

#include <optional>

#include "msr/nn/tensor.hpp"
#include "msr/rng.hpp"

namespace msr::nn {

struct LinearLayer {
  Tensor weight;               // [out x in]
  std::optional<Tensor> bias;  // [out]
  bool trainable = false;

  int64_t in_features() const { return weight.dim(1); }
  int64_t out_features() const { return weight.dim(0); }
};

// Low-rank adapter for a LinearLayer. `up` starts at zero so a freshly
// attached adapter leaves the layer's function unchanged.
struct LoraAdapter {
  Tensor down;  // [r x in]
  Tensor up;    // [out x r]
  float alpha = 16.0f;

  int64_t rank() const { return down.dim(0); }
  float scaling() const { return alpha / static_cast<float>(rank()); }
};

LinearLayer make_linear(int64_t in, int64_t out, CounterRng& rng, bool bias = true);
LoraAdapter make_lora(const LinearLayer& layer, int64_t rank, float alpha,
                      CounterRng& rng);

// y = x . W^T + b for x [.. x in]
Tensor linear_forward(const Tensor& x, const LinearLayer& layer);

// y = x . W^T + b + (alpha/r) . x . down^T . up^T
Tensor lora_forward(const Tensor& x, const LinearLayer& layer,
                    const LoraAdapter& adapter);

// Folds the adapter into the weights: W' = W + (alpha/r) . up . down.
// Merging is additive, so applying the same adapter twice doubles its effect.
LinearLayer lora_merge(const LinearLayer& layer, const LoraAdapter& adapter);

// Rotates consecutive feature pairs of x [.. x seq x dim] by m * theta_i,
// theta_i = base^(-2i/dim), position m along the seq axis.
Tensor rotary_embed(const Tensor& x, double base = 10000.0);

// softmax(q k^T / sqrt(d)) v for q,k,v [heads x seq x d]
Tensor attention_forward(const Tensor& q, const Tensor& k, const Tensor& v);

inline constexpr float kLayerNormEps = 1e-5f;
Tensor layer_norm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                          float eps = kLayerNormEps);

Tensor gelu(const Tensor& x);  // tanh approximation
float gelu_scalar(float x);

uint64_t tensor_checksum(const Tensor& t);

}  // namespace msr::nn

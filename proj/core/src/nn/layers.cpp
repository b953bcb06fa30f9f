#include "msr/nn/layers.hpp"

#include <fmt/format.h>

#include <Eigen/Dense>
#include <cmath>

#include "msr/common.hpp"

namespace msr::nn {

namespace {

using MatMap = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MutMatMap = Eigen::Map<Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace

LinearLayer make_linear(int64_t in, int64_t out, CounterRng& rng, bool bias) {
  LinearLayer l;
  l.weight = Tensor({out, in});
  const float scale = 1.0f / std::sqrt(static_cast<float>(in));
  for (int64_t i = 0; i < l.weight.size(); ++i)
    l.weight[i] = scale * static_cast<float>(rng.gaussian());
  if (bias) l.bias = Tensor({out});
  return l;
}

LoraAdapter make_lora(const LinearLayer& layer, int64_t rank, float alpha,
                      CounterRng& rng) {
  const int64_t in = layer.in_features(), out = layer.out_features();
  if (rank < 1 || rank > std::min(in, out))
    throw ShapeError(fmt::format("lora rank {} invalid for {}x{} layer", rank, out, in));
  LoraAdapter a;
  a.alpha = alpha;
  a.down = Tensor({rank, in});
  const float scale = 1.0f / std::sqrt(static_cast<float>(in));
  for (int64_t i = 0; i < a.down.size(); ++i)
    a.down[i] = scale * static_cast<float>(rng.gaussian());
  a.up = Tensor({out, rank});  // zero: adapter starts as a no-op
  return a;
}

Tensor linear_forward(const Tensor& x, const LinearLayer& layer) {
  const int64_t in = layer.in_features(), out = layer.out_features();
  if (x.cols() != in)
    throw ShapeError(fmt::format("linear_forward: input {} incompatible with {}x{} weight",
                                 x.shape_str(), out, in));
  const int64_t m = x.rows();
  auto out_shape = x.shape();
  out_shape.back() = out;
  Tensor y(std::move(out_shape));

  MatMap xm(x.data(), m, in);
  MatMap wm(layer.weight.data(), out, in);
  MutMatMap ym(y.data(), m, out);
  ym.noalias() = xm * wm.transpose();
  if (layer.bias) {
    MatMap bm(layer.bias->data(), 1, out);
    ym.rowwise() += bm.row(0);
  }
  return y;
}

Tensor lora_forward(const Tensor& x, const LinearLayer& layer,
                    const LoraAdapter& adapter) {
  const int64_t in = layer.in_features(), out = layer.out_features();
  const int64_t r = adapter.rank();
  if (adapter.down.dim(1) != in || adapter.up.dim(0) != out || adapter.up.dim(1) != r)
    throw ShapeError("lora_forward: adapter shapes inconsistent with layer");
  Tensor y = linear_forward(x, layer);

  const int64_t m = x.rows();
  MatMap xm(x.data(), m, in);
  MatMap dm(adapter.down.data(), r, in);
  MatMap um(adapter.up.data(), out, r);
  MutMatMap ym(y.data(), m, out);
  ym.noalias() += adapter.scaling() * ((xm * dm.transpose()) * um.transpose());
  return y;
}

LinearLayer lora_merge(const LinearLayer& layer, const LoraAdapter& adapter) {
  const int64_t in = layer.in_features(), out = layer.out_features();
  const int64_t r = adapter.rank();
  if (adapter.down.dim(1) != in || adapter.up.dim(0) != out)
    throw ShapeError("lora_merge: adapter shapes inconsistent with layer");
  LinearLayer merged = layer;
  MutMatMap wm(merged.weight.data(), out, in);
  MatMap dm(adapter.down.data(), r, in);
  MatMap um(adapter.up.data(), out, r);
  wm.noalias() += adapter.scaling() * (um * dm);
  return merged;
}

Tensor rotary_embed(const Tensor& x, double base) {
  if (x.rank() < 2) throw ShapeError("rotary_embed: need at least [seq x dim]");
  const int64_t dim = x.cols();
  if (dim % 2 != 0)
    throw ShapeError(fmt::format("rotary_embed: feature dim {} must be even", dim));
  const int64_t seq = x.dim(x.rank() - 2);
  const int64_t batch = x.size() / (seq * dim);

  Tensor y = x;
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t m = 0; m < seq; ++m) {
      float* row = y.data() + (b * seq + m) * dim;
      for (int64_t i = 0; i < dim / 2; ++i) {
        const double theta = std::pow(base, -2.0 * static_cast<double>(i) / dim);
        const double ang = theta * static_cast<double>(m);
        const double c = std::cos(ang), s = std::sin(ang);
        const double a = row[2 * i], bval = row[2 * i + 1];
        row[2 * i] = static_cast<float>(a * c - bval * s);
        row[2 * i + 1] = static_cast<float>(a * s + bval * c);
      }
    }
  }
  return y;
}

Tensor attention_forward(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (q.rank() != 3 || !q.same_shape(k) || !q.same_shape(v))
    throw ShapeError("attention_forward: q/k/v must share shape [heads x seq x d]");
  const int64_t heads = q.dim(0), seq = q.dim(1), d = q.dim(2);
  const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(d));

  Tensor out(q.shape());
  std::vector<double> scores(seq);
  for (int64_t h = 0; h < heads; ++h) {
    const float* qh = q.data() + h * seq * d;
    const float* kh = k.data() + h * seq * d;
    const float* vh = v.data() + h * seq * d;
    float* oh = out.data() + h * seq * d;
    for (int64_t i = 0; i < seq; ++i) {
      double max_s = -1e300;
      for (int64_t j = 0; j < seq; ++j) {
        double dot = 0.0;
        for (int64_t t = 0; t < d; ++t)
          dot += static_cast<double>(qh[i * d + t]) * kh[j * d + t];
        scores[j] = dot * inv_sqrt_d;
        max_s = std::max(max_s, scores[j]);
      }
      double denom = 0.0;
      for (int64_t j = 0; j < seq; ++j) {
        scores[j] = std::exp(scores[j] - max_s);
        denom += scores[j];
      }
      for (int64_t t = 0; t < d; ++t) {
        double acc = 0.0;
        for (int64_t j = 0; j < seq; ++j)
          acc += scores[j] * vh[j * d + t];
        oh[i * d + t] = static_cast<float>(acc / denom);
      }
    }
  }
  return out;
}

Tensor layer_norm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                          float eps) {
  const int64_t dim = x.cols();
  if (gamma.size() != dim || beta.size() != dim)
    throw ShapeError(fmt::format("layer_norm: affine size {} vs feature dim {}",
                                 gamma.size(), dim));
  Tensor y(x.shape());
  for (int64_t i = 0; i < x.rows(); ++i) {
    auto src = x.row(i);
    auto dst = y.row(i);
    double mean = 0.0;
    for (float v : src) mean += v;
    mean /= static_cast<double>(dim);
    double var = 0.0;
    for (float v : src) var += (v - mean) * (v - mean);
    var /= static_cast<double>(dim);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    for (int64_t j = 0; j < dim; ++j)
      dst[j] = static_cast<float>((src[j] - mean) * inv_std) * gamma[j] + beta[j];
  }
  return y;
}

float gelu_scalar(float x) {
  constexpr float kC = 0.7978845608028654f;  // sqrt(2/pi)
  const float inner = kC * (x + 0.044715f * x * x * x);
  return 0.5f * x * (1.0f + std::tanh(inner));
}

Tensor gelu(const Tensor& x) {
  Tensor y = x;
  for (int64_t i = 0; i < y.size(); ++i) y[i] = gelu_scalar(y[i]);
  return y;
}

uint64_t tensor_checksum(const Tensor& t) {
  return fnv1a64(t.data(), static_cast<size_t>(t.size()) * sizeof(float));
}

}  // namespace msr::nn

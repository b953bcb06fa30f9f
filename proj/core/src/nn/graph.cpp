#include "msr/nn/graph.hpp"

#include <fmt/format.h>

#include <Eigen/Dense>
#include <cmath>
#include <set>

#include "msr/nn/layers.hpp"

namespace msr::nn {

namespace {

using MatMap = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MutMatMap = Eigen::Map<Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

const std::set<std::string, std::less<>>& op_registry() {
  static const std::set<std::string, std::less<>> ops = {
      "constant", "param",   "add",       "sub",        "mul",
      "scale",    "scale_by", "sum",      "mean",       "dot",
      "abs",      "sqrt",    "log",       "clamp",      "gelu",
      "gather",   "concat_cols", "stack_rows", "linear",
      "complex_mask_apply", "stft", "istft", "magnitude"};
  return ops;
}

}  // namespace

bool Tape::op_supported(std::string_view name) {
  return op_registry().count(name) > 0;
}

void Tape::check_op_supported(std::string_view name) {
  if (!op_supported(name))
    throw UnsupportedOperationError(
        fmt::format("operation '{}' is outside the supported gradient op set", name));
}

Tape::NodeId Tape::push(std::string_view op, Tensor value, bool requires_grad,
                        std::function<void(Tape&)> backprop) {
  check_op_supported(op);
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tensor& Tape::grad_buf(NodeId id) {
  Node& n = nodes_[id];
  if (!n.grad_alloc) {
    n.grad = Tensor::zeros(n.value.shape());
    n.grad_alloc = true;
  }
  return n.grad;
}

const Tensor& Tape::grad(NodeId id) const {
  const Node& n = nodes_[id];
  if (!n.grad_alloc)
    throw NumericError("gradient not populated; call backward() first");
  return n.grad;
}

float Tape::scalar_value(NodeId id) const {
  const Tensor& v = nodes_[id].value;
  if (v.size() != 1) throw ShapeError("expected scalar node");
  return v[0];
}

Tape::NodeId Tape::constant(Tensor value) {
  return push("constant", std::move(value), false, {});
}

Tape::NodeId Tape::param(Tensor value, bool trainable) {
  return push("param", std::move(value), trainable, {});
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (!va.same_shape(vb))
    throw ShapeError(fmt::format("add: {} vs {}", va.shape_str(), vb.shape_str()));
  Tensor out = va;
  for (int64_t i = 0; i < out.size(); ++i) out[i] += vb[i];
  const bool rg = requires_grad(a) || requires_grad(b);
  NodeId id = push("add", std::move(out), rg, {});
  if (rg)
    nodes_[id].backprop = [a, b, id](Tape& t) {
      const Tensor& g = t.grad_buf(id);
      if (t.requires_grad(a)) {
        Tensor& ga = t.grad_buf(a);
        for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (t.requires_grad(b)) {
        Tensor& gb = t.grad_buf(b);
        for (int64_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    };
  return id;
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (!va.same_shape(vb))
    throw ShapeError(fmt::format("sub: {} vs {}", va.shape_str(), vb.shape_str()));
  Tensor out = va;
  for (int64_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
  const bool rg = requires_grad(a) || requires_grad(b);
  NodeId id = push("sub", std::move(out), rg, {});
  if (rg)
    nodes_[id].backprop = [a, b, id](Tape& t) {
      const Tensor& g = t.grad_buf(id);
      if (t.requires_grad(a)) {
        Tensor& ga = t.grad_buf(a);
        for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (t.requires_grad(b)) {
        Tensor& gb = t.grad_buf(b);
        for (int64_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    };
  return id;
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (!va.same_shape(vb))
    throw ShapeError(fmt::format("mul: {} vs {}", va.shape_str(), vb.shape_str()));
  Tensor out = va;
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
  const bool rg = requires_grad(a) || requires_grad(b);
  NodeId id = push("mul", std::move(out), rg, {});
  if (rg)
    nodes_[id].backprop = [a, b, id](Tape& t) {
      const Tensor& g = t.grad_buf(id);
      const Tensor& va2 = t.value(a);
      const Tensor& vb2 = t.value(b);
      if (t.requires_grad(a)) {
        Tensor& ga = t.grad_buf(a);
        for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb2[i];
      }
      if (t.requires_grad(b)) {
        Tensor& gb = t.grad_buf(b);
        for (int64_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va2[i];
      }
    };
  return id;
}

Tape::NodeId Tape::scale(NodeId a, double s) {
  Tensor out = value(a);
  for (int64_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>(out[i] * s);
  const bool rg = requires_grad(a);
  NodeId id = push("scale", std::move(out), rg, {});
  if (rg)
    nodes_[id].backprop = [a, s, id](Tape& t) {
      const Tensor& g = t.grad_buf(id);
      Tensor& ga = t.grad_buf(a);
      for (int64_t i = 0; i < g.size(); ++i)
        ga[i] += static_cast<float>(g[i] * s);
    };
  return id;
}

Tape::NodeId Tape::scale_by(NodeId scalar, NodeId v) {
  if (value(scalar).size() != 1) throw ShapeError("scale_by: first arg must be [1]");
  const float s = value(scalar)[0];
  Tensor out = value(v);
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= s;
  const bool rg = requires_grad(scalar) || requires_grad(v);
  NodeId id = push("scale_by", std::move(out), rg, {});
  if (rg)
    nodes_[id].backprop = [scalar, v, id](Tape& t) {
      const Tensor& g = t.grad_buf(id);
      const float s2 = t.value(scalar)[0];
      const Tensor& vv = t.value(v);
      if (t.requires_grad(scalar)) {
        double acc = 0.0;
        for (int64_t i = 0; i < g.size(); ++i)
          acc += static_cast<double>(g[i]) * vv[i];
        t.grad_buf(scalar)[0] += static_cast<float>(acc);
      }
      if (t.requires_grad(v)) {
        Tensor& gv = t.grad_buf(v);
        for (int64_t i = 0; i < g.size(); ++i) gv[i] += g[i] * s2;
      }
    };
  return id;
}

Tape::NodeId Tape::sum(NodeId a) {
  const Tensor& va = value(a);
  double acc = 0.0;
  for (int64_t i = 0; i < va.size(); ++i) acc += va[i];
  const bool rg = requires_grad(a);
  NodeId id = push("sum", Tensor::scalar(static_cast<float>(acc)), rg, {});
  if (rg)
    nodes_[id].backprop = [a, id](Tape& t) {
      const float g = t.grad_buf(id)[0];
      Tensor& ga = t.grad_buf(a);
      for (int64_t i = 0; i < ga.size(); ++i) ga[i] += g;
    };
  return id;
}

Tape::NodeId Tape::mean(NodeId a) {
  const int64_t n = value(a).size();
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Tape::NodeId Tape::dot(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (!va.same_shape(vb))
    throw ShapeError(fmt::format("dot: {} vs {}", va.shape_str(), vb.shape_str()));
  double acc = 0.0;
  for (int64_t i = 0; i < va.size(); ++i)
    acc += static_cast<double>(va[i]) * vb[i];
  const bool rg = requires_grad(a) || requires_grad(b);
  NodeId id = push("dot", Tensor::scalar(static_cast<float>(acc)), rg, {});
  if (rg)
    nodes_[id].backprop = [a, b, id](Tape& t) {
      const float g = t.grad_buf(id)[0];
      const Tensor& va2 = t.value(a);
      const Tensor& vb2 = t.value(b);
      if (t.requires_grad(a)) {
        Tensor& ga = t.grad_buf(a);
        for (int64_t i = 0; i < ga.size(); ++i) ga[i] += g * vb2[i];
      }
      if (t.requires_grad(b)) {
        Tensor& gb = t.grad_buf(b);
        for (int64_t i = 0; i < gb.size(); ++i) gb[i] += g * va2[i];
      }
    };
  return id;
}

Tape::NodeId Tape::abs(NodeId a) {
  Tensor out = value(a);
  for (int64_t i = 0; i < out.size(); ++i) out[i] = std::fabs(out[i]);
  const bool rg = requires_grad(a);
  NodeId id = push("abs", std::move(out), rg, {});
  if (rg)
    nodes_[id].backprop = [a, id](Tape& t) {
      const Tensor& g = t.grad_buf(id);
      const Tensor& va = t.value(a);
      Tensor& ga = t.grad_buf(a);
      for (int64_t i = 0; i < g.size(); ++i)
        ga[i] += va[i] >= 0.0f ? g[i] : -g[i];
    };
  return id;
}

Tape::NodeId Tape::sqrt(NodeId a, double eps) {
  Tensor out = value(a);
  for (int64_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>(std::sqrt(static_cast<double>(out[i]) + eps));
  const bool rg = requires_grad(a);
  NodeId id = push("sqrt", std::move(out), rg, {});
  if (rg)
    nodes_[id].backprop = [a, id](Tape& t) {
      const Tensor& g = t.grad_buf(id);
      const Tensor& y = t.value(id);
      Tensor& ga = t.grad_buf(a);
      for (int64_t i = 0; i < g.size(); ++i) {
        const double denom = 2.0 * std::max(1e-20, static_cast<double>(y[i]));
        ga[i] += static_cast<float>(g[i] / denom);
      }
    };
  return id;
}

Tape::NodeId Tape::log(NodeId a, double eps) {
  Tensor out = value(a);
  for (int64_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>(std::log(static_cast<double>(out[i]) + eps));
  const bool rg = requires_grad(a);
  NodeId id = push("log", std::move(out), rg, {});
  if (rg)
    nodes_[id].backprop = [a, eps, id](Tape& t) {
      const Tensor& g = t.grad_buf(id);
      const Tensor& va = t.value(a);
      Tensor& ga = t.grad_buf(a);
      for (int64_t i = 0; i < g.size(); ++i)
        ga[i] += static_cast<float>(g[i] / (static_cast<double>(va[i]) + eps));
    };
  return id;
}

Tape::NodeId Tape::clamp(NodeId a, double lo, double hi) {
  const Tensor& va = value(a);
  Tensor out = va;
  for (int64_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>(std::clamp(static_cast<double>(out[i]), lo, hi));
  const bool rg = requires_grad(a);
  NodeId id = push("clamp", std::move(out), rg, {});
  if (rg)
    nodes_[id].backprop = [a, lo, hi, id](Tape& t) {
      const Tensor& g = t.grad_buf(id);
      const Tensor& va2 = t.value(a);
      Tensor& ga = t.grad_buf(a);
      for (int64_t i = 0; i < g.size(); ++i)
        if (va2[i] > lo && va2[i] < hi) ga[i] += g[i];
    };
  return id;
}

Tape::NodeId Tape::gelu(NodeId a) {
  Tensor out = value(a);
  for (int64_t i = 0; i < out.size(); ++i) out[i] = gelu_scalar(out[i]);
  const bool rg = requires_grad(a);
  NodeId id = push("gelu", std::move(out), rg, {});
  if (rg)
    nodes_[id].backprop = [a, id](Tape& t) {
      constexpr double kC = 0.7978845608028654;
      constexpr double kA = 0.044715;
      const Tensor& g = t.grad_buf(id);
      const Tensor& va = t.value(a);
      Tensor& ga = t.grad_buf(a);
      for (int64_t i = 0; i < g.size(); ++i) {
        const double x = va[i];
        const double u = kC * (x + kA * x * x * x);
        const double th = std::tanh(u);
        const double d = 0.5 * (1.0 + th) +
                         0.5 * x * (1.0 - th * th) * kC * (1.0 + 3.0 * kA * x * x);
        ga[i] += static_cast<float>(g[i] * d);
      }
    };
  return id;
}

Tape::NodeId Tape::gather(NodeId a, std::vector<int64_t> indices) {
  const Tensor& va = value(a);
  Tensor out({static_cast<int64_t>(indices.size())});
  for (size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= va.size())
      throw ShapeError("gather: index out of range");
    out[static_cast<int64_t>(i)] = va[indices[i]];
  }
  const bool rg = requires_grad(a);
  NodeId id = push("gather", std::move(out), rg, {});
  if (rg)
    nodes_[id].backprop = [a, idx = std::move(indices), id](Tape& t) {
      const Tensor& g = t.grad_buf(id);
      Tensor& ga = t.grad_buf(a);
      for (size_t i = 0; i < idx.size(); ++i)
        ga[idx[i]] += g[static_cast<int64_t>(i)];
    };
  return id;
}

Tape::NodeId Tape::concat_cols(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  const int64_t rows = value(parts[0]).rows();
  int64_t total_cols = 0;
  bool rg = false;
  for (NodeId p : parts) {
    if (value(p).rows() != rows)
      throw ShapeError("concat_cols: row counts differ");
    total_cols += value(p).cols();
    rg = rg || requires_grad(p);
  }
  auto shape = value(parts[0]).shape();
  shape.back() = total_cols;
  Tensor out(shape);
  int64_t col_off = 0;
  for (NodeId p : parts) {
    const Tensor& vp = value(p);
    for (int64_t r = 0; r < rows; ++r)
      std::copy(vp.row(r).begin(), vp.row(r).end(),
                out.row(r).begin() + col_off);
    col_off += vp.cols();
  }
  NodeId id = push("concat_cols", std::move(out), rg, {});
  if (rg)
    nodes_[id].backprop = [parts, rows, id](Tape& t) {
      const Tensor& g = t.grad_buf(id);
      int64_t off = 0;
      for (NodeId p : parts) {
        const int64_t c = t.value(p).cols();
        if (t.requires_grad(p)) {
          Tensor& gp = t.grad_buf(p);
          for (int64_t r = 0; r < rows; ++r) {
            auto grow = g.row(r);
            auto dst = gp.row(r);
            for (int64_t j = 0; j < c; ++j) dst[j] += grow[off + j];
          }
        }
        off += c;
      }
    };
  return id;
}

Tape::NodeId Tape::stack_rows(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw ShapeError("stack_rows: no parts");
  const int64_t n = value(parts[0]).size();
  bool rg = false;
  for (NodeId p : parts) {
    if (value(p).size() != n) throw ShapeError("stack_rows: sizes differ");
    rg = rg || requires_grad(p);
  }
  Tensor out({static_cast<int64_t>(parts.size()), n});
  for (size_t i = 0; i < parts.size(); ++i)
    std::copy(value(parts[i]).flat().begin(), value(parts[i]).flat().end(),
              out.row(static_cast<int64_t>(i)).begin());
  NodeId id = push("stack_rows", std::move(out), rg, {});
  if (rg)
    nodes_[id].backprop = [parts, n, id](Tape& t) {
      const Tensor& g = t.grad_buf(id);
      for (size_t i = 0; i < parts.size(); ++i) {
        if (!t.requires_grad(parts[i])) continue;
        Tensor& gp = t.grad_buf(parts[i]);
        auto grow = g.row(static_cast<int64_t>(i));
        for (int64_t j = 0; j < n; ++j) gp[j] += grow[j];
      }
    };
  return id;
}

Tape::NodeId Tape::linear(NodeId x, NodeId w, NodeId b) {
  const Tensor& vx = value(x);
  const Tensor& vw = value(w);
  if (vw.rank() != 2 || vx.cols() != vw.dim(1))
    throw ShapeError(fmt::format("linear: input {} vs weight {}",
                                 vx.shape_str(), vw.shape_str()));
  const int64_t m = vx.rows(), in = vw.dim(1), out_f = vw.dim(0);
  auto shape = vx.shape();
  shape.back() = out_f;
  Tensor out(shape);
  {
    MatMap xm(vx.data(), m, in);
    MatMap wm(vw.data(), out_f, in);
    MutMatMap ym(out.data(), m, out_f);
    ym.noalias() = xm * wm.transpose();
    if (b != kNone) {
      const Tensor& vb = value(b);
      if (vb.size() != out_f) throw ShapeError("linear: bias size mismatch");
      MatMap bm(vb.data(), 1, out_f);
      ym.rowwise() += bm.row(0);
    }
  }
  const bool rg = requires_grad(x) || requires_grad(w) ||
                  (b != kNone && requires_grad(b));
  NodeId id = push("linear", std::move(out), rg, {});
  if (rg)
    nodes_[id].backprop = [x, w, b, m, in, out_f, id](Tape& t) {
      const Tensor& g = t.grad_buf(id);
      MatMap gm(g.data(), m, out_f);
      if (t.requires_grad(x)) {
        MatMap wm(t.value(w).data(), out_f, in);
        MutMatMap gx(t.grad_buf(x).data(), m, in);
        gx.noalias() += gm * wm;
      }
      if (t.requires_grad(w)) {
        MatMap xm(t.value(x).data(), m, in);
        MutMatMap gw(t.grad_buf(w).data(), out_f, in);
        gw.noalias() += gm.transpose() * xm;
      }
      if (b != Tape::kNone && t.requires_grad(b)) {
        Tensor& gb = t.grad_buf(b);
        for (int64_t j = 0; j < out_f; ++j) {
          double acc = 0.0;
          for (int64_t r = 0; r < m; ++r) acc += gm(r, j);
          gb[j] += static_cast<float>(acc);
        }
      }
    };
  return id;
}

Tape::NodeId Tape::complex_mask_apply(NodeId mask_ri, const Tensor& mix_ri) {
  const Tensor& vm = value(mask_ri);
  if (!vm.same_shape(mix_ri) || vm.cols() % 2 != 0)
    throw ShapeError("complex_mask_apply: mask/mix layout mismatch");
  Tensor out(vm.shape());
  for (int64_t i = 0; i < vm.size(); i += 2) {
    const float mr = vm[i], mi = vm[i + 1];
    const float xr = mix_ri[i], xi = mix_ri[i + 1];
    out[i] = mr * xr - mi * xi;
    out[i + 1] = mr * xi + mi * xr;
  }
  const bool rg = requires_grad(mask_ri);
  NodeId id = push("complex_mask_apply", std::move(out), rg, {});
  if (rg)
    nodes_[id].backprop = [mask_ri, mix = mix_ri, id](Tape& t) {
      const Tensor& g = t.grad_buf(id);
      Tensor& gm = t.grad_buf(mask_ri);
      for (int64_t i = 0; i < g.size(); i += 2) {
        const float xr = mix[i], xi = mix[i + 1];
        gm[i] += g[i] * xr + g[i + 1] * xi;
        gm[i + 1] += -g[i] * xi + g[i + 1] * xr;
      }
    };
  return id;
}

namespace {

// Adjoint of the half-spectrum real FFT: x_grad = N * irfft(G with interior
// bins halved); imaginary parts of DC/Nyquist never contribute.
void rfft_transpose(const std::vector<std::complex<double>>& g, double* out, int n) {
  std::vector<std::complex<double>> h(g);
  const int bins = n / 2 + 1;
  h[0] = std::complex<double>(g[0].real(), 0.0);
  h[bins - 1] = std::complex<double>(g[bins - 1].real(), 0.0);
  for (int k = 1; k < bins - 1; ++k) h[k] *= 0.5;
  dsp::irfft(h.data(), out, n);
  for (int i = 0; i < n; ++i) out[i] *= n;
}

// Adjoint of the normalized inverse real FFT: G_k = (c_k / N) * rfft(g)_k
// with c = 1 at DC/Nyquist and 2 inside; imag of DC/Nyquist gets zero.
void irfft_transpose(const double* g, std::vector<std::complex<double>>& out, int n) {
  const int bins = n / 2 + 1;
  out.resize(bins);
  dsp::rfft(g, out.data(), n);
  const double inv_n = 1.0 / n;
  out[0] = std::complex<double>(out[0].real() * inv_n, 0.0);
  out[bins - 1] = std::complex<double>(out[bins - 1].real() * inv_n, 0.0);
  for (int k = 1; k < bins - 1; ++k) out[k] *= 2.0 * inv_n;
}

}  // namespace

Tape::NodeId Tape::stft_ri(NodeId wave, const dsp::StftConfig& cfg) {
  cfg.validate();
  const Tensor& vx = value(wave);
  if (vx.rank() != 1) throw ShapeError("stft_ri: expected [n] waveform");
  const int64_t n = vx.size();
  const int64_t frames = cfg.frames_for(n);
  const int bins = cfg.bins();
  const auto w = dsp::make_window(cfg.window, cfg.n_fft);
  const int pad = cfg.center ? cfg.n_fft / 2 : 0;

  std::vector<double> padded =
      cfg.center ? dsp::reflect_pad(vx.flat(), pad)
                 : std::vector<double>(vx.flat().begin(), vx.flat().end());
  Tensor out({frames, 2 * bins});
  std::vector<double> frame(cfg.n_fft);
  std::vector<std::complex<double>> spec(bins);
  for (int64_t t = 0; t < frames; ++t) {
    const double* src = padded.data() + t * cfg.hop;
    for (int i = 0; i < cfg.n_fft; ++i) frame[i] = src[i] * w[i];
    dsp::rfft(frame.data(), spec.data(), cfg.n_fft);
    auto row = out.row(t);
    for (int k = 0; k < bins; ++k) {
      row[2 * k] = static_cast<float>(spec[k].real());
      row[2 * k + 1] = static_cast<float>(spec[k].imag());
    }
  }
  const bool rg = requires_grad(wave);
  NodeId id = push("stft", std::move(out), rg, {});
  if (rg)
    nodes_[id].backprop = [wave, cfg, n, frames, bins, w, pad, id](Tape& t) {
      const Tensor& g = t.grad_buf(id);
      const int64_t padded_len = n + 2 * pad;
      std::vector<double> gp(padded_len, 0.0);
      std::vector<std::complex<double>> gspec(bins);
      std::vector<double> gframe(cfg.n_fft);
      for (int64_t f = 0; f < frames; ++f) {
        auto row = g.row(f);
        for (int k = 0; k < bins; ++k)
          gspec[k] = std::complex<double>(row[2 * k], row[2 * k + 1]);
        rfft_transpose(gspec, gframe.data(), cfg.n_fft);
        double* dst = gp.data() + f * cfg.hop;
        for (int i = 0; i < cfg.n_fft; ++i) dst[i] += gframe[i] * w[i];
      }
      // fold the reflect padding back onto the interior
      Tensor& gx = t.grad_buf(wave);
      for (int64_t i = 0; i < n; ++i) gx[i] += static_cast<float>(gp[pad + i]);
      for (int64_t i = 1; i <= pad; ++i) {
        gx[i] += static_cast<float>(gp[pad - i]);
        gx[n - 1 - i] += static_cast<float>(gp[pad + n - 1 + i]);
      }
    };
  return id;
}

Tape::NodeId Tape::istft_ri(NodeId spec_ri, const dsp::StftConfig& cfg,
                            int64_t num_samples) {
  cfg.validate();
  const Tensor& vs = value(spec_ri);
  const int bins = cfg.bins();
  if (vs.rank() != 2 || vs.cols() != 2 * bins)
    throw ShapeError(fmt::format("istft_ri: expected [frames x {}], got {}",
                                 2 * bins, vs.shape_str()));
  const int64_t frames = vs.dim(0);
  const auto w = dsp::make_window(cfg.window, cfg.n_fft);
  const int64_t offset = cfg.center ? cfg.n_fft / 2 : 0;
  const int64_t padded_len =
      std::max((frames - 1) * cfg.hop + cfg.n_fft, offset + num_samples);

  // overlap-added squared window; constant w.r.t. the input
  std::vector<double> norm(padded_len, 0.0);
  for (int64_t t = 0; t < frames; ++t)
    for (int i = 0; i < cfg.n_fft; ++i)
      norm[t * cfg.hop + i] += w[i] * w[i];

  std::vector<double> acc(padded_len, 0.0);
  std::vector<std::complex<double>> spec(bins);
  std::vector<double> frame(cfg.n_fft);
  for (int64_t t = 0; t < frames; ++t) {
    auto row = vs.row(t);
    for (int k = 0; k < bins; ++k)
      spec[k] = std::complex<double>(row[2 * k], row[2 * k + 1]);
    dsp::irfft(spec.data(), frame.data(), cfg.n_fft);
    double* dst = acc.data() + t * cfg.hop;
    for (int i = 0; i < cfg.n_fft; ++i) dst[i] += frame[i] * w[i];
  }
  Tensor out({num_samples});
  for (int64_t i = 0; i < num_samples; ++i) {
    const double d = norm[offset + i];
    out[i] = static_cast<float>(d > 1e-11 ? acc[offset + i] / d : 0.0);
  }
  const bool rg = requires_grad(spec_ri);
  NodeId id = push("istft", std::move(out), rg, {});
  if (rg)
    nodes_[id].backprop = [spec_ri, cfg, num_samples, frames, bins, w, offset,
                           padded_len, norm, id](Tape& t) {
      const Tensor& g = t.grad_buf(id);
      std::vector<double> gp(padded_len, 0.0);
      for (int64_t i = 0; i < num_samples; ++i) {
        const double d = norm[offset + i];
        if (d > 1e-11) gp[offset + i] = static_cast<double>(g[i]) / d;
      }
      Tensor& gs = t.grad_buf(spec_ri);
      std::vector<double> gframe(cfg.n_fft);
      std::vector<std::complex<double>> gspec;
      for (int64_t f = 0; f < frames; ++f) {
        const double* src = gp.data() + f * cfg.hop;
        for (int i = 0; i < cfg.n_fft; ++i) gframe[i] = src[i] * w[i];
        irfft_transpose(gframe.data(), gspec, cfg.n_fft);
        auto row = gs.row(f);
        for (int k = 0; k < bins; ++k) {
          row[2 * k] += static_cast<float>(gspec[k].real());
          row[2 * k + 1] += static_cast<float>(gspec[k].imag());
        }
      }
    };
  return id;
}

Tape::NodeId Tape::magnitude(NodeId spec_ri) {
  const Tensor& vs = value(spec_ri);
  if (vs.cols() % 2 != 0) throw ShapeError("magnitude: odd interleaved width");
  auto shape = vs.shape();
  shape.back() /= 2;
  Tensor out(shape);
  for (int64_t i = 0; i < out.size(); ++i) {
    const double re = vs[2 * i], im = vs[2 * i + 1];
    out[i] = static_cast<float>(std::sqrt(re * re + im * im));
  }
  const bool rg = requires_grad(spec_ri);
  NodeId id = push("magnitude", std::move(out), rg, {});
  if (rg)
    nodes_[id].backprop = [spec_ri, id](Tape& t) {
      const Tensor& g = t.grad_buf(id);
      const Tensor& vs2 = t.value(spec_ri);
      const Tensor& m = t.value(id);
      Tensor& gs = t.grad_buf(spec_ri);
      for (int64_t i = 0; i < g.size(); ++i) {
        const double denom = std::max(1e-12, static_cast<double>(m[i]));
        gs[2 * i] += static_cast<float>(g[i] * vs2[2 * i] / denom);
        gs[2 * i + 1] += static_cast<float>(g[i] * vs2[2 * i + 1] / denom);
      }
    };
  return id;
}

void Tape::backward(NodeId loss) {
  if (value(loss).size() != 1)
    throw ShapeError("backward: loss must be scalar");
  if (!nodes_[loss].requires_grad)
    throw NumericError("backward: loss does not depend on any trainable parameter");
  grad_buf(loss)[0] = 1.0f;
  for (NodeId id = loss; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.requires_grad && n.grad_alloc && n.backprop) n.backprop(*this);
  }
}

std::map<std::string, Tensor> Tape::gradients(
    const std::map<std::string, NodeId>& params) const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, id] : params) {
    const Node& n = nodes_[id];
    if (!n.requires_grad) continue;  // frozen parameters receive no gradient
    out[name] = n.grad_alloc ? n.grad : Tensor::zeros(n.value.shape());
  }
  return out;
}

}  // namespace msr::nn

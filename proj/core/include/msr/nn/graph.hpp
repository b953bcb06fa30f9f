#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "msr/common.hpp"
#include "msr/dsp/stft.hpp"
#include "msr/nn/tensor.hpp"

namespace msr::nn {

struct UnsupportedOperationError : Error {
  using Error::Error;
};

// Reverse-mode tape over float32 tensors. Deliberately covers only the ops on
// the head-training path (linear layers, elementwise math, complex-mask
// application, STFT/iSTFT, magnitudes, reductions); anything else throws
// UnsupportedOperationError. Reductions and transform adjoints accumulate in
// double so analytic gradients hold up against finite differences.
//
// Complex data travels as interleaved (re, im) pairs along the last axis:
// a spectrogram channel is [frames x 2*bins].
class Tape {
 public:
  using NodeId = int;

  NodeId constant(Tensor value);               // never receives gradient
  NodeId param(Tensor value, bool trainable);  // leaf; gradient iff trainable

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);  // elementwise
  NodeId scale(NodeId a, double s);
  NodeId scale_by(NodeId scalar, NodeId v);  // scalar node ([1]) times tensor
  NodeId sum(NodeId a);                      // -> [1]
  NodeId mean(NodeId a);                     // -> [1]
  NodeId dot(NodeId a, NodeId b);            // -> [1]
  NodeId abs(NodeId a);
  NodeId sqrt(NodeId a, double eps = 0.0);   // sqrt(x + eps)
  NodeId log(NodeId a, double eps = 0.0);    // ln(x + eps)
  NodeId clamp(NodeId a, double lo, double hi);  // zero gradient outside range
  NodeId gelu(NodeId a);
  NodeId gather(NodeId a, std::vector<int64_t> indices);       // flat indices
  NodeId concat_cols(const std::vector<NodeId>& parts);        // along last dim
  NodeId stack_rows(const std::vector<NodeId>& parts);         // [k x n] from k [n]

  // y = x . W^T (+ b); x [.. x in], w [out x in], b [out] or kNone
  static constexpr NodeId kNone = -1;
  NodeId linear(NodeId x, NodeId w, NodeId b);

  // (re,im) interleaved elementwise complex product with a constant spectrum.
  NodeId complex_mask_apply(NodeId mask_ri, const Tensor& mix_ri);

  // Single-channel transforms; wave is [n], spectra are [frames x 2*bins].
  NodeId stft_ri(NodeId wave, const dsp::StftConfig& cfg);
  NodeId istft_ri(NodeId spec_ri, const dsp::StftConfig& cfg, int64_t num_samples);

  // |.| of an interleaved spectrum: [rows x 2*bins] -> [rows x bins]
  NodeId magnitude(NodeId spec_ri);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  float scalar_value(NodeId id) const;
  const Tensor& grad(NodeId id) const;
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  size_t num_nodes() const { return nodes_.size(); }

  // Backpropagates from a scalar node. Gradients land on every trainable
  // leaf reachable from it; constants and frozen params receive none.
  void backward(NodeId loss);

  // Gradients for a named parameter map (the public backward() surface).
  std::map<std::string, Tensor> gradients(
      const std::map<std::string, NodeId>& params) const;

  static bool op_supported(std::string_view name);
  static void check_op_supported(std::string_view name);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_alloc = false;
    std::function<void(Tape&)> backprop;  // empty for leaves/constants
  };

  NodeId push(std::string_view op, Tensor value, bool requires_grad,
              std::function<void(Tape&)> backprop);
  Tensor& grad_buf(NodeId id);

  std::vector<Node> nodes_;
};

}  // namespace msr::nn

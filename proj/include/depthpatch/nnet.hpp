#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "depthpatch/core.hpp"

namespace depthpatch {
namespace nnet {

// Planar CHW tensor.
struct Tensor3 {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor3() = default;
  Tensor3(int c_, int h_, int w_, double fill = 0.0)
      : c(c_), h(h_), w(w_), v(size_t(c_) * h_ * w_, fill) {}

  double& at(int ch, int i, int j) { return v[(size_t(ch) * h + i) * w + j]; }
  double at(int ch, int i, int j) const { return v[(size_t(ch) * h + i) * w + j]; }
  bool same_dims(const Tensor3& o) const { return c == o.c && h == o.h && w == o.w; }
};

Tensor3 image_to_tensor(const ImageRGB& img);
ImageRGB tensor_to_image(const Tensor3& t);

// Stride-1 convolution with zero padding. Weights are frozen after
// construction; only the input-gradient path is needed.
struct ConvLayer {
  int in_c = 0, out_c = 0, k = 3, pad = 1;
  std::vector<double> weight;  // [out][in][k][k]
  std::vector<double> bias;    // [out]

  Tensor3 forward(const Tensor3& in) const;
  Tensor3 input_vjp(const Tensor3& in, const Tensor3& grad_out) const;
};

ConvLayer random_conv(int in_c, int out_c, int k, int pad, Rng& rng, double weight_scale);

enum class LayerKind { conv, relu, tanh_act, maxpool2 };

struct Layer {
  LayerKind kind = LayerKind::conv;
  ConvLayer conv;
};

// Plain sequential stack with taps. The trace keeps every activation so
// vector-Jacobian products can be injected at arbitrary depths.
struct SequentialNet {
  std::vector<Layer> layers;

  struct Trace {
    std::vector<Tensor3> acts;  // acts[0] = input, acts[i+1] = output of layer i
  };

  Tensor3 forward(const Tensor3& in, Trace* trace = nullptr) const;

  // upstream: (activation index, gradient) pairs; returns the gradient w.r.t.
  // the input tensor.
  Tensor3 backward(const Trace& trace,
                   const std::vector<std::pair<int, Tensor3>>& upstream) const;
};

}  // namespace nnet
}  // namespace depthpatch

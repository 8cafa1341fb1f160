#include "depthpatch/nnet.hpp"

#include <cmath>

namespace depthpatch {
namespace nnet {

Tensor3 image_to_tensor(const ImageRGB& img) {
  Tensor3 t(3, img.h, img.w);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < img.h; ++i)
      for (int j = 0; j < img.w; ++j) t.at(c, i, j) = img.at(i, j, c);
  return t;
}

ImageRGB tensor_to_image(const Tensor3& t) {
  if (t.c != 3) fail(Errc::dimension_mismatch, "tensor_to_image requires 3 channels");
  ImageRGB img(t.h, t.w);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < t.h; ++i)
      for (int j = 0; j < t.w; ++j) img.at(i, j, c) = t.at(c, i, j);
  return img;
}

Tensor3 ConvLayer::forward(const Tensor3& in) const {
  if (in.c != in_c) fail(Errc::dimension_mismatch, "conv forward: channel mismatch");
  const int oh = in.h + 2 * pad - k + 1;
  const int ow = in.w + 2 * pad - k + 1;
  if (oh < 1 || ow < 1) fail(Errc::dimension_mismatch, "conv forward: input too small");
  Tensor3 out(out_c, oh, ow);
  for (int co = 0; co < out_c; ++co) {
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        double acc = bias[co];
        for (int ci = 0; ci < in_c; ++ci) {
          for (int ky = 0; ky < k; ++ky) {
            const int y = i + ky - pad;
            if (y < 0 || y >= in.h) continue;
            const double* wrow = &weight[((size_t(co) * in_c + ci) * k + ky) * k];
            for (int kx = 0; kx < k; ++kx) {
              const int x = j + kx - pad;
              if (x < 0 || x >= in.w) continue;
              acc += wrow[kx] * in.at(ci, y, x);
            }
          }
        }
        out.at(co, i, j) = acc;
      }
    }
  }
  return out;
}

Tensor3 ConvLayer::input_vjp(const Tensor3& in, const Tensor3& grad_out) const {
  Tensor3 grad_in(in.c, in.h, in.w);
  const int oh = grad_out.h, ow = grad_out.w;
  for (int co = 0; co < out_c; ++co) {
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        const double g = grad_out.at(co, i, j);
        if (g == 0.0) continue;
        for (int ci = 0; ci < in_c; ++ci) {
          for (int ky = 0; ky < k; ++ky) {
            const int y = i + ky - pad;
            if (y < 0 || y >= in.h) continue;
            const double* wrow = &weight[((size_t(co) * in_c + ci) * k + ky) * k];
            for (int kx = 0; kx < k; ++kx) {
              const int x = j + kx - pad;
              if (x < 0 || x >= in.w) continue;
              grad_in.at(ci, y, x) += wrow[kx] * g;
            }
          }
        }
      }
    }
  }
  return grad_in;
}

ConvLayer random_conv(int in_c, int out_c, int k, int pad, Rng& rng, double weight_scale) {
  ConvLayer layer;
  layer.in_c = in_c;
  layer.out_c = out_c;
  layer.k = k;
  layer.pad = pad;
  layer.weight.resize(size_t(out_c) * in_c * k * k);
  layer.bias.assign(out_c, 0.0);
  const double sigma = weight_scale / std::sqrt(double(in_c) * k * k);
  for (double& w : layer.weight) w = rng.normal(0.0, sigma);
  return layer;
}

namespace {

Tensor3 maxpool2_forward(const Tensor3& in) {
  Tensor3 out(in.c, in.h / 2, in.w / 2);
  for (int c = 0; c < in.c; ++c)
    for (int i = 0; i < out.h; ++i)
      for (int j = 0; j < out.w; ++j) {
        double m = in.at(c, 2 * i, 2 * j);
        m = std::max(m, in.at(c, 2 * i, 2 * j + 1));
        m = std::max(m, in.at(c, 2 * i + 1, 2 * j));
        m = std::max(m, in.at(c, 2 * i + 1, 2 * j + 1));
        out.at(c, i, j) = m;
      }
  return out;
}

Tensor3 maxpool2_vjp(const Tensor3& in, const Tensor3& out, const Tensor3& grad_out) {
  Tensor3 grad_in(in.c, in.h, in.w);
  for (int c = 0; c < in.c; ++c)
    for (int i = 0; i < out.h; ++i)
      for (int j = 0; j < out.w; ++j) {
        const double m = out.at(c, i, j);
        const double g = grad_out.at(c, i, j);
        // route to the first matching maximum, fixed scan order
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            if (in.at(c, 2 * i + dy, 2 * j + dx) == m) {
              grad_in.at(c, 2 * i + dy, 2 * j + dx) += g;
              dy = 2;
              break;
            }
          }
        }
      }
  return grad_in;
}

}  // namespace

Tensor3 SequentialNet::forward(const Tensor3& in, Trace* trace) const {
  Tensor3 cur = in;
  if (trace) {
    trace->acts.clear();
    trace->acts.push_back(cur);
  }
  for (const Layer& layer : layers) {
    switch (layer.kind) {
      case LayerKind::conv:
        cur = layer.conv.forward(cur);
        break;
      case LayerKind::relu:
        for (double& x : cur.v) x = x > 0.0 ? x : 0.0;
        break;
      case LayerKind::tanh_act:
        for (double& x : cur.v) x = std::tanh(x);
        break;
      case LayerKind::maxpool2:
        cur = maxpool2_forward(cur);
        break;
    }
    if (trace) trace->acts.push_back(cur);
  }
  return cur;
}

Tensor3 SequentialNet::backward(const Trace& trace,
                                const std::vector<std::pair<int, Tensor3>>& upstream) const {
  if (trace.acts.size() != layers.size() + 1)
    fail(Errc::runtime_failure, "backward called with a stale trace");

  auto add_upstream = [&](int act_index, Tensor3& g) {
    for (const auto& [idx, grad] : upstream) {
      if (idx != act_index) continue;
      if (!grad.same_dims(g)) fail(Errc::dimension_mismatch, "upstream gradient dims mismatch");
      for (size_t i = 0; i < g.v.size(); ++i) g.v[i] += grad.v[i];
    }
  };

  const int n = int(layers.size());
  Tensor3 g(trace.acts[n].c, trace.acts[n].h, trace.acts[n].w);
  add_upstream(n, g);

  for (int li = n - 1; li >= 0; --li) {
    const Tensor3& in = trace.acts[li];
    const Tensor3& out = trace.acts[li + 1];
    const Layer& layer = layers[li];
    Tensor3 gi;
    switch (layer.kind) {
      case LayerKind::conv:
        gi = layer.conv.input_vjp(in, g);
        break;
      case LayerKind::relu:
        gi = g;
        for (size_t i = 0; i < gi.v.size(); ++i)
          if (out.v[i] <= 0.0) gi.v[i] = 0.0;
        break;
      case LayerKind::tanh_act:
        gi = g;
        for (size_t i = 0; i < gi.v.size(); ++i) gi.v[i] *= 1.0 - out.v[i] * out.v[i];
        break;
      case LayerKind::maxpool2:
        gi = maxpool2_vjp(in, out, g);
        break;
    }
    g = std::move(gi);
    add_upstream(li, g);
  }
  return g;
}

}  // namespace nnet
}  // namespace depthpatch

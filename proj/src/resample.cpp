#include "depthpatch/resample.hpp"

#include <algorithm>
#include <cmath>

namespace depthpatch {
namespace {

struct Tap {
  int i0, i1;
  double w1;  // weight of i1; i0 gets (1 - w1)
};

Tap tap_for(int out_idx, int out_n, int in_n) {
  const double scale = double(in_n) / double(out_n);
  double src = (out_idx + 0.5) * scale - 0.5;
  src = std::clamp(src, 0.0, double(in_n - 1));
  Tap t;
  t.i0 = int(std::floor(src));
  t.i1 = std::min(t.i0 + 1, in_n - 1);
  t.w1 = src - t.i0;
  return t;
}

}  // namespace

ImageRGB resize_bilinear(const ImageRGB& src, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) fail(Errc::invalid_argument, "resize to empty image");
  ImageRGB out(out_h, out_w);
  for (int i = 0; i < out_h; ++i) {
    const Tap ty = tap_for(i, out_h, src.h);
    for (int j = 0; j < out_w; ++j) {
      const Tap tx = tap_for(j, out_w, src.w);
      for (int c = 0; c < 3; ++c) {
        out.at(i, j, c) = (1 - ty.w1) * ((1 - tx.w1) * src.at(ty.i0, tx.i0, c) +
                                         tx.w1 * src.at(ty.i0, tx.i1, c)) +
                          ty.w1 * ((1 - tx.w1) * src.at(ty.i1, tx.i0, c) +
                                   tx.w1 * src.at(ty.i1, tx.i1, c));
      }
    }
  }
  return out;
}

Grid resize_bilinear(const Grid& src, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) fail(Errc::invalid_argument, "resize to empty grid");
  Grid out(out_h, out_w);
  for (int i = 0; i < out_h; ++i) {
    const Tap ty = tap_for(i, out_h, src.h);
    for (int j = 0; j < out_w; ++j) {
      const Tap tx = tap_for(j, out_w, src.w);
      out.at(i, j) = (1 - ty.w1) * ((1 - tx.w1) * src.at(ty.i0, tx.i0) +
                                    tx.w1 * src.at(ty.i0, tx.i1)) +
                     ty.w1 * ((1 - tx.w1) * src.at(ty.i1, tx.i0) +
                              tx.w1 * src.at(ty.i1, tx.i1));
    }
  }
  return out;
}

ImageRGB resize_bilinear_vjp(const ImageRGB& grad_out, int in_h, int in_w) {
  ImageRGB grad_in(in_h, in_w);
  for (int i = 0; i < grad_out.h; ++i) {
    const Tap ty = tap_for(i, grad_out.h, in_h);
    for (int j = 0; j < grad_out.w; ++j) {
      const Tap tx = tap_for(j, grad_out.w, in_w);
      for (int c = 0; c < 3; ++c) {
        const double g = grad_out.at(i, j, c);
        grad_in.at(ty.i0, tx.i0, c) += (1 - ty.w1) * (1 - tx.w1) * g;
        grad_in.at(ty.i0, tx.i1, c) += (1 - ty.w1) * tx.w1 * g;
        grad_in.at(ty.i1, tx.i0, c) += ty.w1 * (1 - tx.w1) * g;
        grad_in.at(ty.i1, tx.i1, c) += ty.w1 * tx.w1 * g;
      }
    }
  }
  return grad_in;
}

Grid resize_bilinear_vjp(const Grid& grad_out, int in_h, int in_w) {
  Grid grad_in(in_h, in_w);
  for (int i = 0; i < grad_out.h; ++i) {
    const Tap ty = tap_for(i, grad_out.h, in_h);
    for (int j = 0; j < grad_out.w; ++j) {
      const Tap tx = tap_for(j, grad_out.w, in_w);
      const double g = grad_out.at(i, j);
      grad_in.at(ty.i0, tx.i0) += (1 - ty.w1) * (1 - tx.w1) * g;
      grad_in.at(ty.i0, tx.i1) += (1 - ty.w1) * tx.w1 * g;
      grad_in.at(ty.i1, tx.i0) += ty.w1 * (1 - tx.w1) * g;
      grad_in.at(ty.i1, tx.i1) += ty.w1 * tx.w1 * g;
    }
  }
  return grad_in;
}

}  // namespace depthpatch

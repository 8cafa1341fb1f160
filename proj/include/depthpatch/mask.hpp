#pragma once

#include <array>
#include <vector>

#include "depthpatch/core.hpp"

namespace depthpatch {

// Four region borders in real-valued pixel coordinates. l/r are column
// coordinates in [0,w], t/b are row coordinates in [0,h]. Validity
// (0 <= l <= r <= w, 0 <= t <= b <= h) is maintained by project_params after
// every optimizer update, not by construction.
struct RegionParams {
  double l = 0.0;
  double r = 0.0;
  double t = 0.0;
  double b = 0.0;

  static RegionParams full_frame(int w, int h) { return {0.0, double(w), 0.0, double(h)}; }
  double rect_area() const { return (r - l) * (b - t); }
};

// Edge index convention used throughout: 0=l, 1=r, 2=t, 3=b.
using EdgeGrad = std::array<double, 4>;

// Differentiable tanh relaxation of the rectangular indicator. values is an
// h x w grid; every entry lies in [0,1] and is smooth in the four borders.
struct SoftMask {
  Grid values;
  RegionParams params;
  double k = 1.0;
};

// Binary reference mask: 1 iff the pixel is inside all four borders under the
// sign() definition (sign(x)=+1 for x>=0, -1 otherwise). Serves as the oracle
// the soft mask converges to for large k.
BinaryMask hard_mask(const RegionParams& theta, int w, int h);

SoftMask soft_mask(const RegionParams& theta, int w, int h, double k);

// Accumulates upstream gradients on the mask values into gradients on the
// four border parameters.
EdgeGrad soft_mask_vjp(const SoftMask& mask, const Grid& upstream);

// Area penalty: sum_i (r_i - l_i + b_i - t_i) / (w + h). The linear form gives
// every edge the same gradient magnitude 1/(w+h).
double mask_loss(const std::vector<RegionParams>& thetas, int w, int h);
std::vector<EdgeGrad> mask_loss_grad(const std::vector<RegionParams>& thetas, int w, int h);

// Scales a binary shape mask into the rectangle of `soft` (nearest-neighbor)
// and multiplies it in; pixels outside the rectangle keep the region-mask
// value. Shape scaling is treated as locally constant w.r.t. the borders.
SoftMask compose_shape(const SoftMask& soft, const BinaryMask& shape);

// clamp(sum_i m_i, 0, 1) with the pre-clamp sum retained for the backward pass.
struct UnionResult {
  Grid values;
  Grid sum;
};
UnionResult union_masks(const std::vector<Grid>& masks);

// Rectangle area relative to the object pixel count; the mask-update stopping
// criterion. Multiple regions contribute the sum of their rectangle areas.
double region_ratio(const RegionParams& theta, const BinaryMask& obj_mask);
double region_ratio(const std::vector<RegionParams>& thetas, const BinaryMask& obj_mask);

// Clamps each coordinate into its frame interval; inverted pairs collapse to
// their midpoint.
RegionParams project_params(const RegionParams& raw, int w, int h);

// Full patch-mask assembly used by the composition pipeline: per-region soft
// masks, optional shape composition, multi-region union.
struct PatchMaskCtx {
  std::vector<SoftMask> raw;          // tanh masks before shape composition
  std::vector<Grid> shape_scale;      // per-pixel multiplier applied to each raw mask
  Grid sum;                           // pre-clamp union sum
  Grid values;                        // final mask fed into the patch composition
};

PatchMaskCtx build_patch_mask(const std::vector<RegionParams>& thetas, int w, int h, double k,
                              const BinaryMask* shape);
std::vector<EdgeGrad> patch_mask_vjp(const PatchMaskCtx& ctx, const Grid& upstream);

}  // namespace depthpatch

#include "depthpatch/mask.hpp"

#include <algorithm>
#include <cmath>

namespace depthpatch {
namespace {

inline double sign_ge(double x) { return x >= 0.0 ? 1.0 : -1.0; }

struct RegionBox {
  int i0, i1, j0, j1;  // half-open pixel box [i0,i1) x [j0,j1)
  bool valid;
};

RegionBox region_pixel_box(const RegionParams& p, int w, int h) {
  RegionBox box;
  box.i0 = std::clamp(int(std::lround(p.t)), 0, h);
  box.i1 = std::clamp(int(std::lround(p.b)), 0, h);
  box.j0 = std::clamp(int(std::lround(p.l)), 0, w);
  box.j1 = std::clamp(int(std::lround(p.r)), 0, w);
  box.valid = box.i1 > box.i0 && box.j1 > box.j0;
  return box;
}

}  // namespace

BinaryMask hard_mask(const RegionParams& theta, int w, int h) {
  BinaryMask m(h, w);
  for (int i = 0; i < h; ++i) {
    const double row = 0.25 * (-sign_ge(i - theta.t) * sign_ge(i - theta.b) + 1.0);
    for (int j = 0; j < w; ++j) {
      const double col = -sign_ge(j - theta.l) * sign_ge(j - theta.r) + 1.0;
      m.at(i, j) = (row * col >= 1.0) ? 1 : 0;
    }
  }
  return m;
}

SoftMask soft_mask(const RegionParams& theta, int w, int h, double k) {
  if (k <= 0.0) fail(Errc::invalid_argument, "soft_mask steepness k must be positive");
  SoftMask m;
  m.params = theta;
  m.k = k;
  m.values = Grid(h, w);
  std::vector<double> row_factor(h), col_factor(w);
  for (int i = 0; i < h; ++i)
    row_factor[i] = 1.0 - std::tanh(k * (i - theta.t)) * std::tanh(k * (i - theta.b));
  for (int j = 0; j < w; ++j)
    col_factor[j] = 1.0 - std::tanh(k * (j - theta.l)) * std::tanh(k * (j - theta.r));
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) m.values.at(i, j) = 0.25 * row_factor[i] * col_factor[j];
  return m;
}

EdgeGrad soft_mask_vjp(const SoftMask& mask, const Grid& upstream) {
  const int h = mask.values.h, w = mask.values.w;
  if (upstream.h != h || upstream.w != w)
    fail(Errc::dimension_mismatch, "soft_mask_vjp: upstream dims mismatch");
  const double k = mask.k;
  const RegionParams& p = mask.params;

  // The mask is separable: v[i,j] = 1/4 * A(i) * B(j). Reduce the upstream
  // grid against each factor once, then contract with the factor derivatives.
  std::vector<double> a(h), b_(w), da_dt(h), da_db(h), db_dl(w), db_dr(w);
  for (int i = 0; i < h; ++i) {
    const double tt = std::tanh(k * (i - p.t));
    const double tb = std::tanh(k * (i - p.b));
    a[i] = 1.0 - tt * tb;
    da_dt[i] = k * (1.0 - tt * tt) * tb;
    da_db[i] = k * (1.0 - tb * tb) * tt;
  }
  for (int j = 0; j < w; ++j) {
    const double tl = std::tanh(k * (j - p.l));
    const double tr = std::tanh(k * (j - p.r));
    b_[j] = 1.0 - tl * tr;
    db_dl[j] = k * (1.0 - tl * tl) * tr;
    db_dr[j] = k * (1.0 - tr * tr) * tl;
  }

  std::vector<double> row_gb(h, 0.0);  // sum_j g[i,j] * B(j)
  std::vector<double> col_ga(w, 0.0);  // sum_i g[i,j] * A(i)
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const double g = upstream.at(i, j);
      row_gb[i] += g * b_[j];
      col_ga[j] += g * a[i];
    }

  EdgeGrad grad{0.0, 0.0, 0.0, 0.0};
  for (int j = 0; j < w; ++j) {
    grad[0] += 0.25 * col_ga[j] * db_dl[j];
    grad[1] += 0.25 * col_ga[j] * db_dr[j];
  }
  for (int i = 0; i < h; ++i) {
    grad[2] += 0.25 * row_gb[i] * da_dt[i];
    grad[3] += 0.25 * row_gb[i] * da_db[i];
  }
  return grad;
}

double mask_loss(const std::vector<RegionParams>& thetas, int w, int h) {
  double loss = 0.0;
  for (const auto& p : thetas) loss += (p.r - p.l + p.b - p.t) / double(w + h);
  return loss;
}

std::vector<EdgeGrad> mask_loss_grad(const std::vector<RegionParams>& thetas, int w, int h) {
  const double g = 1.0 / double(w + h);
  return std::vector<EdgeGrad>(thetas.size(), EdgeGrad{-g, g, -g, g});
}

SoftMask compose_shape(const SoftMask& soft, const BinaryMask& shape) {
  const RegionBox box = region_pixel_box(soft.params, soft.values.w, soft.values.h);
  if (!box.valid) fail(Errc::degenerate_region, "compose_shape: region smaller than one pixel");
  if (shape.h < 1 || shape.w < 1) fail(Errc::invalid_argument, "compose_shape: empty shape mask");

  SoftMask out = soft;
  const int rh = box.i1 - box.i0, rw = box.j1 - box.j0;
  for (int i = box.i0; i < box.i1; ++i) {
    const int si = std::min(shape.h - 1, int((i - box.i0 + 0.5) * shape.h / rh));
    for (int j = box.j0; j < box.j1; ++j) {
      const int sj = std::min(shape.w - 1, int((j - box.j0 + 0.5) * shape.w / rw));
      out.values.at(i, j) *= double(shape.at(si, sj));
    }
  }
  return out;
}

UnionResult union_masks(const std::vector<Grid>& masks) {
  if (masks.empty()) fail(Errc::invalid_argument, "union_masks: empty list");
  const int h = masks[0].h, w = masks[0].w;
  for (const auto& m : masks)
    if (m.h != h || m.w != w) fail(Errc::dimension_mismatch, "union_masks: dims mismatch");

  UnionResult out;
  out.sum = Grid(h, w);
  out.values = Grid(h, w);
  for (const auto& m : masks)
    for (size_t idx = 0; idx < m.v.size(); ++idx) out.sum.v[idx] += m.v[idx];
  for (size_t idx = 0; idx < out.sum.v.size(); ++idx)
    out.values.v[idx] = std::clamp(out.sum.v[idx], 0.0, 1.0);
  return out;
}

double region_ratio(const RegionParams& theta, const BinaryMask& obj_mask) {
  return region_ratio(std::vector<RegionParams>{theta}, obj_mask);
}

double region_ratio(const std::vector<RegionParams>& thetas, const BinaryMask& obj_mask) {
  const size_t n = obj_mask.count();
  if (n == 0) fail(Errc::empty_mask, "region_ratio: object mask is empty");
  double area = 0.0;
  for (const auto& p : thetas) area += p.rect_area();
  return area / double(n);
}

RegionParams project_params(const RegionParams& raw, int w, int h) {
  RegionParams p;
  p.l = std::clamp(raw.l, 0.0, double(w));
  p.r = std::clamp(raw.r, 0.0, double(w));
  p.t = std::clamp(raw.t, 0.0, double(h));
  p.b = std::clamp(raw.b, 0.0, double(h));
  if (p.l > p.r) p.l = p.r = 0.5 * (p.l + p.r);
  if (p.t > p.b) p.t = p.b = 0.5 * (p.t + p.b);
  return p;
}

PatchMaskCtx build_patch_mask(const std::vector<RegionParams>& thetas, int w, int h, double k,
                              const BinaryMask* shape) {
  if (thetas.empty()) fail(Errc::invalid_argument, "build_patch_mask: no regions");
  PatchMaskCtx ctx;
  ctx.raw.reserve(thetas.size());
  ctx.shape_scale.reserve(thetas.size());

  std::vector<Grid> composed;
  composed.reserve(thetas.size());
  for (const auto& theta : thetas) {
    SoftMask m = soft_mask(theta, w, h, k);
    Grid scale(h, w, 1.0);
    if (shape != nullptr) {
      const RegionBox box = region_pixel_box(theta, w, h);
      if (box.valid) {
        const int rh = box.i1 - box.i0, rw = box.j1 - box.j0;
        for (int i = box.i0; i < box.i1; ++i) {
          const int si = std::min(shape->h - 1, int((i - box.i0 + 0.5) * shape->h / rh));
          for (int j = box.j0; j < box.j1; ++j) {
            const int sj = std::min(shape->w - 1, int((j - box.j0 + 0.5) * shape->w / rw));
            scale.at(i, j) = double(shape->at(si, sj));
          }
        }
      }
    }
    Grid vals = m.values;
    for (size_t idx = 0; idx < vals.v.size(); ++idx) vals.v[idx] *= scale.v[idx];
    composed.push_back(std::move(vals));
    ctx.raw.push_back(std::move(m));
    ctx.shape_scale.push_back(std::move(scale));
  }

  UnionResult u = union_masks(composed);
  ctx.sum = std::move(u.sum);
  ctx.values = std::move(u.values);
  return ctx;
}

std::vector<EdgeGrad> patch_mask_vjp(const PatchMaskCtx& ctx, const Grid& upstream) {
  const int h = ctx.values.h, w = ctx.values.w;
  if (upstream.h != h || upstream.w != w)
    fail(Errc::dimension_mismatch, "patch_mask_vjp: upstream dims mismatch");

  // clamp backward: gradient passes only where the union sum is unsaturated.
  Grid through(h, w);
  for (size_t i = 0; i < through.v.size(); ++i)
    through.v[i] = (ctx.sum.v[i] < 1.0) ? upstream.v[i] : 0.0;

  std::vector<EdgeGrad> grads;
  grads.reserve(ctx.raw.size());
  for (size_t r = 0; r < ctx.raw.size(); ++r) {
    Grid g = through;
    for (size_t i = 0; i < g.v.size(); ++i) g.v[i] *= ctx.shape_scale[r].v[i];
    grads.push_back(soft_mask_vjp(ctx.raw[r], g));
  }
  return grads;
}

}  // namespace depthpatch

#include "depthpatch/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "depthpatch/asset_io.hpp"

namespace depthpatch {

using nlohmann::json;

double vertical_position_exact(double s, const CameraModel& cam, double H_phys) {
  cam.validate();
  if (s < 0.0) fail(Errc::invalid_argument, "object pixel height must be >= 0");
  if (!(H_phys > 0.0)) fail(Errc::out_of_range, "physical height must be > 0");
  return -(cam.h_cam / H_phys) * s + cam.f / cam.tan_alpha;
}

int vertical_position(double s, const CameraModel& cam, double H_phys,
                      std::optional<int> scene_h) {
  const int d = int(std::lround(vertical_position_exact(s, cam, H_phys)));
  if (scene_h && (d < 0 || d >= *scene_h))
    fail(Errc::placement_out_of_frame,
         "object bottom row " + std::to_string(d) + " outside scene of height " +
             std::to_string(*scene_h));
  return d;
}

double pixel_height_at_distance(const CameraModel& cam, double H_phys, double z) {
  cam.validate();
  if (!(z > 0.0)) fail(Errc::out_of_range, "distance must be > 0");
  return cam.f * H_phys / z;
}

double scale_for_distance(const CameraModel& cam, double H_phys, double native_px_height,
                          double z) {
  if (!(native_px_height > 0.0)) fail(Errc::out_of_range, "native pixel height must be > 0");
  return pixel_height_at_distance(cam, H_phys, z) / native_px_height;
}

TransformSpec sample_transform(Rng& rng, const TransformRanges& ranges, int scene_w,
                               int obj_bbox_h, int obj_bbox_w) {
  if (ranges.scale_min <= 0.0 || ranges.scale_max < ranges.scale_min)
    fail(Errc::out_of_range, "invalid scale range");
  if (ranges.saturation_min <= 0.0 || ranges.saturation_max < ranges.saturation_min)
    fail(Errc::out_of_range, "invalid saturation range");

  TransformSpec spec;
  spec.scale = rng.uniform(ranges.scale_min, ranges.scale_max);
  spec.rotation_deg = rng.uniform(-ranges.rotation_deg, ranges.rotation_deg);
  spec.brightness_delta = rng.uniform(-ranges.brightness_delta, ranges.brightness_delta);
  spec.saturation_factor = rng.uniform(ranges.saturation_min, ranges.saturation_max);

  // Footprint width bound after scale+rotation (bbox of the rotated box).
  const double rad = spec.rotation_deg * 3.14159265358979323846 / 180.0;
  const double wt = spec.scale * (std::abs(obj_bbox_w * std::cos(rad)) +
                                  std::abs(obj_bbox_h * std::sin(rad)));
  const int max_left = scene_w - int(std::ceil(wt));
  if (max_left < 0)
    fail(Errc::placement_out_of_frame, "no feasible horizontal placement for transformed object");
  spec.horizontal_col = int(rng.uniform_int(uint64_t(max_left) + 1));
  return spec;
}

namespace {

struct BilinearSample {
  int y0, x0;
  double wy, wx;  // weights toward (y0+1, x0+1)
  bool inside;
};

inline BilinearSample locate(double sy, double sx, int h, int w) {
  BilinearSample s{};
  if (sy < -1.0 || sy > double(h) || sx < -1.0 || sx > double(w)) {
    s.inside = false;
    return s;
  }
  s.y0 = int(std::floor(sy));
  s.x0 = int(std::floor(sx));
  s.wy = sy - s.y0;
  s.wx = sx - s.x0;
  s.inside = true;
  return s;
}

inline double fetch(const ImageRGB& img, int i, int j, int c) {
  if (i < 0 || i >= img.h || j < 0 || j >= img.w) return 0.0;
  return img.at(i, j, c);
}

}  // namespace

PhysicalObject apply_transform(const PhysicalObject& obj, const TransformSpec& spec,
                               TransformCtx* ctx) {
  obj.validate();
  if (!(spec.scale > 0.0)) fail(Errc::out_of_range, "transform scale must be > 0");
  if (!(spec.saturation_factor > 0.0)) fail(Errc::out_of_range, "saturation factor must be > 0");

  const int h = obj.image.h, w = obj.image.w;
  const double rad = spec.rotation_deg * 3.14159265358979323846 / 180.0;
  const double ca = std::cos(rad), sa = std::sin(rad);

  // Output canvas: bbox of the scaled+rotated input canvas (pixel-center span).
  const double span_y = spec.scale * (std::abs((h - 1) * ca) + std::abs((w - 1) * sa));
  const double span_x = spec.scale * (std::abs((w - 1) * ca) + std::abs((h - 1) * sa));
  const int oh = int(std::lround(span_y)) + 1;
  const int ow = int(std::lround(span_x)) + 1;

  // dst -> src: inverse of rotate-then-scale about the canvas centers.
  const double inv_s = 1.0 / spec.scale;
  const double ia = inv_s * ca, ib = inv_s * sa;    // src_x = ia*dx + ib*dy
  const double ic = -inv_s * sa, id = inv_s * ca;   // src_y = ic*dx + id*dy
  const double cy_src = (h - 1) / 2.0, cx_src = (w - 1) / 2.0;
  const double cy_dst = (oh - 1) / 2.0, cx_dst = (ow - 1) / 2.0;

  PhysicalObject out;
  out.height_m = obj.height_m;
  out.image = ImageRGB(oh, ow);
  out.mask = BinaryMask(oh, ow);

  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      const double dx = j - cx_dst, dy = i - cy_dst;
      const double sx = ia * dx + ib * dy + cx_src;
      const double sy = ic * dx + id * dy + cy_src;

      const BilinearSample s = locate(sy, sx, h, w);
      if (s.inside) {
        for (int c = 0; c < 3; ++c) {
          const double v00 = fetch(obj.image, s.y0, s.x0, c);
          const double v01 = fetch(obj.image, s.y0, s.x0 + 1, c);
          const double v10 = fetch(obj.image, s.y0 + 1, s.x0, c);
          const double v11 = fetch(obj.image, s.y0 + 1, s.x0 + 1, c);
          out.image.at(i, j, c) = (1 - s.wy) * ((1 - s.wx) * v00 + s.wx * v01) +
                                  s.wy * ((1 - s.wx) * v10 + s.wx * v11);
        }
        // nearest for the mask to stay binary
        const int ny = int(std::lround(sy)), nx = int(std::lround(sx));
        if (ny >= 0 && ny < h && nx >= 0 && nx < w) out.mask.at(i, j) = obj.mask.at(ny, nx);
      }
    }
  }

  // Photometrics only inside the (warped) object mask, then clamp.
  std::vector<double> preclamp(out.image.v.size());
  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      double r = out.image.at(i, j, 0), g = out.image.at(i, j, 1), b = out.image.at(i, j, 2);
      if (out.mask.at(i, j)) {
        r += spec.brightness_delta;
        g += spec.brightness_delta;
        b += spec.brightness_delta;
        const double gray = (r + g + b) / 3.0;
        r = gray + spec.saturation_factor * (r - gray);
        g = gray + spec.saturation_factor * (g - gray);
        b = gray + spec.saturation_factor * (b - gray);
      }
      const size_t base = (size_t(i) * ow + j) * 3;
      preclamp[base + 0] = r;
      preclamp[base + 1] = g;
      preclamp[base + 2] = b;
      out.image.at(i, j, 0) = clamp01(r);
      out.image.at(i, j, 1) = clamp01(g);
      out.image.at(i, j, 2) = clamp01(b);
    }
  }

  if (ctx) {
    ctx->spec = spec;
    ctx->in_h = h;
    ctx->in_w = w;
    ctx->out_h = oh;
    ctx->out_w = ow;
    ctx->inv_a = ia;
    ctx->inv_b = ib;
    ctx->inv_c = ic;
    ctx->inv_d = id;
    ctx->warped_mask = out.mask;
    ctx->preclamp = std::move(preclamp);
  }
  return out;
}

ImageRGB apply_transform_vjp(const TransformCtx& ctx, const ImageRGB& grad_out) {
  if (grad_out.h != ctx.out_h || grad_out.w != ctx.out_w)
    fail(Errc::dimension_mismatch, "apply_transform_vjp: gradient dims mismatch");

  const int h = ctx.in_h, w = ctx.in_w;
  const int oh = ctx.out_h, ow = ctx.out_w;
  const double cy_src = (h - 1) / 2.0, cx_src = (w - 1) / 2.0;
  const double cy_dst = (oh - 1) / 2.0, cx_dst = (ow - 1) / 2.0;
  const double sat = ctx.spec.saturation_factor;

  ImageRGB grad_in(h, w);
  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      double gc[3];
      bool any = false;
      for (int c = 0; c < 3; ++c) {
        const size_t base = (size_t(i) * ow + j) * 3;
        const double pre = ctx.preclamp[base + c];
        const double g = (pre >= 0.0 && pre <= 1.0) ? grad_out.at(i, j, c) : 0.0;
        gc[c] = g;
        any = any || g != 0.0;
      }
      if (!any) continue;

      if (ctx.warped_mask.at(i, j)) {
        const double gsum = gc[0] + gc[1] + gc[2];
        for (int c = 0; c < 3; ++c) gc[c] = sat * gc[c] + (1.0 - sat) / 3.0 * gsum;
      }

      const double dx = j - cx_dst, dy = i - cy_dst;
      const double sx = ctx.inv_a * dx + ctx.inv_b * dy + cx_src;
      const double sy = ctx.inv_c * dx + ctx.inv_d * dy + cy_src;
      const BilinearSample s = locate(sy, sx, h, w);
      if (!s.inside) continue;

      auto scatter = [&](int y, int x, double wgt) {
        if (y < 0 || y >= h || x < 0 || x >= w || wgt == 0.0) return;
        for (int c = 0; c < 3; ++c) grad_in.at(y, x, c) += wgt * gc[c];
      };
      scatter(s.y0, s.x0, (1 - s.wy) * (1 - s.wx));
      scatter(s.y0, s.x0 + 1, (1 - s.wy) * s.wx);
      scatter(s.y0 + 1, s.x0, s.wy * (1 - s.wx));
      scatter(s.y0 + 1, s.x0 + 1, s.wy * s.wx);
    }
  }
  return grad_in;
}

BinaryMask warp_mask(const TransformCtx& ctx, const BinaryMask& canvas_mask) {
  if (canvas_mask.h != ctx.in_h || canvas_mask.w != ctx.in_w)
    fail(Errc::dimension_mismatch, "warp_mask: mask does not match the transform input");
  const double cy_src = (ctx.in_h - 1) / 2.0, cx_src = (ctx.in_w - 1) / 2.0;
  const double cy_dst = (ctx.out_h - 1) / 2.0, cx_dst = (ctx.out_w - 1) / 2.0;
  BinaryMask out(ctx.out_h, ctx.out_w);
  for (int i = 0; i < ctx.out_h; ++i)
    for (int j = 0; j < ctx.out_w; ++j) {
      const double dx = j - cx_dst, dy = i - cy_dst;
      const double sx = ctx.inv_a * dx + ctx.inv_b * dy + cx_src;
      const double sy = ctx.inv_c * dx + ctx.inv_d * dy + cy_src;
      const int ny = int(std::lround(sy)), nx = int(std::lround(sx));
      if (ny >= 0 && ny < ctx.in_h && nx >= 0 && nx < ctx.in_w)
        out.at(i, j) = canvas_mask.at(ny, nx);
    }
  return out;
}

BinaryMask transport_mask(const PasteCtx& ctx, const BinaryMask& canvas_mask, int scene_h,
                          int scene_w) {
  if (canvas_mask.h != ctx.obj_h || canvas_mask.w != ctx.obj_w)
    fail(Errc::dimension_mismatch, "transport_mask: mask does not match the pasted canvas");
  BinaryMask out(scene_h, scene_w);
  for (int i = 0; i < ctx.obj_h; ++i)
    for (int j = 0; j < ctx.obj_w; ++j) {
      if (!ctx.obj_mask.at(i, j) || !canvas_mask.at(i, j)) continue;
      const int si = ctx.scene_r0 + (i - ctx.bbox_r0);
      const int sj = ctx.scene_c0 + (j - ctx.bbox_c0);
      if (si < 0 || si >= scene_h || sj < 0 || sj >= scene_w) continue;
      out.at(si, sj) = 1;
    }
  return out;
}

Bbox mask_bbox(const BinaryMask& mask) {
  Bbox box{mask.h, -1, mask.w, -1};
  for (int i = 0; i < mask.h; ++i)
    for (int j = 0; j < mask.w; ++j)
      if (mask.at(i, j)) {
        box.r0 = std::min(box.r0, i);
        box.r1 = std::max(box.r1, i);
        box.c0 = std::min(box.c0, j);
        box.c1 = std::max(box.c1, j);
      }
  if (box.r1 < 0) fail(Errc::empty_mask, "mask_bbox: empty mask");
  return box;
}

Composite paste(const ImageRGB& scene, const PhysicalObject& obj_t, const CameraModel& cam,
                int col, PasteCtx* ctx) {
  if (obj_t.image.h != obj_t.mask.h || obj_t.image.w != obj_t.mask.w)
    fail(Errc::dimension_mismatch, "paste: object image and mask dims differ");

  if (obj_t.mask.empty_mask()) {
    // nothing to place; the composite is the untouched scene
    Composite out;
    out.scene_adv = scene;
    out.scene_mask = BinaryMask(scene.h, scene.w);
    if (ctx) {
      ctx->obj_h = obj_t.image.h;
      ctx->obj_w = obj_t.image.w;
      ctx->bbox_r0 = ctx->bbox_c0 = ctx->scene_r0 = ctx->scene_c0 = 0;
      ctx->obj_mask = obj_t.mask;
    }
    return out;
  }

  const Bbox box = mask_bbox(obj_t.mask);
  const int s = box.height();
  const int d = vertical_position(double(s), cam, obj_t.height_m, scene.h);

  const int scene_r0 = d - s + 1;
  const int scene_c0 = col;
  if (scene_r0 < 0)
    fail(Errc::placement_out_of_frame, "object top row above frame (too close/large)");
  if (scene_c0 < 0 || scene_c0 + box.width() > scene.w)
    fail(Errc::placement_out_of_frame, "object columns outside frame");

  Composite out;
  out.scene_adv = scene;
  out.scene_mask = BinaryMask(scene.h, scene.w);
  out.row_bottom = d;
  out.col_left = col;

  for (int i = box.r0; i <= box.r1; ++i) {
    for (int j = box.c0; j <= box.c1; ++j) {
      if (!obj_t.mask.at(i, j)) continue;
      const int si = scene_r0 + (i - box.r0);
      const int sj = scene_c0 + (j - box.c0);
      for (int c = 0; c < 3; ++c) out.scene_adv.at(si, sj, c) = obj_t.image.at(i, j, c);
      out.scene_mask.at(si, sj) = 1;
    }
  }

  if (ctx) {
    ctx->obj_h = obj_t.image.h;
    ctx->obj_w = obj_t.image.w;
    ctx->bbox_r0 = box.r0;
    ctx->bbox_c0 = box.c0;
    ctx->scene_r0 = scene_r0;
    ctx->scene_c0 = scene_c0;
    ctx->obj_mask = obj_t.mask;
  }
  return out;
}

ImageRGB paste_vjp(const PasteCtx& ctx, const ImageRGB& grad_scene) {
  ImageRGB grad_obj(ctx.obj_h, ctx.obj_w);
  for (int i = 0; i < ctx.obj_h; ++i) {
    for (int j = 0; j < ctx.obj_w; ++j) {
      if (!ctx.obj_mask.at(i, j)) continue;
      const int si = ctx.scene_r0 + (i - ctx.bbox_r0);
      const int sj = ctx.scene_c0 + (j - ctx.bbox_c0);
      if (si < 0 || si >= grad_scene.h || sj < 0 || sj >= grad_scene.w) continue;
      for (int c = 0; c < 3; ++c) grad_obj.at(i, j, c) = grad_scene.at(si, sj, c);
    }
  }
  return grad_obj;
}

ImageRGB apply_patch(const ImageRGB& obj, const Grid& patch_mask, const ImageRGB& patch) {
  if (obj.h != patch.h || obj.w != patch.w || obj.h != patch_mask.h || obj.w != patch_mask.w)
    fail(Errc::dimension_mismatch, "apply_patch: object, mask, patch dims must match");
  ImageRGB out(obj.h, obj.w);
  for (int i = 0; i < obj.h; ++i)
    for (int j = 0; j < obj.w; ++j) {
      const double m = patch_mask.at(i, j);
      for (int c = 0; c < 3; ++c)
        out.at(i, j, c) = obj.at(i, j, c) * (1.0 - m) + patch.at(i, j, c) * m;
    }
  return out;
}

PatchComposeGrads apply_patch_vjp(const ImageRGB& obj, const Grid& patch_mask,
                                  const ImageRGB& patch, const ImageRGB& grad_out) {
  PatchComposeGrads g;
  g.grad_patch = ImageRGB(obj.h, obj.w);
  g.grad_mask = Grid(obj.h, obj.w);
  for (int i = 0; i < obj.h; ++i)
    for (int j = 0; j < obj.w; ++j) {
      const double m = patch_mask.at(i, j);
      double gm = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double go = grad_out.at(i, j, c);
        g.grad_patch.at(i, j, c) = go * m;
        gm += go * (patch.at(i, j, c) - obj.at(i, j, c));
      }
      g.grad_mask.at(i, j) = gm;
    }
  return g;
}

CameraModel load_camera_json(const std::string& path) {
  if (!std::filesystem::exists(path)) fail(Errc::missing_file, "camera metadata not found: " + path);
  json j;
  std::ifstream in(path);
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(Errc::corrupt_stream, "bad camera metadata " + path + ": " + e.what());
  }
  CameraModel cam;
  for (const char* key : {"f", "tan_alpha", "h_cam"})
    if (!j.contains(key)) fail(Errc::missing_required, std::string("camera metadata missing ") + key);
  cam.f = j["f"].get<double>();
  cam.tan_alpha = j["tan_alpha"].get<double>();
  cam.h_cam = j["h_cam"].get<double>();
  cam.validate();
  return cam;
}

TransformRanges eot_ranges(double min_distance_m, double max_distance_m, double rotation_deg,
                           double brightness_delta, double saturation_min, double saturation_max,
                           const CameraModel& cam, double H_phys, double native_px_height) {
  TransformRanges r;
  // nearer distance -> larger on-screen object -> larger scale
  r.scale_min = scale_for_distance(cam, H_phys, native_px_height, max_distance_m);
  r.scale_max = scale_for_distance(cam, H_phys, native_px_height, min_distance_m);
  r.rotation_deg = rotation_deg;
  r.brightness_delta = brightness_delta;
  r.saturation_min = saturation_min;
  r.saturation_max = saturation_max;
  return r;
}

std::vector<SceneAsset> load_scene_dir(const std::string& dir) {
  const CameraModel cam = load_camera_json((std::filesystem::path(dir) / "camera.json").string());
  std::vector<SceneAsset> scenes;
  for (const std::string& file : list_image_files(dir)) {
    SceneAsset s;
    s.background = load_image(file);
    s.camera = cam;
    s.name = std::filesystem::path(file).filename().string();
    scenes.push_back(std::move(s));
  }
  if (scenes.empty()) fail(Errc::missing_file, "no scene images in " + dir);
  return scenes;
}

}  // namespace depthpatch

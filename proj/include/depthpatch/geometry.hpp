#pragma once

#include <optional>
#include <string>
#include <vector>

#include "depthpatch/core.hpp"

namespace depthpatch {

// Pinhole-with-ground-plane camera: f in pixels, tan_alpha the view-angle
// term, h_cam the camera height above ground relative to the target, meters.
struct CameraModel {
  double f = 0.0;
  double tan_alpha = 0.0;
  double h_cam = 0.0;

  void validate() const {
    if (!(f > 0.0) || !(tan_alpha > 0.0) || !(h_cam > 0.0))
      fail(Errc::out_of_range, "camera model requires f, tan_alpha, h_cam > 0");
  }
  double vanishing_row() const { return f / tan_alpha; }
};

struct PhysicalObject {
  ImageRGB image;
  BinaryMask mask;
  double height_m = 0.0;

  void validate() const {
    if (image.h != mask.h || image.w != mask.w)
      fail(Errc::dimension_mismatch, "object image and mask dims differ");
    if (mask.empty_mask()) fail(Errc::empty_mask, "object mask is empty");
    if (!(height_m > 0.0)) fail(Errc::out_of_range, "object physical height must be > 0");
  }
};

struct SceneAsset {
  ImageRGB background;
  CameraModel camera;
  std::string name;
};

// One EoT draw.
struct TransformSpec {
  double scale = 1.0;
  double rotation_deg = 0.0;
  double brightness_delta = 0.0;
  double saturation_factor = 1.0;
  int horizontal_col = 0;  // left column of the pasted object footprint
};

struct TransformRanges {
  double scale_min = 1.0, scale_max = 1.0;
  double rotation_deg = 0.0;       // sampled in [-r, r]
  double brightness_delta = 0.0;   // sampled in [-d, d]
  double saturation_min = 1.0, saturation_max = 1.0;
};

// Row of the object's ground contact line. Eq. form: d = -(h/H) s + f/tan(a).
// s = 0 lands on the vanishing point row.
double vertical_position_exact(double s, const CameraModel& cam, double H_phys);
// Rounded to the nearest integer row; when scene_h is given, rows outside the
// frame raise a placement error.
int vertical_position(double s, const CameraModel& cam, double H_phys,
                      std::optional<int> scene_h = std::nullopt);

// Pixel height an object of height H_phys subtends at distance z (s = f H / z),
// and the transform scale that realizes it for a given native pixel height.
double pixel_height_at_distance(const CameraModel& cam, double H_phys, double z);
double scale_for_distance(const CameraModel& cam, double H_phys, double native_px_height,
                          double z);

// Draws scale, rotation, brightness, saturation i.i.d. uniform from the
// ranges, then a horizontal column uniform over placements that keep the
// transformed footprint inside the scene width. The vertical position is
// never sampled; it follows from the perspective model.
TransformSpec sample_transform(Rng& rng, const TransformRanges& ranges, int scene_w,
                               int obj_bbox_h, int obj_bbox_w);

// apply_transform: joint geometric warp (bilinear image / nearest mask),
// photometrics inside the mask, clamp to [0,1]. The context carries what the
// backward pass needs.
struct TransformCtx {
  TransformSpec spec;
  int in_h = 0, in_w = 0;
  int out_h = 0, out_w = 0;
  double inv_a = 1.0, inv_b = 0.0, inv_c = 0.0, inv_d = 1.0;  // dst->src linear part
  BinaryMask warped_mask;
  std::vector<double> preclamp;  // photometric output before the clamp
};

PhysicalObject apply_transform(const PhysicalObject& obj, const TransformSpec& spec,
                               TransformCtx* ctx = nullptr);
// Gradient w.r.t. the input object image.
ImageRGB apply_transform_vjp(const TransformCtx& ctx, const ImageRGB& grad_out);

// Warps an extra canvas-aligned binary mask through the same geometric map
// (nearest-neighbor), e.g. the patch footprint for the patch-oriented loss.
BinaryMask warp_mask(const TransformCtx& ctx, const BinaryMask& canvas_mask);

// Hard alpha compositing of a transformed object into a scene. The bottom row
// of the object's mask footprint sits on the perspective row; `col` is the
// left column of the footprint.
struct Composite {
  ImageRGB scene_adv;
  BinaryMask scene_mask;
  int row_bottom = 0;
  int col_left = 0;
};

struct PasteCtx {
  int obj_h = 0, obj_w = 0;
  int bbox_r0 = 0, bbox_c0 = 0;     // mask bbox origin in the object canvas
  int scene_r0 = 0, scene_c0 = 0;   // where that origin lands in the scene
  BinaryMask obj_mask;
};

Composite paste(const ImageRGB& scene, const PhysicalObject& obj_t, const CameraModel& cam,
                int col, PasteCtx* ctx = nullptr);
// Gradient w.r.t. the transformed object image.
ImageRGB paste_vjp(const PasteCtx& ctx, const ImageRGB& grad_scene);

// Moves a binary mask on the transformed-object canvas into scene coordinates
// using a completed paste; restricted to pixels the paste actually wrote.
BinaryMask transport_mask(const PasteCtx& ctx, const BinaryMask& canvas_mask, int scene_h,
                          int scene_w);

// Patch application on the object canvas: out = obj*(1-m) + patch*m.
ImageRGB apply_patch(const ImageRGB& obj, const Grid& patch_mask, const ImageRGB& patch);

struct PatchComposeGrads {
  ImageRGB grad_patch;
  Grid grad_mask;
};
PatchComposeGrads apply_patch_vjp(const ImageRGB& obj, const Grid& patch_mask,
                                  const ImageRGB& patch, const ImageRGB& grad_out);

// Bounding box of the nonzero mask region; errors on empty masks.
struct Bbox {
  int r0 = 0, r1 = 0, c0 = 0, c1 = 0;  // inclusive
  int height() const { return r1 - r0 + 1; }
  int width() const { return c1 - c0 + 1; }
};
Bbox mask_bbox(const BinaryMask& mask);

// Scene directory: image files plus camera.json {f, tan_alpha, h_cam}.
std::vector<SceneAsset> load_scene_dir(const std::string& dir);
CameraModel load_camera_json(const std::string& path);

// EoT ranges realized for a concrete object: the scale band maps the
// configured distance band through the perspective model.
TransformRanges eot_ranges(double min_distance_m, double max_distance_m, double rotation_deg,
                           double brightness_delta, double saturation_min, double saturation_max,
                           const CameraModel& cam, double H_phys, double native_px_height);

}  // namespace depthpatch

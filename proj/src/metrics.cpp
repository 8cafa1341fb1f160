#include "depthpatch/metrics.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "depthpatch/asset_io.hpp"
#include "depthpatch/optimizer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace depthpatch {

double mean_depth_error(const DepthGrid& benign, const DepthGrid& adv, const BinaryMask& obj_mask) {
  if (benign.h() != adv.h() || benign.w() != adv.w() || benign.h() != obj_mask.h ||
      benign.w() != obj_mask.w)
    fail(Errc::dimension_mismatch, "mean_depth_error: grids/mask must be aligned");
  const size_t n = obj_mask.count();
  if (n == 0) fail(Errc::empty_mask, "mean_depth_error: empty object mask");

  double acc = 0.0;
  for (int i = 0; i < benign.h(); ++i)
    for (int j = 0; j < benign.w(); ++j)
      if (obj_mask.at(i, j)) acc += std::abs(benign.at(i, j) - adv.at(i, j));
  return acc / double(n);
}

double affected_ratio(const DepthGrid& benign, const DepthGrid& adv, const BinaryMask& obj_mask,
                      double threshold_m) {
  if (benign.h() != adv.h() || benign.w() != adv.w() || benign.h() != obj_mask.h ||
      benign.w() != obj_mask.w)
    fail(Errc::dimension_mismatch, "affected_ratio: grids/mask must be aligned");
  const size_t n = obj_mask.count();
  if (n == 0) fail(Errc::empty_mask, "affected_ratio: empty object mask");

  size_t hits = 0;
  for (int i = 0; i < benign.h(); ++i)
    for (int j = 0; j < benign.w(); ++j)
      if (obj_mask.at(i, j) && std::abs(benign.at(i, j) - adv.at(i, j)) >= threshold_m) ++hits;
  return double(hits) / double(n);
}

double depth_from_height(const CameraModel& cam, double H_phys, double s_px) {
  cam.validate();
  if (!(H_phys > 0.0)) fail(Errc::out_of_range, "physical height must be > 0");
  if (!(s_px > 0.0)) fail(Errc::out_of_range, "pixel height must be > 0");
  return cam.f * H_phys / s_px;
}

double detection_rate(const std::vector<bool>& outcomes) {
  if (outcomes.empty()) fail(Errc::invalid_argument, "detection_rate: empty outcome list");
  size_t detected = 0;
  for (bool b : outcomes) detected += b ? 1 : 0;
  return double(detected) / double(outcomes.size());
}

PatchArtifacts load_patch_artifacts(const std::string& attack_dir,
                                    const std::optional<BinaryMask>& shape) {
  PatchArtifacts pa;
  pa.patch = load_image((fs::path(attack_dir) / "patch.png").string());
  const ThetaFile tf = load_thetas((fs::path(attack_dir) / "theta.json").string());
  pa.thetas = tf.thetas;
  pa.tanh_k = tf.tanh_k;
  if (tf.canvas_w != pa.patch.w || tf.canvas_h != pa.patch.h)
    fail(Errc::size_mismatch, "theta.json canvas does not match patch.png");
  pa.shape = shape;
  return pa;
}

EvalReport placement_sweep(const AttackAssets& assets, const PatchArtifacts& patch,
                           const DepthModel& model, const EvaluateConfig& grid) {
  const PhysicalObject& obj = assets.object;
  if (!patch.patch.same_dims(obj.image))
    fail(Errc::dimension_mismatch, "patch canvas does not match the object");

  const Bbox box = mask_bbox(obj.mask);
  const BinaryMask* shape = patch.shape ? &*patch.shape : nullptr;
  const PatchMaskCtx mctx =
      build_patch_mask(patch.thetas, obj.image.w, obj.image.h, patch.tanh_k, shape);
  const ImageRGB adv_object = apply_patch(obj.image, mctx.values, patch.patch);

  const int n_scenes = grid.max_scenes > 0
                           ? std::min<int>(grid.max_scenes, int(assets.scenes.size()))
                           : int(assets.scenes.size());

  EvalReport report;
  double cell_ed_sum = 0.0, cell_ra_sum = 0.0;
  int evaluated_cells = 0;

  const size_t sample_stride = std::max<size_t>(
      1, size_t(grid.distances_m.size()) * grid.laterals_m.size() * size_t(n_scenes) *
             obj.mask.count() / size_t(std::max(1, grid.max_error_samples)));

  size_t sample_counter = 0;
  for (double z : grid.distances_m) {
    for (double lat : grid.laterals_m) {
      SweepCell cell;
      cell.distance_m = z;
      cell.lateral_m = lat;

      double ed_sum = 0.0, ra_sum = 0.0;
      int ok_scenes = 0;
      std::string last_reason;

      for (int si = 0; si < n_scenes; ++si) {
        const SceneAsset& scene = assets.scenes[si];
        try {
          TransformSpec spec;
          spec.scale = scale_for_distance(scene.camera, obj.height_m, double(box.height()), z);

          const PhysicalObject benign_t =
              apply_transform(PhysicalObject{obj.image, obj.mask, obj.height_m}, spec);
          const Bbox tbox = mask_bbox(benign_t.mask);

          // lateral meters -> pixel offset of the object center at depth z
          const double center_col =
              (scene.background.w - 1) / 2.0 + scene.camera.f * lat / z;
          spec.horizontal_col = int(std::lround(center_col - tbox.width() / 2.0));
          if (spec.horizontal_col < 0 ||
              spec.horizontal_col + tbox.width() > scene.background.w)
            fail(Errc::placement_out_of_frame, "lateral placement outside frame");

          const PhysicalObject adv_t = apply_transform(
              PhysicalObject{adv_object, obj.mask, obj.height_m}, spec);

          const Composite benign_c =
              paste(scene.background, benign_t, scene.camera, spec.horizontal_col);
          const Composite adv_c =
              paste(scene.background, adv_t, scene.camera, spec.horizontal_col);

          const DepthGrid d_benign = predict_depth(model, benign_c.scene_adv);
          const DepthGrid d_adv = predict_depth(model, adv_c.scene_adv);

          const double ed = mean_depth_error(d_benign, d_adv, benign_c.scene_mask);
          const double ra =
              affected_ratio(d_benign, d_adv, benign_c.scene_mask, grid.affected_threshold_m);
          ed_sum += ed;
          ra_sum += ra;
          ++ok_scenes;
          report.per_scene_e_d.push_back(ed);

          for (int i = 0; i < d_benign.h(); ++i)
            for (int j = 0; j < d_benign.w(); ++j) {
              if (!benign_c.scene_mask.at(i, j)) continue;
              if (sample_counter++ % sample_stride == 0)
                report.error_samples.emplace_back(z,
                                                  std::abs(d_benign.at(i, j) - d_adv.at(i, j)));
            }
        } catch (const Error& e) {
          if (e.code() != Errc::placement_out_of_frame) throw;
          last_reason = e.what();
        }
      }

      if (ok_scenes == 0) {
        cell.skipped = true;
        cell.reason = last_reason.empty() ? "no scene fits" : last_reason;
      } else {
        cell.e_d = ed_sum / ok_scenes;
        cell.r_a = ra_sum / ok_scenes;
        cell.scenes = ok_scenes;
        cell_ed_sum += cell.e_d;
        cell_ra_sum += cell.r_a;
        ++evaluated_cells;
      }
      report.cells.push_back(std::move(cell));
    }
  }

  if (evaluated_cells > 0) {
    report.mean_e_d = cell_ed_sum / evaluated_cells;
    report.mean_r_a = cell_ra_sum / evaluated_cells;
  }
  return report;
}

void write_sweep_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::io_failure, "cannot write " + path);
  out << "distance_m,lateral_m,e_d,r_a,scenes,skipped\n";
  for (const SweepCell& c : report.cells)
    out << c.distance_m << ',' << c.lateral_m << ',' << c.e_d << ',' << c.r_a << ',' << c.scenes
        << ',' << (c.skipped ? 1 : 0) << '\n';
}

void write_error_samples_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::io_failure, "cannot write " + path);
  out << "distance_m,abs_error_m\n";
  for (const auto& [z, e] : report.error_samples) out << z << ',' << e << '\n';
}

void write_summary_json(const EvalReport& report, const std::string& path) {
  json per_distance = json::object();
  for (const SweepCell& c : report.cells) {
    if (c.skipped) continue;
    const std::string key = std::to_string(c.distance_m);
    if (!per_distance.contains(key)) per_distance[key] = {{"e_d_sum", 0.0}, {"cells", 0}};
    per_distance[key]["e_d_sum"] = per_distance[key]["e_d_sum"].get<double>() + c.e_d;
    per_distance[key]["cells"] = per_distance[key]["cells"].get<int>() + 1;
  }
  json distances = json::object();
  for (auto& [key, v] : per_distance.items())
    distances[key] = v["e_d_sum"].get<double>() / v["cells"].get<int>();

  int skipped = 0;
  for (const SweepCell& c : report.cells) skipped += c.skipped ? 1 : 0;

  const json j = {
      {"mean_e_d", report.mean_e_d},
      {"mean_r_a", report.mean_r_a},
      {"cells", int(report.cells.size())},
      {"skipped_cells", skipped},
      {"e_d_by_distance", distances},
  };
  std::ofstream out(path);
  if (!out) fail(Errc::io_failure, "cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace depthpatch

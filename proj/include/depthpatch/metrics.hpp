#pragma once

#include <optional>
#include <string>
#include <vector>

#include "depthpatch/attack_loss.hpp"
#include "depthpatch/core.hpp"
#include "depthpatch/geometry.hpp"
#include "depthpatch/mask.hpp"
#include "depthpatch/mde_adapter.hpp"

namespace depthpatch {

// Mean absolute depth difference over object pixels, meters.
double mean_depth_error(const DepthGrid& benign, const DepthGrid& adv, const BinaryMask& obj_mask);

// Fraction of object pixels whose |depth difference| meets the threshold
// (>=, 10 m by default).
double affected_ratio(const DepthGrid& benign, const DepthGrid& adv, const BinaryMask& obj_mask,
                      double threshold_m = 10.0);

// Geometric ground truth: z = f * H / s.
double depth_from_height(const CameraModel& cam, double H_phys, double s_px);

// detected / total over externally supplied detector outcomes.
double detection_rate(const std::vector<bool>& outcomes);

struct SweepCell {
  double distance_m = 0.0;
  double lateral_m = 0.0;
  double e_d = 0.0;
  double r_a = 0.0;
  int scenes = 0;
  bool skipped = false;
  std::string reason;
};

struct EvalReport {
  double mean_e_d = 0.0;  // over evaluated cells
  double mean_r_a = 0.0;
  std::vector<SweepCell> cells;
  std::vector<std::pair<double, double>> error_samples;  // (distance, |error|) for CDFs
  std::vector<double> per_scene_e_d;                     // cell-major
  int detected = 0;
  int total_frames = 0;
};

// Optimized-attack artifacts as downstream commands consume them.
struct PatchArtifacts {
  ImageRGB patch;
  std::vector<RegionParams> thetas;
  double tanh_k = 1.0;
  std::optional<BinaryMask> shape;
};

PatchArtifacts load_patch_artifacts(const std::string& attack_dir,
                                    const std::optional<BinaryMask>& shape);

// Distance x lateral grid: at each cell the benign and adversarial objects are
// composed under the identical (perspective-consistent) transform and compared
// over the object mask. Cells that do not fit the frame are recorded as
// skipped, not failed.
EvalReport placement_sweep(const AttackAssets& assets, const PatchArtifacts& patch,
                           const DepthModel& model, const EvaluateConfig& grid);

// CSV/JSON emission used by the evaluate command (and consumed by plot).
void write_sweep_csv(const EvalReport& report, const std::string& path);
void write_error_samples_csv(const EvalReport& report, const std::string& path);
void write_summary_json(const EvalReport& report, const std::string& path);

}  // namespace depthpatch

#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "depthpatch/config.hpp"
#include "depthpatch/core.hpp"
#include "depthpatch/geometry.hpp"
#include "depthpatch/mask.hpp"
#include "depthpatch/mde_adapter.hpp"
#include "depthpatch/styleloss.hpp"

namespace depthpatch {

struct LossBreakdown {
  double adv = 0.0;
  double mask = 0.0;
  double style_total = 0.0;
  double total = 0.0;  // adv + mask + lambda * style_total
  std::vector<double> per_scene_adv;
  StyleBreakdown style_terms;
};

// Mean over scenes of the object-pixel average of squared reciprocal depth.
// Minimizing it pushes the object's estimated depth toward infinity.
double adversarial_loss(const std::vector<DepthGrid>& depth_batch,
                        const std::vector<BinaryMask>& mask_batch,
                        std::vector<double>* per_scene = nullptr,
                        std::vector<Grid>* depth_grads = nullptr);

// Everything an attack run loads once.
struct AttackAssets {
  PhysicalObject object;              // O, m_o, H
  ImageRGB content_image;             // x, same canvas as O
  ImageRGB style_image;               // x_s, resized to the canvas
  std::optional<BinaryMask> shape;    // m_s
  std::vector<SceneAsset> scenes;
};

AttackAssets load_attack_assets(const RunConfig& cfg);

struct BatchItem {
  int scene_index = 0;
  TransformSpec spec;
};

struct ObjectiveResult {
  LossBreakdown losses;
  ImageRGB grad_patch;                // d total / d x'
  std::vector<EdgeGrad> grad_thetas;  // d total / d theta_i (adv + mask paths)
  double ratio = 0.0;                 // region ratio at evaluation time
};

// Assembles the total objective over a randomized batch of composites and
// backpropagates to the patch pixels and border parameters. Style targets and
// the matting Laplacian are frozen at construction.
class ObjectiveEvaluator {
 public:
  ObjectiveEvaluator(const RunConfig& cfg, const AttackAssets& assets,
                     std::shared_ptr<DepthModel> model);

  ObjectiveResult evaluate(const ImageRGB& patch, const std::vector<RegionParams>& thetas,
                           const std::vector<BatchItem>& batch, bool want_grads) const;

  const DepthModel& model() const { return *model_; }
  const FeatureExtractor* extractor() const { return extractor_.get(); }

 private:
  const RunConfig& cfg_;
  const AttackAssets& assets_;
  std::shared_ptr<DepthModel> model_;
  std::unique_ptr<FeatureExtractor> extractor_;
  StyleTarget style_target_;
  MattingLaplacian laplacian_;
  StyleWeights weights_;
  SmoothnessMode smoothness_mode_;
};

}  // namespace depthpatch

#pragma once

#include <memory>

#include "depthpatch/attack_loss.hpp"
#include "depthpatch/config.hpp"
#include "depthpatch/mde_adapter.hpp"
#include "support/helpers.hpp"

namespace testsupport {

using namespace depthpatch;

// A self-contained desk-scale attack problem: small scenes, a small object,
// the seeded toy depth model. Shared by the optimizer/metrics/defense tests
// and the acceptance suite.
struct ToySetup {
  RunConfig cfg;
  AttackAssets assets;
  std::shared_ptr<DepthModel> model;
};

inline ToySetup make_toy_setup(uint64_t seed = 1234) {
  ToySetup s;

  s.cfg = RunConfig{};
  s.cfg.seed = seed;
  s.cfg.lambda = 1.0;
  s.cfg.target_ratio = 1.0 / 3.0;
  s.cfg.iterations = 0;  // callers choose
  s.cfg.batch_size = 2;
  s.cfg.eot.min_distance_m = 6.5;
  s.cfg.eot.max_distance_m = 12.0;
  s.cfg.eot.rotation_deg = 3.0;
  s.cfg.eot.brightness_delta = 0.05;
  s.cfg.eot.saturation_min = 0.95;
  s.cfg.eot.saturation_max = 1.05;
  s.cfg.style.extractor = "toy";
  s.cfg.object.height_m = 1.5;
  s.cfg.evaluate.distances_m = {7, 14, 21, 28, 35};
  s.cfg.evaluate.laterals_m = {-0.5, 0, 0.5};
  s.cfg.evaluate.max_scenes = 1;

  // object: 20x16 canvas, solid 16x12 mask
  s.assets.object = toy_object(20, 16, 2, s.cfg.object.height_m, 91);
  s.assets.content_image = s.assets.object.image;
  s.assets.style_image = random_image(20, 16, 92, 0.35, 0.55);

  // scenes: mild vertical gradient backgrounds, camera with vanishing row 35
  const CameraModel cam{70.0, 2.0, 1.5};
  for (uint64_t k = 0; k < 2; ++k) {
    SceneAsset scene;
    scene.camera = cam;
    scene.name = "scene" + std::to_string(k);
    scene.background = ImageRGB(48, 64);
    Rng rng(100 + k);
    for (int i = 0; i < 48; ++i)
      for (int j = 0; j < 64; ++j) {
        const double base = 0.35 + 0.3 * double(i) / 47.0;
        for (int c = 0; c < 3; ++c)
          scene.background.at(i, j, c) = clamp01(base + rng.uniform(-0.03, 0.03));
      }
    s.assets.scenes.push_back(std::move(scene));
  }

  s.model = make_depth_model(s.cfg.model);
  return s;
}

}  // namespace testsupport

#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "depthpatch/core.hpp"

namespace depthpatch {

struct OptimizerConfig {
  double content_step = 0.1;   // fixed step for the quasi-Newton content update
  int lbfgs_history = 10;
  double region_step = 0.5;    // pixels per edge update
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct EotConfig {
  double min_distance_m = 7.0;
  double max_distance_m = 35.0;
  double rotation_deg = 5.0;       // sampled in [-r, r]
  double brightness_delta = 0.1;   // sampled in [-d, d]
  double saturation_min = 0.9;
  double saturation_max = 1.1;
};

struct StyleConfig {
  bool enabled = true;
  double weight_style = 1e2;
  double weight_content = 1.0;
  double weight_smoothness = 1e-2;
  double weight_photorealism = 1e-4;
  std::string extractor = "toy";   // toy | identity | vgg16 | vgg19
  uint64_t toy_seed = 29;
  std::string smoothness_mode = "paper";  // paper | tv
  double matting_eps = 1e-5;
};

struct ModelConfig {
  std::string backend = "toy";  // toy | monodepth2 | depthhints | manydepth
  std::string weights_dir;
  double d_min = 0.1;
  double d_max = 100.0;
  uint64_t toy_seed = 17;
  double toy_near_m = 3.0;   // row prior depth at the bottom row
  double toy_far_m = 25.0;   // row prior depth at the top row
  double toy_sensitivity = 0.6;  // prior modulation amplitude, in (0,1)
  int input_height = 0;  // 0 = native resolution, no letterboxing
  int input_width = 0;
};

struct PathsConfig {
  std::string object_image;
  std::string object_mask;
  std::string content_image;  // defaults to object_image when empty
  std::string style_image;
  std::string scene_dir;
  std::string shape_mask;  // optional; empty = rectangular patch
};

struct ObjectConfig {
  double height_m = 1.5;
};

struct RegionConfig {
  int rows = 1;  // initial sub-region grid (rows x cols patches)
  int cols = 1;
  double tanh_k = 1.0;
};

struct EvaluateConfig {
  std::vector<double> distances_m = {7, 14, 21, 28, 35};
  std::vector<double> laterals_m = {-1, 0, 1};
  double affected_threshold_m = 10.0;
  int max_scenes = 0;          // 0 = all scenes in scene_dir
  int max_error_samples = 20000;
};

struct DefenseConfig {
  std::vector<int> jpeg_quality = {90, 70, 50, 30, 20};
  std::vector<int> bit_depths = {5, 4, 3, 2};
  std::vector<int> median_kernels = {5, 15, 25};
  std::vector<double> noise_sigmas = {0.01, 0.05, 0.1};
  bool include_autoencoder = true;
  std::string autoencoder_model;
  double distance_m = 7.0;
  uint64_t noise_seed = 7;
};

struct RunConfig {
  uint64_t seed = 0;  // must be explicit in the config file
  double lambda = 1.0;
  double target_ratio = 1.0 / 9.0;
  int iterations = 5000;
  int batch_size = 4;
  std::string adv_mask_mode = "object";  // object | patch (baseline comparison)
  int snapshot_every = 0;                // composite samples; 0 = first and last only

  OptimizerConfig optimizer;
  EotConfig eot;
  StyleConfig style;
  ModelConfig model;
  PathsConfig paths;
  ObjectConfig object;
  RegionConfig region;
  EvaluateConfig evaluate;
  DefenseConfig defense;
};

// Parses and validates a config file. Unknown keys, out-of-range values and a
// missing seed are hard errors. An empty (whitespace-only) file is treated as
// an empty object, which then fails on the missing explicit seed.
RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const nlohmann::json& j);

// Fully-resolved snapshot with every default materialized. Loading the
// snapshot back reproduces the identical config.
nlohmann::json config_to_json(const RunConfig& cfg);

// Applies a "dotted.path=value" override onto raw config JSON.
void apply_override(nlohmann::json& j, const std::string& assignment);

// Validates the path fields an attack run needs.
void require_attack_paths(const RunConfig& cfg);

}  // namespace depthpatch

#include "depthpatch/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

using nlohmann::json;

namespace depthpatch {
namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(Errc::bad_config, "config section '" + where + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return it.key() == k; });
    if (!known) fail(Errc::unknown_key, "unknown config key '" + where + it.key() + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(Errc::bad_config, std::string("config key '") + key + "' has the wrong type");
  }
}

void expect_range(bool ok, const std::string& what) {
  if (!ok) fail(Errc::out_of_range, "config value out of range: " + what);
}

void expect_one_of(const std::string& v, std::initializer_list<const char*> allowed,
                   const std::string& what) {
  const bool known =
      std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return v == k; });
  if (!known) fail(Errc::out_of_range, "config value '" + v + "' not allowed for " + what);
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  RunConfig cfg;
  check_keys(j, "",
             {"seed", "lambda", "target_ratio", "iterations", "batch_size", "adv_mask_mode",
              "snapshot_every", "optimizer", "eot", "style", "model", "paths", "object", "region",
              "evaluate", "defense"});

  if (!j.contains("seed"))
    fail(Errc::missing_required, "config requires an explicit seed for replayable runs");
  read(j, "seed", cfg.seed);
  read(j, "lambda", cfg.lambda);
  read(j, "target_ratio", cfg.target_ratio);
  read(j, "iterations", cfg.iterations);
  read(j, "batch_size", cfg.batch_size);
  read(j, "adv_mask_mode", cfg.adv_mask_mode);
  read(j, "snapshot_every", cfg.snapshot_every);

  expect_range(cfg.lambda >= 0.0, "lambda >= 0");
  expect_range(cfg.target_ratio > 0.0 && cfg.target_ratio <= 1.0, "target_ratio in (0,1]");
  expect_range(cfg.iterations >= 1, "iterations >= 1");
  expect_range(cfg.batch_size >= 1, "batch_size >= 1");
  expect_range(cfg.snapshot_every >= 0, "snapshot_every >= 0");
  expect_one_of(cfg.adv_mask_mode, {"object", "patch"}, "adv_mask_mode");

  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    check_keys(o, "optimizer.",
               {"content_step", "lbfgs_history", "region_step", "adam_beta1", "adam_beta2",
                "adam_eps"});
    read(o, "content_step", cfg.optimizer.content_step);
    read(o, "lbfgs_history", cfg.optimizer.lbfgs_history);
    read(o, "region_step", cfg.optimizer.region_step);
    read(o, "adam_beta1", cfg.optimizer.adam_beta1);
    read(o, "adam_beta2", cfg.optimizer.adam_beta2);
    read(o, "adam_eps", cfg.optimizer.adam_eps);
    expect_range(cfg.optimizer.content_step > 0.0, "optimizer.content_step > 0");
    expect_range(cfg.optimizer.lbfgs_history >= 1, "optimizer.lbfgs_history >= 1");
    expect_range(cfg.optimizer.region_step > 0.0, "optimizer.region_step > 0");
    expect_range(cfg.optimizer.adam_beta1 >= 0.0 && cfg.optimizer.adam_beta1 < 1.0,
                 "optimizer.adam_beta1 in [0,1)");
    expect_range(cfg.optimizer.adam_beta2 >= 0.0 && cfg.optimizer.adam_beta2 < 1.0,
                 "optimizer.adam_beta2 in [0,1)");
    expect_range(cfg.optimizer.adam_eps > 0.0, "optimizer.adam_eps > 0");
  }

  if (j.contains("eot")) {
    const json& o = j.at("eot");
    check_keys(o, "eot.",
               {"min_distance_m", "max_distance_m", "rotation_deg", "brightness_delta",
                "saturation_min", "saturation_max"});
    read(o, "min_distance_m", cfg.eot.min_distance_m);
    read(o, "max_distance_m", cfg.eot.max_distance_m);
    read(o, "rotation_deg", cfg.eot.rotation_deg);
    read(o, "brightness_delta", cfg.eot.brightness_delta);
    read(o, "saturation_min", cfg.eot.saturation_min);
    read(o, "saturation_max", cfg.eot.saturation_max);
    expect_range(cfg.eot.min_distance_m > 0.0 && cfg.eot.max_distance_m >= cfg.eot.min_distance_m,
                 "eot distance band");
    expect_range(cfg.eot.rotation_deg >= 0.0, "eot.rotation_deg >= 0");
    expect_range(cfg.eot.brightness_delta >= 0.0 && cfg.eot.brightness_delta <= 1.0,
                 "eot.brightness_delta in [0,1]");
    expect_range(cfg.eot.saturation_min > 0.0 && cfg.eot.saturation_max >= cfg.eot.saturation_min,
                 "eot saturation band");
  }

  if (j.contains("style")) {
    const json& o = j.at("style");
    check_keys(o, "style.",
               {"enabled", "weight_style", "weight_content", "weight_smoothness",
                "weight_photorealism", "extractor", "toy_seed", "smoothness_mode", "matting_eps"});
    read(o, "enabled", cfg.style.enabled);
    read(o, "weight_style", cfg.style.weight_style);
    read(o, "weight_content", cfg.style.weight_content);
    read(o, "weight_smoothness", cfg.style.weight_smoothness);
    read(o, "weight_photorealism", cfg.style.weight_photorealism);
    read(o, "extractor", cfg.style.extractor);
    read(o, "toy_seed", cfg.style.toy_seed);
    read(o, "smoothness_mode", cfg.style.smoothness_mode);
    read(o, "matting_eps", cfg.style.matting_eps);
    expect_range(cfg.style.weight_style >= 0 && cfg.style.weight_content >= 0 &&
                     cfg.style.weight_smoothness >= 0 && cfg.style.weight_photorealism >= 0,
                 "style weights >= 0");
    expect_one_of(cfg.style.extractor, {"toy", "identity", "vgg16", "vgg19"}, "style.extractor");
    expect_one_of(cfg.style.smoothness_mode, {"paper", "tv"}, "style.smoothness_mode");
    expect_range(cfg.style.matting_eps > 0.0, "style.matting_eps > 0");
  }

  if (j.contains("model")) {
    const json& o = j.at("model");
    check_keys(o, "model.",
               {"backend", "weights_dir", "d_min", "d_max", "toy_seed", "toy_near_m", "toy_far_m",
                "toy_sensitivity", "input_height", "input_width"});
    read(o, "backend", cfg.model.backend);
    read(o, "weights_dir", cfg.model.weights_dir);
    read(o, "d_min", cfg.model.d_min);
    read(o, "d_max", cfg.model.d_max);
    read(o, "toy_seed", cfg.model.toy_seed);
    read(o, "toy_near_m", cfg.model.toy_near_m);
    read(o, "toy_far_m", cfg.model.toy_far_m);
    read(o, "toy_sensitivity", cfg.model.toy_sensitivity);
    read(o, "input_height", cfg.model.input_height);
    read(o, "input_width", cfg.model.input_width);
    expect_one_of(cfg.model.backend, {"toy", "monodepth2", "depthhints", "manydepth"},
                  "model.backend");
    expect_range(cfg.model.d_min > 0.0 && cfg.model.d_max > cfg.model.d_min, "model depth range");
    expect_range(cfg.model.toy_near_m >= cfg.model.d_min && cfg.model.toy_far_m <= cfg.model.d_max &&
                     cfg.model.toy_near_m < cfg.model.toy_far_m,
                 "toy row prior inside depth range");
    expect_range(cfg.model.toy_sensitivity > 0.0 && cfg.model.toy_sensitivity < 1.0,
                 "model.toy_sensitivity in (0,1)");
    expect_range(cfg.model.input_height >= 0 && cfg.model.input_width >= 0,
                 "model input resolution");
  }

  if (j.contains("paths")) {
    const json& o = j.at("paths");
    check_keys(o, "paths.",
               {"object_image", "object_mask", "content_image", "style_image", "scene_dir",
                "shape_mask"});
    read(o, "object_image", cfg.paths.object_image);
    read(o, "object_mask", cfg.paths.object_mask);
    read(o, "content_image", cfg.paths.content_image);
    read(o, "style_image", cfg.paths.style_image);
    read(o, "scene_dir", cfg.paths.scene_dir);
    read(o, "shape_mask", cfg.paths.shape_mask);
  }

  if (j.contains("object")) {
    const json& o = j.at("object");
    check_keys(o, "object.", {"height_m"});
    read(o, "height_m", cfg.object.height_m);
    expect_range(cfg.object.height_m > 0.0, "object.height_m > 0");
  }

  if (j.contains("region")) {
    const json& o = j.at("region");
    check_keys(o, "region.", {"rows", "cols", "tanh_k"});
    read(o, "rows", cfg.region.rows);
    read(o, "cols", cfg.region.cols);
    read(o, "tanh_k", cfg.region.tanh_k);
    expect_range(cfg.region.rows >= 1 && cfg.region.cols >= 1, "region grid >= 1x1");
    expect_range(cfg.region.tanh_k > 0.0, "region.tanh_k > 0");
  }

  if (j.contains("evaluate")) {
    const json& o = j.at("evaluate");
    check_keys(o, "evaluate.",
               {"distances_m", "laterals_m", "affected_threshold_m", "max_scenes",
                "max_error_samples"});
    read(o, "distances_m", cfg.evaluate.distances_m);
    read(o, "laterals_m", cfg.evaluate.laterals_m);
    read(o, "affected_threshold_m", cfg.evaluate.affected_threshold_m);
    read(o, "max_scenes", cfg.evaluate.max_scenes);
    read(o, "max_error_samples", cfg.evaluate.max_error_samples);
    expect_range(!cfg.evaluate.distances_m.empty(), "evaluate.distances_m nonempty");
    for (double d : cfg.evaluate.distances_m) expect_range(d > 0.0, "evaluate distance > 0");
    expect_range(!cfg.evaluate.laterals_m.empty(), "evaluate.laterals_m nonempty");
    expect_range(cfg.evaluate.affected_threshold_m > 0.0, "evaluate.affected_threshold_m > 0");
    expect_range(cfg.evaluate.max_scenes >= 0, "evaluate.max_scenes >= 0");
    expect_range(cfg.evaluate.max_error_samples >= 1, "evaluate.max_error_samples >= 1");
  }

  if (j.contains("defense")) {
    const json& o = j.at("defense");
    check_keys(o, "defense.",
               {"jpeg_quality", "bit_depths", "median_kernels", "noise_sigmas",
                "include_autoencoder", "autoencoder_model", "distance_m", "noise_seed"});
    read(o, "jpeg_quality", cfg.defense.jpeg_quality);
    read(o, "bit_depths", cfg.defense.bit_depths);
    read(o, "median_kernels", cfg.defense.median_kernels);
    read(o, "noise_sigmas", cfg.defense.noise_sigmas);
    read(o, "include_autoencoder", cfg.defense.include_autoencoder);
    read(o, "autoencoder_model", cfg.defense.autoencoder_model);
    read(o, "distance_m", cfg.defense.distance_m);
    read(o, "noise_seed", cfg.defense.noise_seed);
    for (int q : cfg.defense.jpeg_quality) expect_range(q >= 20 && q <= 90, "jpeg quality in [20,90]");
    for (int b : cfg.defense.bit_depths) expect_range(b >= 2 && b <= 8, "bit depth in [2,8]");
    for (int k : cfg.defense.median_kernels)
      expect_range(k >= 5 && k <= 25 && (k % 2 == 1), "median kernel odd in [5,25]");
    for (double s : cfg.defense.noise_sigmas)
      expect_range(s >= 0.01 && s <= 0.1, "noise sigma in [0.01,0.1]");
    expect_range(cfg.defense.distance_m > 0.0, "defense.distance_m > 0");
  }

  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  if (!std::filesystem::exists(path)) fail(Errc::missing_file, "config file not found: " + path);
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();

  const bool blank = std::all_of(text.begin(), text.end(),
                                 [](unsigned char c) { return std::isspace(c) != 0; });
  json j;
  if (blank) {
    j = json::object();
  } else {
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      fail(Errc::bad_config, "config parse error in " + path + ": " + e.what());
    }
  }
  return parse_run_config(j);
}

json config_to_json(const RunConfig& c) {
  return json{
      {"seed", c.seed},
      {"lambda", c.lambda},
      {"target_ratio", c.target_ratio},
      {"iterations", c.iterations},
      {"batch_size", c.batch_size},
      {"adv_mask_mode", c.adv_mask_mode},
      {"snapshot_every", c.snapshot_every},
      {"optimizer",
       {{"content_step", c.optimizer.content_step},
        {"lbfgs_history", c.optimizer.lbfgs_history},
        {"region_step", c.optimizer.region_step},
        {"adam_beta1", c.optimizer.adam_beta1},
        {"adam_beta2", c.optimizer.adam_beta2},
        {"adam_eps", c.optimizer.adam_eps}}},
      {"eot",
       {{"min_distance_m", c.eot.min_distance_m},
        {"max_distance_m", c.eot.max_distance_m},
        {"rotation_deg", c.eot.rotation_deg},
        {"brightness_delta", c.eot.brightness_delta},
        {"saturation_min", c.eot.saturation_min},
        {"saturation_max", c.eot.saturation_max}}},
      {"style",
       {{"enabled", c.style.enabled},
        {"weight_style", c.style.weight_style},
        {"weight_content", c.style.weight_content},
        {"weight_smoothness", c.style.weight_smoothness},
        {"weight_photorealism", c.style.weight_photorealism},
        {"extractor", c.style.extractor},
        {"toy_seed", c.style.toy_seed},
        {"smoothness_mode", c.style.smoothness_mode},
        {"matting_eps", c.style.matting_eps}}},
      {"model",
       {{"backend", c.model.backend},
        {"weights_dir", c.model.weights_dir},
        {"d_min", c.model.d_min},
        {"d_max", c.model.d_max},
        {"toy_seed", c.model.toy_seed},
        {"toy_near_m", c.model.toy_near_m},
        {"toy_far_m", c.model.toy_far_m},
        {"toy_sensitivity", c.model.toy_sensitivity},
        {"input_height", c.model.input_height},
        {"input_width", c.model.input_width}}},
      {"paths",
       {{"object_image", c.paths.object_image},
        {"object_mask", c.paths.object_mask},
        {"content_image", c.paths.content_image},
        {"style_image", c.paths.style_image},
        {"scene_dir", c.paths.scene_dir},
        {"shape_mask", c.paths.shape_mask}}},
      {"object", {{"height_m", c.object.height_m}}},
      {"region",
       {{"rows", c.region.rows}, {"cols", c.region.cols}, {"tanh_k", c.region.tanh_k}}},
      {"evaluate",
       {{"distances_m", c.evaluate.distances_m},
        {"laterals_m", c.evaluate.laterals_m},
        {"affected_threshold_m", c.evaluate.affected_threshold_m},
        {"max_scenes", c.evaluate.max_scenes},
        {"max_error_samples", c.evaluate.max_error_samples}}},
      {"defense",
       {{"jpeg_quality", c.defense.jpeg_quality},
        {"bit_depths", c.defense.bit_depths},
        {"median_kernels", c.defense.median_kernels},
        {"noise_sigmas", c.defense.noise_sigmas},
        {"include_autoencoder", c.defense.include_autoencoder},
        {"autoencoder_model", c.defense.autoencoder_model},
        {"distance_m", c.defense.distance_m},
        {"noise_seed", c.defense.noise_seed}}},
  };
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    fail(Errc::bad_config, "override must look like section.key=value: " + assignment);
  const std::string dotted = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  json* node = &j;
  std::stringstream ss(dotted);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) fail(Errc::bad_config, "bad override path: " + dotted);
    parts.push_back(part);
  }
  for (size_t i = 0; i + 1 < parts.size(); ++i) node = &((*node)[parts[i]]);

  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;  // bare strings are fine
  }
  (*node)[parts.back()] = parsed;
}

void require_attack_paths(const RunConfig& cfg) {
  auto need = [](const std::string& v, const char* key) {
    if (v.empty()) fail(Errc::missing_required, std::string("config requires paths.") + key);
  };
  need(cfg.paths.object_image, "object_image");
  need(cfg.paths.object_mask, "object_mask");
  need(cfg.paths.scene_dir, "scene_dir");
  if (cfg.style.enabled) need(cfg.paths.style_image, "style_image (style.enabled=true)");
}

}  // namespace depthpatch

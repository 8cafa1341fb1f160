#include "depthpatch/defenses.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <opencv2/imgcodecs.hpp>

namespace depthpatch {

void DefenseSpec::validate() const {
  switch (kind) {
    case DefenseKind::jpeg: {
      const int q = int(parameter);
      if (q < 20 || q > 90 || parameter != q)
        fail(Errc::out_of_range, "jpeg quality must be an integer in [20,90]");
      break;
    }
    case DefenseKind::bit_depth: {
      const int b = int(parameter);
      if (b < 2 || b > 8 || parameter != b)
        fail(Errc::out_of_range, "bit depth must be an integer in [2,8]");
      break;
    }
    case DefenseKind::median_blur: {
      const int k = int(parameter);
      if (k < 5 || k > 25 || k % 2 == 0 || parameter != k)
        fail(Errc::out_of_range, "median kernel must be odd in [5,25]");
      break;
    }
    case DefenseKind::gaussian_noise:
      if (parameter < 0.01 || parameter > 0.1)
        fail(Errc::out_of_range, "noise sigma must be in [0.01,0.1]");
      break;
    case DefenseKind::autoencoder:
      break;
  }
}

std::string DefenseSpec::family() const {
  switch (kind) {
    case DefenseKind::jpeg: return "jpeg";
    case DefenseKind::bit_depth: return "bit_depth";
    case DefenseKind::median_blur: return "median_blur";
    case DefenseKind::gaussian_noise: return "gaussian_noise";
    case DefenseKind::autoencoder: return "autoencoder";
  }
  return "?";
}

DefenseSpec parse_defense_spec(const std::string& text) {
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);

  DefenseSpec spec;
  if (head == "jpeg") {
    spec.kind = DefenseKind::jpeg;
  } else if (head == "bits" || head == "bit_depth") {
    spec.kind = DefenseKind::bit_depth;
  } else if (head == "median" || head == "median_blur") {
    spec.kind = DefenseKind::median_blur;
  } else if (head == "noise" || head == "gaussian_noise") {
    spec.kind = DefenseKind::gaussian_noise;
  } else if (head == "autoencoder") {
    spec.kind = DefenseKind::autoencoder;
    spec.model_path = arg;
    return spec;
  } else {
    fail(Errc::bad_config, "unknown defense: " + text);
  }

  if (arg.empty()) fail(Errc::bad_config, "defense needs a parameter: " + text);
  try {
    spec.parameter = std::stod(arg);
  } catch (const std::exception&) {
    fail(Errc::bad_config, "bad defense parameter: " + text);
  }
  spec.validate();
  return spec;
}

namespace {

ImageRGB jpeg_roundtrip(const ImageRGB& image, int quality) {
  cv::Mat m(image.h, image.w, CV_8UC3);
  for (int i = 0; i < image.h; ++i)
    for (int j = 0; j < image.w; ++j)
      m.at<cv::Vec3b>(i, j) =
          cv::Vec3b(uint8_t(std::lround(clamp01(image.at(i, j, 2)) * 255.0)),
                    uint8_t(std::lround(clamp01(image.at(i, j, 1)) * 255.0)),
                    uint8_t(std::lround(clamp01(image.at(i, j, 0)) * 255.0)));
  std::vector<uchar> buf;
  if (!cv::imencode(".jpg", m, buf, {cv::IMWRITE_JPEG_QUALITY, quality}))
    fail(Errc::runtime_failure, "jpeg encode failed");
  const cv::Mat back = cv::imdecode(buf, cv::IMREAD_COLOR);
  if (back.empty()) fail(Errc::runtime_failure, "jpeg decode failed");

  ImageRGB out(image.h, image.w);
  for (int i = 0; i < image.h; ++i)
    for (int j = 0; j < image.w; ++j) {
      const auto& px = back.at<cv::Vec3b>(i, j);
      out.at(i, j, 0) = px[2] / 255.0;
      out.at(i, j, 1) = px[1] / 255.0;
      out.at(i, j, 2) = px[0] / 255.0;
    }
  return out;
}

ImageRGB quantize_bits(const ImageRGB& image, int bits) {
  const double levels = double((1 << bits) - 1);
  ImageRGB out = image;
  for (double& v : out.v) v = std::round(clamp01(v) * levels) / levels;
  return out;
}

ImageRGB median_blur(const ImageRGB& image, int k) {
  const int r = k / 2;
  ImageRGB out(image.h, image.w);
  std::vector<double> window;
  window.reserve(size_t(k) * k);
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < image.h; ++i) {
      for (int j = 0; j < image.w; ++j) {
        window.clear();
        for (int di = -r; di <= r; ++di) {
          const int y = std::clamp(i + di, 0, image.h - 1);  // edge replication
          for (int dj = -r; dj <= r; ++dj) {
            const int x = std::clamp(j + dj, 0, image.w - 1);
            window.push_back(image.at(y, x, c));
          }
        }
        auto mid = window.begin() + window.size() / 2;
        std::nth_element(window.begin(), mid, window.end());
        out.at(i, j, c) = *mid;
      }
    }
  }
  return out;
}

ImageRGB add_noise(const ImageRGB& image, double sigma, uint64_t seed) {
  Rng rng(seed);
  ImageRGB out = image;
  for (double& v : out.v) v = clamp01(v + rng.normal(0.0, sigma));
  return out;
}

}  // namespace

ImageRGB apply_defense(const ImageRGB& image, const DefenseSpec& spec, uint64_t seed,
                       const AutoencoderFn& autoencoder) {
  spec.validate();
  switch (spec.kind) {
    case DefenseKind::jpeg:
      return jpeg_roundtrip(image, int(spec.parameter));
    case DefenseKind::bit_depth:
      return quantize_bits(image, int(spec.parameter));
    case DefenseKind::median_blur:
      return median_blur(image, int(spec.parameter));
    case DefenseKind::gaussian_noise:
      return add_noise(image, spec.parameter, seed);
    case DefenseKind::autoencoder:
      if (autoencoder) return autoencoder(image);
      if (!spec.model_path.empty()) {
        if (!std::filesystem::exists(spec.model_path))
          fail(Errc::missing_file, "autoencoder model not found: " + spec.model_path);
        fail(Errc::backend_unavailable,
             "autoencoder reconstruction needs an external callback (see README); "
             "model file alone is not runnable here");
      }
      std::cerr << "[defense] WARNING: no autoencoder model configured; "
                   "applying identity reconstruction\n";
      return image;
  }
  fail(Errc::invalid_argument, "unreachable defense kind");
}

std::vector<DefenseSpec> default_defense_grid(const DefenseConfig& cfg) {
  std::vector<DefenseSpec> grid;
  for (int q : cfg.jpeg_quality) grid.push_back({DefenseKind::jpeg, double(q), ""});
  for (int b : cfg.bit_depths) grid.push_back({DefenseKind::bit_depth, double(b), ""});
  for (int k : cfg.median_kernels) grid.push_back({DefenseKind::median_blur, double(k), ""});
  for (double s : cfg.noise_sigmas) grid.push_back({DefenseKind::gaussian_noise, s, ""});
  if (cfg.include_autoencoder)
    grid.push_back({DefenseKind::autoencoder, 0.0, cfg.autoencoder_model});
  return grid;
}

std::vector<DefenseRow> defense_eval(const AttackAssets& assets, const PatchArtifacts& patch,
                                     const DepthModel& model,
                                     const std::vector<DefenseSpec>& grid, double distance_m,
                                     uint64_t noise_seed, int max_scenes,
                                     const AutoencoderFn& autoencoder) {
  const PhysicalObject& obj = assets.object;
  const Bbox box = mask_bbox(obj.mask);
  const BinaryMask* shape = patch.shape ? &*patch.shape : nullptr;
  const PatchMaskCtx mctx =
      build_patch_mask(patch.thetas, obj.image.w, obj.image.h, patch.tanh_k, shape);
  const ImageRGB adv_object = apply_patch(obj.image, mctx.values, patch.patch);

  const int n_scenes = max_scenes > 0 ? std::min<int>(max_scenes, int(assets.scenes.size()))
                                      : int(assets.scenes.size());

  // Fixed placement per scene, shared by every defense row.
  struct Prepared {
    ImageRGB benign, adv;
    BinaryMask mask;
    DepthGrid benign_undefended;
  };
  std::vector<Prepared> prepared;
  for (int si = 0; si < n_scenes; ++si) {
    const SceneAsset& scene = assets.scenes[si];
    TransformSpec spec;
    spec.scale = scale_for_distance(scene.camera, obj.height_m, double(box.height()), distance_m);
    const PhysicalObject benign_t =
        apply_transform(PhysicalObject{obj.image, obj.mask, obj.height_m}, spec);
    const Bbox tbox = mask_bbox(benign_t.mask);
    spec.horizontal_col = std::max(0, (scene.background.w - tbox.width()) / 2);

    const PhysicalObject adv_t =
        apply_transform(PhysicalObject{adv_object, obj.mask, obj.height_m}, spec);
    const Composite benign_c = paste(scene.background, benign_t, scene.camera, spec.horizontal_col);
    const Composite adv_c = paste(scene.background, adv_t, scene.camera, spec.horizontal_col);

    Prepared p;
    p.benign = benign_c.scene_adv;
    p.adv = adv_c.scene_adv;
    p.mask = benign_c.scene_mask;
    p.benign_undefended = predict_depth(model, benign_c.scene_adv);
    prepared.push_back(std::move(p));
  }
  if (prepared.empty()) fail(Errc::invalid_argument, "defense_eval: no scenes");

  std::vector<DefenseRow> rows;
  for (const DefenseSpec& spec : grid) {
    DefenseRow row;
    row.family = spec.family();
    row.parameter = spec.parameter;

    double benign_sum = 0.0, attack_sum = 0.0;
    for (const Prepared& p : prepared) {
      const ImageRGB benign_def = apply_defense(p.benign, spec, noise_seed, autoencoder);
      const ImageRGB adv_def = apply_defense(p.adv, spec, noise_seed, autoencoder);
      const DepthGrid d_benign_def = predict_depth(model, benign_def);
      const DepthGrid d_adv_def = predict_depth(model, adv_def);
      benign_sum += mean_depth_error(p.benign_undefended, d_benign_def, p.mask);
      attack_sum += mean_depth_error(d_benign_def, d_adv_def, p.mask);
    }
    row.benign_e_d = benign_sum / double(prepared.size());
    row.attack_e_d = attack_sum / double(prepared.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_defense_csv(const std::vector<DefenseRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::io_failure, "cannot write " + path);
  out << "family,parameter,benign_e_d,attack_e_d\n";
  for (const DefenseRow& r : rows)
    out << r.family << ',' << r.parameter << ',' << r.benign_e_d << ',' << r.attack_e_d << '\n';
}

}  // namespace depthpatch

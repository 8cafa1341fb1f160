#include "depthpatch/mde_adapter.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "depthpatch/resample.hpp"

namespace depthpatch {

using nnet::LayerKind;
using nnet::SequentialNet;
using nnet::Tensor3;

namespace {

// Fixed per-channel 5x5 box blur. Keeps the model responsive to coherent
// low-frequency patterns while damping pixel-level noise.
nnet::ConvLayer box_blur(int channels, int k) {
  nnet::ConvLayer blur;
  blur.in_c = channels;
  blur.out_c = channels;
  blur.k = k;
  blur.pad = k / 2;
  blur.weight.assign(size_t(channels) * channels * k * k, 0.0);
  blur.bias.assign(channels, 0.0);
  const double w = 1.0 / double(k * k);
  for (int c = 0; c < channels; ++c)
    for (int t = 0; t < k * k; ++t)
      blur.weight[((size_t(c) * channels + c) * k * k) + t] = w;
  return blur;
}

}  // namespace

ToyDepthModel::ToyDepthModel(const ModelConfig& cfg)
    : d_min_(cfg.d_min),
      d_max_(cfg.d_max),
      near_m_(cfg.toy_near_m),
      far_m_(cfg.toy_far_m),
      sensitivity_(cfg.toy_sensitivity),
      fixed_h_(cfg.input_height),
      fixed_w_(cfg.input_width) {
  if (!(d_min_ > 0.0) || !(d_max_ > d_min_)) fail(Errc::out_of_range, "bad toy depth range");
  Rng rng(cfg.toy_seed);
  net_.layers = {
      {LayerKind::conv, box_blur(3, 5)},
      {LayerKind::conv, nnet::random_conv(3, 8, 3, 1, rng, 1.4)},
      {LayerKind::tanh_act, {}},
      {LayerKind::conv, nnet::random_conv(8, 8, 3, 1, rng, 1.4)},
      {LayerKind::tanh_act, {}},
      {LayerKind::conv, nnet::random_conv(8, 1, 3, 1, rng, 1.4)},
      {LayerKind::tanh_act, {}},
  };
}

void ToyDepthModel::check_resolution(const ImageRGB& image) const {
  if (image.h < 1 || image.w < 1) fail(Errc::invalid_argument, "empty image");
  if ((fixed_h_ > 0 && image.h != fixed_h_) || (fixed_w_ > 0 && image.w != fixed_w_))
    fail(Errc::dimension_mismatch,
         "resolution unsupported by model (expected " + std::to_string(fixed_h_) + "x" +
             std::to_string(fixed_w_) + ")");
}

Tensor3 ToyDepthModel::modulation(const ImageRGB& image, SequentialNet::Trace* trace) const {
  Tensor3 in = nnet::image_to_tensor(image);
  for (double& x : in.v) x -= 0.5;
  return net_.forward(in, trace);
}

DepthGrid ToyDepthModel::predict(const ImageRGB& image) const {
  check_resolution(image);
  const Tensor3 u = modulation(image, nullptr);

  DepthGrid out;
  out.values = Grid(image.h, image.w);
  out.camera_id = name();
  for (int i = 0; i < image.h; ++i) {
    const double rho = image.h > 1 ? double(i) / (image.h - 1) : 1.0;
    const double prior = far_m_ + (near_m_ - far_m_) * rho;
    for (int j = 0; j < image.w; ++j) {
      // bounded linear link: u in (-1,1) modulates the row prior
      const double depth = prior * (1.0 - sensitivity_ * u.at(0, i, j));
      out.values.at(i, j) = std::clamp(depth, d_min_, d_max_);
    }
  }
  return out;
}

ImageRGB ToyDepthModel::input_gradient(const ImageRGB& image, const Grid& upstream) const {
  check_resolution(image);
  if (upstream.h != image.h || upstream.w != image.w)
    fail(Errc::dimension_mismatch, "depth gradient: upstream dims mismatch");

  SequentialNet::Trace trace;
  const Tensor3 u = modulation(image, &trace);

  // depth = prior(i) * (1 - s*u), so d(depth)/du = -s*prior where unclamped.
  Tensor3 gu(1, image.h, image.w);
  for (int i = 0; i < image.h; ++i) {
    const double rho = image.h > 1 ? double(i) / (image.h - 1) : 1.0;
    const double prior = far_m_ + (near_m_ - far_m_) * rho;
    for (int j = 0; j < image.w; ++j) {
      const double depth = prior * (1.0 - sensitivity_ * u.at(0, i, j));
      if (depth <= d_min_ || depth >= d_max_) continue;
      gu.at(0, i, j) = upstream.at(i, j) * (-sensitivity_ * prior);
    }
  }

  const Tensor3 gi = net_.backward(trace, {{int(net_.layers.size()), gu}});
  return nnet::tensor_to_image(gi);
}

LetterboxedModel::LetterboxedModel(std::shared_ptr<const DepthModel> inner, int box_h, int box_w)
    : inner_(std::move(inner)), box_h_(box_h), box_w_(box_w) {
  if (box_h_ < 1 || box_w_ < 1) fail(Errc::invalid_argument, "letterbox needs a positive box");
}

LetterboxedModel::Fit LetterboxedModel::fit_for(int h, int w) const {
  const double f = std::min(double(box_h_) / h, double(box_w_) / w);
  Fit fit;
  fit.sh = std::max(1, std::min(box_h_, int(std::lround(h * f))));
  fit.sw = std::max(1, std::min(box_w_, int(std::lround(w * f))));
  return fit;
}

DepthGrid LetterboxedModel::predict(const ImageRGB& image) const {
  const Fit fit = fit_for(image.h, image.w);
  const ImageRGB scaled = resize_bilinear(image, fit.sh, fit.sw);
  ImageRGB boxed(box_h_, box_w_, 0.5);
  for (int i = 0; i < fit.sh; ++i)
    for (int j = 0; j < fit.sw; ++j)
      for (int c = 0; c < 3; ++c) boxed.at(i, j, c) = scaled.at(i, j, c);

  const DepthGrid inner_depth = inner_->predict(boxed);
  Grid content(fit.sh, fit.sw);
  for (int i = 0; i < fit.sh; ++i)
    for (int j = 0; j < fit.sw; ++j) content.at(i, j) = inner_depth.at(i, j);

  DepthGrid out;
  out.values = resize_bilinear(content, image.h, image.w);
  out.camera_id = inner_depth.camera_id;
  return out;
}

ImageRGB LetterboxedModel::input_gradient(const ImageRGB& image, const Grid& upstream) const {
  const Fit fit = fit_for(image.h, image.w);
  const ImageRGB scaled = resize_bilinear(image, fit.sh, fit.sw);
  ImageRGB boxed(box_h_, box_w_, 0.5);
  for (int i = 0; i < fit.sh; ++i)
    for (int j = 0; j < fit.sw; ++j)
      for (int c = 0; c < 3; ++c) boxed.at(i, j, c) = scaled.at(i, j, c);

  // depth resize backward: upstream on the original grid -> content grid
  const Grid g_content = resize_bilinear_vjp(upstream, fit.sh, fit.sw);
  Grid g_boxed(box_h_, box_w_);
  for (int i = 0; i < fit.sh; ++i)
    for (int j = 0; j < fit.sw; ++j) g_boxed.at(i, j) = g_content.at(i, j);

  const ImageRGB g_inner = inner_->input_gradient(boxed, g_boxed);
  ImageRGB g_scaled(fit.sh, fit.sw);
  for (int i = 0; i < fit.sh; ++i)
    for (int j = 0; j < fit.sw; ++j)
      for (int c = 0; c < 3; ++c) g_scaled.at(i, j, c) = g_inner.at(i, j, c);

  return resize_bilinear_vjp(g_scaled, image.h, image.w);
}

DepthGrid predict_depth(const DepthModel& model, const ImageRGB& image) {
  if (image.h < 1 || image.w < 1) fail(Errc::invalid_argument, "predict_depth: empty image");
  DepthGrid out = model.predict(image);
  if (out.values.h != image.h || out.values.w != image.w)
    fail(Errc::runtime_failure, "model violated the dims contract");
  return out;
}

ImageRGB depth_gradient(const DepthModel& model, const ImageRGB& image, const Grid& upstream) {
  if (upstream.h != image.h || upstream.w != image.w)
    fail(Errc::dimension_mismatch, "depth_gradient: upstream dims must match the image");
  return model.input_gradient(image, upstream);
}

std::shared_ptr<DepthModel> make_depth_model(const ModelConfig& cfg) {
  if (cfg.backend == "toy") {
    if (cfg.input_height > 0 && cfg.input_width > 0) {
      ModelConfig inner_cfg = cfg;
      auto inner = std::make_shared<ToyDepthModel>(inner_cfg);
      return std::make_shared<LetterboxedModel>(inner, cfg.input_height, cfg.input_width);
    }
    return std::make_shared<ToyDepthModel>(cfg);
  }

  // Pretrained backends are consumed through this interface but need an
  // external inference plugin; never fall back silently.
  std::string hint;
  if (cfg.weights_dir.empty()) {
    hint = "set model.weights_dir and provide an inference plugin";
  } else if (!std::filesystem::exists(std::filesystem::path(cfg.weights_dir) / cfg.backend)) {
    hint = "no '" + cfg.backend + "' weights under " + cfg.weights_dir;
  } else {
    hint = "weights found, but this build has no runtime for '" + cfg.backend +
           "'; implement DepthModel against them (see README)";
  }
  fail(Errc::backend_unavailable, "depth backend '" + cfg.backend + "' unavailable: " + hint);
}

}  // namespace depthpatch

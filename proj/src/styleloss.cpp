#include "depthpatch/styleloss.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

namespace depthpatch {

using nnet::LayerKind;
using nnet::SequentialNet;
using nnet::Tensor3;
using nlohmann::json;

namespace {

Eigen::Map<const Eigen::MatrixXd> as_matrix(const Tensor3& t) {
  // column p of the C x N view is pixel p across channels? Tensor3 is CHW, so
  // channel c occupies a contiguous run; map as N x C then transpose lazily.
  return Eigen::Map<const Eigen::MatrixXd>(t.v.data(), size_t(t.h) * t.w, t.c);
}

void add_image_grad(ImageRGB& acc, const ImageRGB& g) {
  for (size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += g.v[i];
}

}  // namespace

FeatureMaps IdentityExtractor::extract(const ImageRGB& image) const {
  FeatureMaps f;
  f.layers.push_back(nnet::image_to_tensor(image));
  return f;
}

ImageRGB IdentityExtractor::input_gradient(const ImageRGB& image,
                                           const std::vector<Tensor3>& layer_grads) const {
  ImageRGB g(image.h, image.w);
  if (!layer_grads.empty() && layer_grads[0].c == 3) {
    const ImageRGB gi = nnet::tensor_to_image(layer_grads[0]);
    add_image_grad(g, gi);
  }
  return g;
}

ToyFeatureExtractor::ToyFeatureExtractor(uint64_t seed) {
  Rng rng(seed);
  net_.layers = {
      {LayerKind::conv, nnet::random_conv(3, 4, 3, 1, rng, 1.0)},
      {LayerKind::tanh_act, {}},
      {LayerKind::conv, nnet::random_conv(4, 4, 3, 1, rng, 1.0)},
      {LayerKind::tanh_act, {}},
      {LayerKind::conv, nnet::random_conv(4, 4, 3, 1, rng, 1.0)},
      {LayerKind::tanh_act, {}},
  };
  act_taps_ = {2, 4, 6};  // after each tanh
}

FeatureMaps ToyFeatureExtractor::extract(const ImageRGB& image) const {
  SequentialNet::Trace trace;
  net_.forward(nnet::image_to_tensor(image), &trace);
  FeatureMaps f;
  for (int idx : act_taps_) f.layers.push_back(trace.acts[idx]);
  return f;
}

ImageRGB ToyFeatureExtractor::input_gradient(const ImageRGB& image,
                                             const std::vector<Tensor3>& layer_grads) const {
  SequentialNet::Trace trace;
  net_.forward(nnet::image_to_tensor(image), &trace);
  std::vector<std::pair<int, Tensor3>> upstream;
  for (size_t i = 0; i < layer_grads.size() && i < act_taps_.size(); ++i)
    if (layer_grads[i].c > 0) upstream.emplace_back(act_taps_[i], layer_grads[i]);
  const Tensor3 g = net_.backward(trace, upstream);
  return nnet::tensor_to_image(g);
}

std::unique_ptr<CnnFeatureExtractor> CnnFeatureExtractor::load(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  if (!fs::exists(manifest_path))
    fail(Errc::backend_unavailable, "feature backbone manifest not found: " + manifest_path);

  json j;
  {
    std::ifstream in(manifest_path);
    try {
      in >> j;
    } catch (const json::exception& e) {
      fail(Errc::corrupt_stream, "bad backbone manifest: " + std::string(e.what()));
    }
  }

  auto ext = std::make_unique<CnnFeatureExtractor>();
  ext->name_ = j.value("name", "cnn");

  const fs::path bin_path = fs::path(manifest_path).parent_path() / j.at("weights_bin").get<std::string>();
  if (!fs::exists(bin_path))
    fail(Errc::backend_unavailable, "backbone weights missing: " + bin_path.string());
  std::ifstream bin(bin_path, std::ios::binary);

  auto read_floats = [&](std::vector<double>& dst, size_t n) {
    std::vector<float> buf(n);
    bin.read(reinterpret_cast<char*>(buf.data()), std::streamsize(n * sizeof(float)));
    if (!bin) fail(Errc::size_mismatch, "backbone weights file shorter than manifest requires");
    dst.assign(buf.begin(), buf.end());
  };

  for (const json& lj : j.at("layers")) {
    const std::string type = lj.at("type").get<std::string>();
    if (type == "conv") {
      nnet::ConvLayer conv;
      conv.in_c = lj.at("in").get<int>();
      conv.out_c = lj.at("out").get<int>();
      conv.k = lj.value("k", 3);
      conv.pad = lj.value("pad", conv.k / 2);
      read_floats(conv.weight, size_t(conv.out_c) * conv.in_c * conv.k * conv.k);
      read_floats(conv.bias, size_t(conv.out_c));
      ext->net_.layers.push_back({LayerKind::conv, std::move(conv)});
    } else if (type == "relu") {
      ext->net_.layers.push_back({LayerKind::relu, {}});
    } else if (type == "maxpool") {
      ext->net_.layers.push_back({LayerKind::maxpool2, {}});
    } else {
      fail(Errc::bad_config, "unknown backbone layer type: " + type);
    }
  }

  ext->act_taps_ = j.at("taps").get<std::vector<int>>();
  ext->style_ = j.at("style_taps").get<std::vector<int>>();
  ext->content_ = j.at("content_taps").get<std::vector<int>>();
  for (int t : ext->act_taps_)
    if (t < 0 || t > int(ext->net_.layers.size()))
      fail(Errc::bad_config, "backbone tap index out of range");
  for (int s : ext->style_)
    if (s < 0 || s >= int(ext->act_taps_.size())) fail(Errc::bad_config, "style tap out of range");
  for (int c : ext->content_)
    if (c < 0 || c >= int(ext->act_taps_.size())) fail(Errc::bad_config, "content tap out of range");
  return ext;
}

FeatureMaps CnnFeatureExtractor::extract(const ImageRGB& image) const {
  SequentialNet::Trace trace;
  net_.forward(nnet::image_to_tensor(image), &trace);
  FeatureMaps f;
  for (int idx : act_taps_) f.layers.push_back(trace.acts[idx]);
  return f;
}

ImageRGB CnnFeatureExtractor::input_gradient(const ImageRGB& image,
                                             const std::vector<Tensor3>& layer_grads) const {
  SequentialNet::Trace trace;
  net_.forward(nnet::image_to_tensor(image), &trace);
  std::vector<std::pair<int, Tensor3>> upstream;
  for (size_t i = 0; i < layer_grads.size() && i < act_taps_.size(); ++i)
    if (layer_grads[i].c > 0) upstream.emplace_back(act_taps_[i], layer_grads[i]);
  const Tensor3 g = net_.backward(trace, upstream);
  return nnet::tensor_to_image(g);
}

std::unique_ptr<FeatureExtractor> make_feature_extractor(const StyleConfig& cfg,
                                                         const std::string& weights_dir) {
  if (cfg.extractor == "identity") return std::make_unique<IdentityExtractor>();
  if (cfg.extractor == "toy") return std::make_unique<ToyFeatureExtractor>(cfg.toy_seed);
  if (cfg.extractor == "vgg16" || cfg.extractor == "vgg19") {
    if (weights_dir.empty())
      fail(Errc::backend_unavailable,
           "extractor '" + cfg.extractor + "' needs model.weights_dir with converted weights");
    const auto manifest =
        std::filesystem::path(weights_dir) / (cfg.extractor + ".json");
    return CnnFeatureExtractor::load(manifest.string());
  }
  fail(Errc::bad_config, "unknown feature extractor: " + cfg.extractor);
}

Eigen::MatrixXd gram_matrix(const Tensor3& f) {
  const auto m = as_matrix(f);  // N x C
  const double norm = double(f.c) * double(f.h) * double(f.w);
  return (m.transpose() * m) / norm;  // C x C
}

StyleTarget build_style_target(const FeatureExtractor& extractor, const ImageRGB& style_image) {
  const FeatureMaps maps = extractor.extract(style_image);
  StyleTarget target;
  target.grams.resize(maps.layers.size());
  for (int idx : extractor.style_indices()) target.grams[idx] = gram_matrix(maps.layers[idx]);
  return target;
}

double style_loss(const ImageRGB& x, const StyleTarget& target, const FeatureExtractor& extractor,
                  ImageRGB* grad) {
  const FeatureMaps maps = extractor.extract(x);
  if (target.grams.size() != maps.layers.size())
    fail(Errc::dimension_mismatch, "style target does not match the extractor");

  double loss = 0.0;
  std::vector<Tensor3> layer_grads(maps.layers.size());
  for (int idx : extractor.style_indices()) {
    const Tensor3& f = maps.layers[idx];
    const Eigen::MatrixXd g = gram_matrix(f);
    const Eigen::MatrixXd diff = g - target.grams[idx];
    loss += diff.squaredNorm();

    if (grad) {
      const auto fm = as_matrix(f);  // N x C
      const double norm = double(f.c) * double(f.h) * double(f.w);
      // dL/dF = (4 / norm) * F * diff  (N x C layout)
      const Eigen::MatrixXd gf = (4.0 / norm) * (fm * diff);
      Tensor3 lg(f.c, f.h, f.w);
      Eigen::Map<Eigen::MatrixXd>(lg.v.data(), size_t(f.h) * f.w, f.c) = gf;
      layer_grads[idx] = std::move(lg);
    }
  }
  if (grad) add_image_grad(*grad, extractor.input_gradient(x, layer_grads));
  return loss;
}

double content_loss(const ImageRGB& x, const ImageRGB& x_ref, const FeatureExtractor& extractor,
                    ImageRGB* grad) {
  if (!x.same_dims(x_ref)) fail(Errc::dimension_mismatch, "content_loss: dims mismatch");
  const FeatureMaps maps = extractor.extract(x);
  const FeatureMaps ref = extractor.extract(x_ref);

  double loss = 0.0;
  std::vector<Tensor3> layer_grads(maps.layers.size());
  for (int idx : extractor.content_indices()) {
    const Tensor3& f = maps.layers[idx];
    const Tensor3& fr = ref.layers[idx];
    Tensor3 lg(f.c, f.h, f.w);
    for (size_t i = 0; i < f.v.size(); ++i) {
      const double d = f.v[i] - fr.v[i];
      loss += d * d;
      lg.v[i] = 2.0 * d;
    }
    if (grad) layer_grads[idx] = std::move(lg);
  }
  if (grad) add_image_grad(*grad, extractor.input_gradient(x, layer_grads));
  return loss;
}

MattingLaplacian build_matting_laplacian(const ImageRGB& x, double eps) {
  if (eps <= 0.0) fail(Errc::out_of_range, "matting eps must be > 0");
  if (x.h < 3 || x.w < 3) fail(Errc::dimension_mismatch, "image smaller than the 3x3 window");

  const int h = x.h, w = x.w;
  const int win = 9;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(size_t(h) * w * 81 / 4);

  for (int ci = 1; ci < h - 1; ++ci) {
    for (int cj = 1; cj < w - 1; ++cj) {
      int px[9];
      Eigen::Matrix<double, 9, 3> colors;
      int n = 0;
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          const int i = ci + di, j = cj + dj;
          px[n] = i * w + j;
          colors(n, 0) = x.at(i, j, 0);
          colors(n, 1) = x.at(i, j, 1);
          colors(n, 2) = x.at(i, j, 2);
          ++n;
        }

      const Eigen::Vector3d mu = colors.colwise().mean();
      Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
      for (int p = 0; p < win; ++p) {
        const Eigen::Vector3d d = colors.row(p).transpose() - mu;
        cov += d * d.transpose();
      }
      cov /= double(win);
      const Eigen::Matrix3d a_inv =
          (cov + (eps / win) * Eigen::Matrix3d::Identity()).inverse();

      for (int p = 0; p < win; ++p) {
        const Eigen::Vector3d dp = colors.row(p).transpose() - mu;
        for (int q = 0; q < win; ++q) {
          const Eigen::Vector3d dq = colors.row(q).transpose() - mu;
          const double val =
              (p == q ? 1.0 : 0.0) - (1.0 + dp.dot(a_inv * dq)) / double(win);
          triplets.emplace_back(px[p], px[q], val);
        }
      }
    }
  }

  MattingLaplacian lap;
  lap.h = h;
  lap.w = w;
  lap.m.resize(h * w, h * w);
  lap.m.setFromTriplets(triplets.begin(), triplets.end());
  return lap;
}

double photorealism_loss(const ImageRGB& x, const MattingLaplacian& lap, ImageRGB* grad) {
  if (x.h != lap.h || x.w != lap.w)
    fail(Errc::size_mismatch, "photorealism_loss: image does not match the Laplacian");
  const int n = lap.h * lap.w;
  double loss = 0.0;
  for (int c = 0; c < 3; ++c) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < lap.h; ++i)
      for (int j = 0; j < lap.w; ++j) v[i * lap.w + j] = x.at(i, j, c);
    const Eigen::VectorXd mv = lap.m * v;
    loss += v.dot(mv);
    if (grad) {
      for (int i = 0; i < lap.h; ++i)
        for (int j = 0; j < lap.w; ++j) grad->at(i, j, c) += 2.0 * mv[i * lap.w + j];
    }
  }
  return loss;
}

double smoothness_loss(const ImageRGB& x_adv, const ImageRGB& x_ref, SmoothnessMode mode,
                       ImageRGB* grad) {
  if (!x_adv.same_dims(x_ref)) fail(Errc::dimension_mismatch, "smoothness_loss: dims mismatch");
  const ImageRGB& nb = (mode == SmoothnessMode::paper) ? x_ref : x_adv;
  const int h = x_adv.h, w = x_adv.w;

  double loss = 0.0;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const bool down = i + 1 < h, right = j + 1 < w;
        if (!down && !right) continue;
        const double v = x_adv.at(i, j, c);
        const double dd = down ? v - nb.at(i + 1, j, c) : 0.0;
        const double dr = right ? v - nb.at(i, j + 1, c) : 0.0;
        const double t = dd * dd + dr * dr;
        const double r = std::sqrt(t);
        loss += r;
        if (grad && r > 1e-12) {
          grad->at(i, j, c) += (dd + dr) / r;
          if (mode == SmoothnessMode::tv) {
            if (down) grad->at(i + 1, j, c) -= dd / r;
            if (right) grad->at(i, j + 1, c) -= dr / r;
          }
        }
      }
    }
  }
  return loss;
}

StyleBreakdown style_transfer_loss(const ImageRGB& x_adv, const ImageRGB& x_content,
                                   const StyleTarget& target, const FeatureExtractor& extractor,
                                   const MattingLaplacian& lap, const StyleWeights& weights,
                                   SmoothnessMode mode, ImageRGB* grad) {
  StyleBreakdown out;

  ImageRGB gs(x_adv.h, x_adv.w), gc(x_adv.h, x_adv.w), gt(x_adv.h, x_adv.w), gr(x_adv.h, x_adv.w);
  out.style = style_loss(x_adv, target, extractor, grad ? &gs : nullptr);
  out.content = content_loss(x_adv, x_content, extractor, grad ? &gc : nullptr);
  out.smoothness = smoothness_loss(x_adv, x_content, mode, grad ? &gt : nullptr);
  out.photorealism = photorealism_loss(x_adv, lap, grad ? &gr : nullptr);
  out.total = weights.style * out.style + weights.content * out.content +
              weights.smoothness * out.smoothness + weights.photorealism * out.photorealism;

  if (grad) {
    for (size_t i = 0; i < grad->v.size(); ++i)
      grad->v[i] += weights.style * gs.v[i] + weights.content * gc.v[i] +
                    weights.smoothness * gt.v[i] + weights.photorealism * gr.v[i];
  }
  return out;
}

}  // namespace depthpatch

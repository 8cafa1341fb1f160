#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "depthpatch/config.hpp"
#include "depthpatch/core.hpp"
#include "depthpatch/nnet.hpp"

namespace depthpatch {

struct FeatureMaps {
  std::vector<nnet::Tensor3> layers;
};

// Deterministic multi-tap feature extractor with a VJP back to the image.
// Gradients are supplied per tapped layer; empty tensors are skipped.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::string name() const = 0;
  virtual FeatureMaps extract(const ImageRGB& image) const = 0;
  virtual std::vector<int> style_indices() const = 0;    // indices into FeatureMaps.layers
  virtual std::vector<int> content_indices() const = 0;
  virtual ImageRGB input_gradient(const ImageRGB& image,
                                  const std::vector<nnet::Tensor3>& layer_grads) const = 0;
};

// The raw image as its own single feature layer. Handy for hand-computed
// oracles.
class IdentityExtractor : public FeatureExtractor {
 public:
  std::string name() const override { return "identity"; }
  FeatureMaps extract(const ImageRGB& image) const override;
  std::vector<int> style_indices() const override { return {0}; }
  std::vector<int> content_indices() const override { return {0}; }
  ImageRGB input_gradient(const ImageRGB& image,
                          const std::vector<nnet::Tensor3>& layer_grads) const override;
};

// Fixed random convolutions, seeded; three tanh taps for style, the middle
// one for content.
class ToyFeatureExtractor : public FeatureExtractor {
 public:
  explicit ToyFeatureExtractor(uint64_t seed);
  std::string name() const override { return "toy"; }
  FeatureMaps extract(const ImageRGB& image) const override;
  std::vector<int> style_indices() const override { return {0, 1, 2}; }
  std::vector<int> content_indices() const override { return {1}; }
  ImageRGB input_gradient(const ImageRGB& image,
                          const std::vector<nnet::Tensor3>& layer_grads) const override;

 private:
  nnet::SequentialNet net_;
  std::vector<int> act_taps_;  // activation indices inside the net
};

// Sequential conv/relu/maxpool backbone loaded from a converted-weights
// manifest (see README for the format). Covers the classification backbones
// used for real runs.
class CnnFeatureExtractor : public FeatureExtractor {
 public:
  static std::unique_ptr<CnnFeatureExtractor> load(const std::string& manifest_path);

  std::string name() const override { return name_; }
  FeatureMaps extract(const ImageRGB& image) const override;
  std::vector<int> style_indices() const override { return style_; }
  std::vector<int> content_indices() const override { return content_; }
  ImageRGB input_gradient(const ImageRGB& image,
                          const std::vector<nnet::Tensor3>& layer_grads) const override;

 private:
  std::string name_;
  nnet::SequentialNet net_;
  std::vector<int> act_taps_;
  std::vector<int> style_, content_;
};

std::unique_ptr<FeatureExtractor> make_feature_extractor(const StyleConfig& cfg,
                                                         const std::string& weights_dir);

// Per-layer Gram matrices of the style image, normalized by channels*positions.
struct StyleTarget {
  std::vector<Eigen::MatrixXd> grams;  // aligned with FeatureMaps.layers; empty if untapped
};

Eigen::MatrixXd gram_matrix(const nnet::Tensor3& features);
StyleTarget build_style_target(const FeatureExtractor& extractor, const ImageRGB& style_image);

// Sum over style layers of ||G(F_l(x_s)) - G(F_l(x))||_F^2.
double style_loss(const ImageRGB& x, const StyleTarget& target, const FeatureExtractor& extractor,
                  ImageRGB* grad = nullptr);

// Sum over content layers of ||F_l(x_ref) - F_l(x)||^2.
double content_loss(const ImageRGB& x, const ImageRGB& x_ref, const FeatureExtractor& extractor,
                    ImageRGB* grad = nullptr);

// Closed-form matting Laplacian over 3x3 windows: sparse, symmetric, PSD,
// zero row sums; constant images lie in the nullspace.
struct MattingLaplacian {
  int h = 0, w = 0;
  Eigen::SparseMatrix<double> m;
};

MattingLaplacian build_matting_laplacian(const ImageRGB& x, double eps = 1e-5);

// sum_c V_c(x)^T M V_c(x); gradient per channel is 2 M V_c.
double photorealism_loss(const ImageRGB& x, const MattingLaplacian& lap, ImageRGB* grad = nullptr);

enum class SmoothnessMode { paper, tv };

// Cross-difference smoothness as printed (x' against x's down/right
// neighbors); tv mode substitutes x' for x.
double smoothness_loss(const ImageRGB& x_adv, const ImageRGB& x_ref,
                       SmoothnessMode mode = SmoothnessMode::paper, ImageRGB* grad = nullptr);

struct StyleWeights {
  double style = 1e2;
  double content = 1.0;
  double smoothness = 1e-2;
  double photorealism = 1e-4;
};

struct StyleBreakdown {
  double style = 0.0;
  double content = 0.0;
  double smoothness = 0.0;
  double photorealism = 0.0;
  double total = 0.0;  // weighted sum
};

StyleBreakdown style_transfer_loss(const ImageRGB& x_adv, const ImageRGB& x_content,
                                   const StyleTarget& target, const FeatureExtractor& extractor,
                                   const MattingLaplacian& lap, const StyleWeights& weights,
                                   SmoothnessMode mode = SmoothnessMode::paper,
                                   ImageRGB* grad = nullptr);

}  // namespace depthpatch

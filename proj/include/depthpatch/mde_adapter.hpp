#pragma once

#include <memory>
#include <string>

#include "depthpatch/config.hpp"
#include "depthpatch/core.hpp"
#include "depthpatch/nnet.hpp"

namespace depthpatch {

// Uniform depth-inference contract. Implementations return metric depth in
// [d_min, d_max], are deterministic, and expose a vector-Jacobian product
// w.r.t. the input pixels. Output dims always equal input dims.
class DepthModel {
 public:
  virtual ~DepthModel() = default;
  virtual std::string name() const = 0;
  virtual double depth_min() const = 0;
  virtual double depth_max() const = 0;
  // 0 means the model accepts any resolution.
  virtual int input_height() const { return 0; }
  virtual int input_width() const { return 0; }
  virtual DepthGrid predict(const ImageRGB& image) const = 0;
  virtual ImageRGB input_gradient(const ImageRGB& image, const Grid& upstream) const = 0;
};

// Desk-scale stand-in: a fixed seeded 3-layer conv stack modulating a
// row-linear depth prior (lower rows nearer). Differentiable and deterministic.
class ToyDepthModel : public DepthModel {
 public:
  explicit ToyDepthModel(const ModelConfig& cfg);

  std::string name() const override { return "toy"; }
  double depth_min() const override { return d_min_; }
  double depth_max() const override { return d_max_; }
  int input_height() const override { return fixed_h_; }
  int input_width() const override { return fixed_w_; }
  DepthGrid predict(const ImageRGB& image) const override;
  ImageRGB input_gradient(const ImageRGB& image, const Grid& upstream) const override;

 private:
  nnet::Tensor3 modulation(const ImageRGB& image, nnet::SequentialNet::Trace* trace) const;
  void check_resolution(const ImageRGB& image) const;

  nnet::SequentialNet net_;
  double d_min_, d_max_;
  double near_m_, far_m_;
  double sensitivity_;
  int fixed_h_ = 0, fixed_w_ = 0;
};

// Adapts a fixed-resolution model to arbitrary inputs: aspect-preserving
// resize, gray padding, inverse mapping of the depth map and of gradients.
class LetterboxedModel : public DepthModel {
 public:
  LetterboxedModel(std::shared_ptr<const DepthModel> inner, int box_h, int box_w);

  std::string name() const override { return inner_->name() + "+letterbox"; }
  double depth_min() const override { return inner_->depth_min(); }
  double depth_max() const override { return inner_->depth_max(); }
  DepthGrid predict(const ImageRGB& image) const override;
  ImageRGB input_gradient(const ImageRGB& image, const Grid& upstream) const override;

 private:
  struct Fit {
    int sh, sw;  // scaled content size inside the box
  };
  Fit fit_for(int h, int w) const;

  std::shared_ptr<const DepthModel> inner_;
  int box_h_, box_w_;
};

// Spec-level operations.
DepthGrid predict_depth(const DepthModel& model, const ImageRGB& image);
ImageRGB depth_gradient(const DepthModel& model, const ImageRGB& image, const Grid& upstream);

// Factory. "toy" is always available; the pretrained backends need an external
// inference plugin and report backend_unavailable with guidance.
std::shared_ptr<DepthModel> make_depth_model(const ModelConfig& cfg);

}  // namespace depthpatch

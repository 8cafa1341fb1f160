#pragma once

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "depthpatch/core.hpp"
#include "depthpatch/geometry.hpp"

namespace testsupport {

using namespace depthpatch;

// Scratch directory, removed on destruction.
class TmpDir {
 public:
  explicit TmpDir(const std::string& tag) {
    dir_ = std::filesystem::temp_directory_path() /
           ("depthpatch_test_" + tag + "_" + std::to_string(counter_++));
    std::filesystem::create_directories(dir_);
  }
  ~TmpDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  std::string path(const std::string& rel = "") const {
    return rel.empty() ? dir_.string() : (dir_ / rel).string();
  }

 private:
  static inline int counter_ = 0;
  std::filesystem::path dir_;
};

// Central finite differences of a scalar function over a parameter vector.
inline std::vector<double> finite_diff(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double step = 1e-3) {
  std::vector<double> g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + step;
    const double hi = f(x);
    x[i] = keep - step;
    const double lo = f(x);
    x[i] = keep;
    g[i] = (hi - lo) / (2.0 * step);
  }
  return g;
}

inline double rel_err(double got, double want) {
  const double denom = std::max({std::abs(got), std::abs(want), 1e-12});
  return std::abs(got - want) / denom;
}

// Max relative error over paired gradients, ignoring entries that are tiny in
// both (noise below the FD floor).
inline double max_grad_rel_err(const std::vector<double>& got, const std::vector<double>& want,
                               double floor = 1e-7) {
  double worst = 0.0;
  for (size_t i = 0; i < got.size(); ++i) {
    if (std::abs(got[i]) < floor && std::abs(want[i]) < floor) continue;
    worst = std::max(worst, rel_err(got[i], want[i]));
  }
  return worst;
}

inline ImageRGB random_image(int h, int w, uint64_t seed, double lo = 0.2, double hi = 0.8) {
  Rng rng(seed);
  ImageRGB img(h, w);
  for (double& v : img.v) v = rng.uniform(lo, hi);
  return img;
}

inline ImageRGB constant_image(int h, int w, double r, double g, double b) {
  ImageRGB img(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      img.at(i, j, 0) = r;
      img.at(i, j, 1) = g;
      img.at(i, j, 2) = b;
    }
  return img;
}

// A small object with a solid rectangular mask centered on the canvas.
inline PhysicalObject toy_object(int h, int w, int margin, double height_m, uint64_t seed) {
  PhysicalObject obj;
  obj.image = random_image(h, w, seed, 0.3, 0.7);
  obj.mask = BinaryMask(h, w);
  for (int i = margin; i < h - margin; ++i)
    for (int j = margin; j < w - margin; ++j) obj.mask.at(i, j) = 1;
  obj.height_m = height_m;
  return obj;
}

inline CameraModel toy_camera(double f = 60.0, double tan_alpha = 2.0, double h_cam = 1.5) {
  return CameraModel{f, tan_alpha, h_cam};
}

}  // namespace testsupport

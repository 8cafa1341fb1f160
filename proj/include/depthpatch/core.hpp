#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace depthpatch {

// Error taxonomy. Codes are stable: the CLI maps them onto process exit codes
// (config=2, asset=3, backend=4, runtime=5).
enum class Errc {
  missing_file,
  unsupported_bit_depth,
  corrupt_stream,
  size_mismatch,
  non_finite_value,
  bad_config,
  unknown_key,
  out_of_range,
  missing_required,
  placement_out_of_frame,
  empty_mask,
  dimension_mismatch,
  degenerate_region,
  backend_unavailable,
  invalid_argument,
  io_failure,
  runtime_failure,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::missing_file: return "missing_file";
    case Errc::unsupported_bit_depth: return "unsupported_bit_depth";
    case Errc::corrupt_stream: return "corrupt_stream";
    case Errc::size_mismatch: return "size_mismatch";
    case Errc::non_finite_value: return "non_finite_value";
    case Errc::bad_config: return "bad_config";
    case Errc::unknown_key: return "unknown_key";
    case Errc::out_of_range: return "out_of_range";
    case Errc::missing_required: return "missing_required";
    case Errc::placement_out_of_frame: return "placement_out_of_frame";
    case Errc::empty_mask: return "empty_mask";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::degenerate_region: return "degenerate_region";
    case Errc::backend_unavailable: return "backend_unavailable";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::io_failure: return "io_failure";
    case Errc::runtime_failure: return "runtime_failure";
  }
  return "unknown";
}

// Row-major H x W grid of doubles. The workhorse for masks, depth maps and
// single-channel gradients.
struct Grid {
  int h = 0;
  int w = 0;
  std::vector<double> v;

  Grid() = default;
  Grid(int h_, int w_, double fill = 0.0) : h(h_), w(w_), v(size_t(h_) * w_, fill) {}

  double& at(int i, int j) { return v[size_t(i) * w + j]; }
  double at(int i, int j) const { return v[size_t(i) * w + j]; }
  size_t size() const { return v.size(); }
  bool same_dims(const Grid& o) const { return h == o.h && w == o.w; }
};

// Interleaved RGB image, values in [0,1]. Channel order is R,G,B.
struct ImageRGB {
  int h = 0;
  int w = 0;
  std::vector<double> v;  // h*w*3

  ImageRGB() = default;
  ImageRGB(int h_, int w_, double fill = 0.0) : h(h_), w(w_), v(size_t(h_) * w_ * 3, fill) {}

  double& at(int i, int j, int c) { return v[(size_t(i) * w + j) * 3 + c]; }
  double at(int i, int j, int c) const { return v[(size_t(i) * w + j) * 3 + c]; }
  bool same_dims(const ImageRGB& o) const { return h == o.h && w == o.w; }
};

// Strictly {0,1}-valued mask.
struct BinaryMask {
  int h = 0;
  int w = 0;
  std::vector<uint8_t> v;

  BinaryMask() = default;
  BinaryMask(int h_, int w_, uint8_t fill = 0) : h(h_), w(w_), v(size_t(h_) * w_, fill) {}

  uint8_t& at(int i, int j) { return v[size_t(i) * w + j]; }
  uint8_t at(int i, int j) const { return v[size_t(i) * w + j]; }

  size_t count() const {
    size_t n = 0;
    for (uint8_t x : v) n += (x != 0);
    return n;
  }
  bool empty_mask() const { return count() == 0; }
};

// Per-pixel metric depth in meters, strictly positive and finite.
struct DepthGrid {
  Grid values;
  std::string camera_id;

  int h() const { return values.h; }
  int w() const { return values.w; }
  double at(int i, int j) const { return values.at(i, j); }
  double& at(int i, int j) { return values.at(i, j); }
};

inline void check_depth_finite_positive(const DepthGrid& d) {
  for (double x : d.values.v) {
    if (!std::isfinite(x)) fail(Errc::non_finite_value, "depth grid contains a non-finite value");
    if (x <= 0.0) fail(Errc::out_of_range, "depth grid contains a non-positive value");
  }
}

inline double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

inline void clamp_image01(ImageRGB& img) {
  for (double& x : img.v) x = clamp01(x);
}

// Deterministic RNG. All draws are defined on top of the fully specified
// mt19937_64 stream, so replays are bit-identical across builds and platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  // Uniform in [0,1).
  double uniform01() { return double(state_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Uniform integer in [0, n).
  uint64_t uniform_int(uint64_t n) {
    if (n == 0) fail(Errc::invalid_argument, "uniform_int(0)");
    return state_() % n;
  }

  // Box-Muller; keeps the spare deviate to stay stream-stable.
  double normal(double mu = 0.0, double sigma = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mu + sigma * spare_;
    }
    double u1 = 0.0;
    while (u1 <= 1e-300) u1 = uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return mu + sigma * r * std::cos(a);
  }

 private:
  std::mt19937_64 state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace depthpatch

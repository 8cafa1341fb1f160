#pragma once

#include <array>
#include <string>
#include <vector>

#include "depthpatch/core.hpp"
#include "depthpatch/geometry.hpp"

namespace depthpatch {

struct Intrinsics {
  double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) fail(Errc::out_of_range, "intrinsics need fx, fy > 0");
  }
};

// Camera frame: X right, Y down, Z forward.
struct PointCloud {
  std::vector<std::array<double, 3>> points;
  size_t skipped_nonfinite = 0;
};

// Per pixel (u,v,z): X=(u-cx)z/fx, Y=(v-cy)z/fy, Z=z; row-major emission.
// Non-finite depths are skipped and counted.
PointCloud depth_to_pointcloud(const DepthGrid& depth, const Intrinsics& intr);

// ".xyz" text, one "x y z" line per point with 6 decimals, '#' comments.
void save_pointcloud(const PointCloud& pc, const std::string& path);
PointCloud load_pointcloud(const std::string& path);

// Intrinsics from scene metadata: optional explicit fx/fy/cx/cy, otherwise
// fx=fy=f, cx the image center column and cy the horizon row f/tan_alpha.
Intrinsics load_intrinsics(const std::string& camera_json_path, int image_w, int image_h);
Intrinsics default_intrinsics(const CameraModel& cam, int image_w, int image_h);

}  // namespace depthpatch

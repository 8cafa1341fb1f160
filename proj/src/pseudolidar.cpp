#include "depthpatch/pseudolidar.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace depthpatch {

using nlohmann::json;

PointCloud depth_to_pointcloud(const DepthGrid& depth, const Intrinsics& intr) {
  intr.validate();
  if (depth.h() < 1 || depth.w() < 1) fail(Errc::invalid_argument, "empty depth grid");

  PointCloud pc;
  pc.points.reserve(size_t(depth.h()) * depth.w());
  for (int v = 0; v < depth.h(); ++v) {
    for (int u = 0; u < depth.w(); ++u) {
      const double z = depth.at(v, u);
      if (!std::isfinite(z)) {
        ++pc.skipped_nonfinite;
        continue;
      }
      pc.points.push_back({(u - intr.cx) * z / intr.fx, (v - intr.cy) * z / intr.fy, z});
    }
  }
  return pc;
}

void save_pointcloud(const PointCloud& pc, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::io_failure, "cannot write point cloud: " + path);
  out << "# x y z (meters, camera frame: X right, Y down, Z forward)\n";
  char line[128];
  for (const auto& p : pc.points) {
    std::snprintf(line, sizeof(line), "%.6f %.6f %.6f\n", p[0], p[1], p[2]);
    out << line;
  }
  if (!out) fail(Errc::io_failure, "short write: " + path);
}

PointCloud load_pointcloud(const std::string& path) {
  if (!std::filesystem::exists(path)) fail(Errc::missing_file, "point cloud not found: " + path);
  std::ifstream in(path);
  PointCloud pc;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::array<double, 3> p{};
    if (!(ss >> p[0] >> p[1] >> p[2]))
      fail(Errc::corrupt_stream, "bad point line in " + path + ": " + line);
    pc.points.push_back(p);
  }
  return pc;
}

Intrinsics default_intrinsics(const CameraModel& cam, int image_w, int image_h) {
  cam.validate();
  Intrinsics intr;
  intr.fx = cam.f;
  intr.fy = cam.f;
  intr.cx = (image_w - 1) / 2.0;
  // level camera: the optical axis crosses the horizon row
  intr.cy = std::min(double(image_h - 1), cam.vanishing_row());
  return intr;
}

Intrinsics load_intrinsics(const std::string& camera_json_path, int image_w, int image_h) {
  const CameraModel cam = load_camera_json(camera_json_path);
  Intrinsics intr = default_intrinsics(cam, image_w, image_h);

  json j;
  std::ifstream in(camera_json_path);
  in >> j;
  if (j.contains("fx")) intr.fx = j["fx"].get<double>();
  if (j.contains("fy")) intr.fy = j["fy"].get<double>();
  if (j.contains("cx")) intr.cx = j["cx"].get<double>();
  if (j.contains("cy")) intr.cy = j["cy"].get<double>();
  intr.validate();
  return intr;
}

}  // namespace depthpatch

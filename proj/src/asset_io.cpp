#include "depthpatch/asset_io.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace depthpatch {

ImageRGB load_image(const std::string& path) {
  if (!fs::exists(path)) fail(Errc::missing_file, "image file not found: " + path);
  cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (m.empty()) fail(Errc::corrupt_stream, "failed to decode image: " + path);

  double scale;
  if (m.depth() == CV_8U) {
    scale = 1.0 / 255.0;
  } else if (m.depth() == CV_16U) {
    scale = 1.0 / 65535.0;
  } else {
    fail(Errc::unsupported_bit_depth, "expected 8-bit or 16-bit image: " + path);
  }

  ImageRGB out(m.rows, m.cols);
  const int ch = m.channels();
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) {
      double r, g, b;
      if (m.depth() == CV_8U) {
        if (ch == 1) {
          r = g = b = m.at<uint8_t>(i, j);
        } else if (ch == 3) {
          const auto& px = m.at<cv::Vec3b>(i, j);  // OpenCV stores BGR
          b = px[0], g = px[1], r = px[2];
        } else if (ch == 4) {
          const auto& px = m.at<cv::Vec4b>(i, j);
          b = px[0], g = px[1], r = px[2];
        } else {
          fail(Errc::corrupt_stream, "unsupported channel count in " + path);
        }
      } else {
        if (ch == 1) {
          r = g = b = m.at<uint16_t>(i, j);
        } else if (ch == 3) {
          const auto& px = m.at<cv::Vec3w>(i, j);
          b = px[0], g = px[1], r = px[2];
        } else if (ch == 4) {
          const auto& px = m.at<cv::Vec4w>(i, j);
          b = px[0], g = px[1], r = px[2];
        } else {
          fail(Errc::corrupt_stream, "unsupported channel count in " + path);
        }
      }
      out.at(i, j, 0) = r * scale;
      out.at(i, j, 1) = g * scale;
      out.at(i, j, 2) = b * scale;
    }
  }
  return out;
}

void save_image(const ImageRGB& img, const std::string& path) {
  if (img.h < 1 || img.w < 1) fail(Errc::invalid_argument, "cannot save empty image");
  cv::Mat m(img.h, img.w, CV_8UC3);
  for (int i = 0; i < img.h; ++i) {
    for (int j = 0; j < img.w; ++j) {
      auto q = [&](int c) {
        double x = clamp01(img.at(i, j, c));
        return uint8_t(std::lround(x * 255.0));
      };
      m.at<cv::Vec3b>(i, j) = cv::Vec3b(q(2), q(1), q(0));  // back to BGR
    }
  }
  if (!cv::imwrite(path, m)) fail(Errc::io_failure, "failed to write image: " + path);
}

BinaryMask load_mask(const std::string& path) {
  ImageRGB img = load_image(path);
  BinaryMask mask(img.h, img.w);
  for (int i = 0; i < img.h; ++i)
    for (int j = 0; j < img.w; ++j) {
      double g = (img.at(i, j, 0) + img.at(i, j, 1) + img.at(i, j, 2)) / 3.0;
      mask.at(i, j) = g >= 0.5 ? 1 : 0;
    }
  return mask;
}

void save_mask(const BinaryMask& mask, const std::string& path) {
  ImageRGB img(mask.h, mask.w);
  for (int i = 0; i < mask.h; ++i)
    for (int j = 0; j < mask.w; ++j)
      for (int c = 0; c < 3; ++c) img.at(i, j, c) = mask.at(i, j) ? 1.0 : 0.0;
  save_image(img, path);
}

std::string depth_sidecar_path(const std::string& payload_path) {
  fs::path p(payload_path);
  p.replace_extension(".json");
  return p.string();
}

void save_depth(const DepthGrid& grid, const std::string& path) {
  check_depth_finite_positive(grid);

  std::vector<float> payload(grid.values.v.size());
  for (size_t i = 0; i < payload.size(); ++i) payload[i] = float(grid.values.v[i]);

  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io_failure, "cannot open for write: " + path);
  out.write(reinterpret_cast<const char*>(payload.data()),
            std::streamsize(payload.size() * sizeof(float)));
  if (!out) fail(Errc::io_failure, "short write: " + path);
  out.close();

  json sidecar = {{"height", grid.values.h}, {"width", grid.values.w}, {"units", "m"}};
  if (!grid.camera_id.empty()) sidecar["camera_id"] = grid.camera_id;
  std::ofstream js(depth_sidecar_path(path));
  if (!js) fail(Errc::io_failure, "cannot write sidecar for " + path);
  js << sidecar.dump(2) << "\n";
}

DepthGrid load_depth(const std::string& path) {
  const std::string side = depth_sidecar_path(path);
  if (!fs::exists(path)) fail(Errc::missing_file, "depth payload not found: " + path);
  if (!fs::exists(side)) fail(Errc::missing_file, "depth sidecar not found: " + side);

  json sidecar;
  {
    std::ifstream js(side);
    try {
      js >> sidecar;
    } catch (const json::exception& e) {
      fail(Errc::corrupt_stream, "bad depth sidecar " + side + ": " + e.what());
    }
  }
  if (!sidecar.contains("height") || !sidecar.contains("width"))
    fail(Errc::corrupt_stream, "depth sidecar missing dimensions: " + side);
  const int h = sidecar["height"].get<int>();
  const int w = sidecar["width"].get<int>();
  if (h < 1 || w < 1) fail(Errc::out_of_range, "bad dimensions in sidecar: " + side);

  const auto expected = size_t(h) * size_t(w) * sizeof(float);
  const auto actual = size_t(fs::file_size(path));
  if (expected != actual)
    fail(Errc::size_mismatch, "depth payload size " + std::to_string(actual) +
                                  " does not match header " + std::to_string(expected) + ": " + path);

  std::vector<float> payload(size_t(h) * w);
  std::ifstream in(path, std::ios::binary);
  in.read(reinterpret_cast<char*>(payload.data()), std::streamsize(expected));
  if (!in) fail(Errc::io_failure, "short read: " + path);

  DepthGrid grid;
  grid.values = Grid(h, w);
  for (size_t i = 0; i < payload.size(); ++i) grid.values.v[i] = payload[i];
  if (sidecar.contains("camera_id")) grid.camera_id = sidecar["camera_id"].get<std::string>();
  check_depth_finite_positive(grid);
  return grid;
}

std::vector<std::string> list_image_files(const std::string& dir) {
  if (!fs::is_directory(dir)) fail(Errc::missing_file, "not a directory: " + dir);
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace depthpatch

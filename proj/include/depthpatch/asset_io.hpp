#pragma once

#include <string>
#include <vector>

#include "depthpatch/core.hpp"

namespace depthpatch {

// Loads an 8-bit or 16-bit PNG/JPEG and maps values linearly to [0,1].
// Grayscale inputs are expanded to three identical channels.
ImageRGB load_image(const std::string& path);

// Exports to 8-bit PNG (or JPEG, by extension), scaling [0,1] -> [0,255].
void save_image(const ImageRGB& img, const std::string& path);

// Loads a mask image and thresholds at 0.5 to a strict {0,1} grid.
BinaryMask load_mask(const std::string& path);
void save_mask(const BinaryMask& mask, const std::string& path);

// Depth on disk: raw little-endian float32, row-major, plus a JSON sidecar
// {"height": H, "width": W, "units": "m"}. The sidecar sits next to the
// payload with the extension swapped to .json.
void save_depth(const DepthGrid& grid, const std::string& path);
DepthGrid load_depth(const std::string& path);

std::string depth_sidecar_path(const std::string& payload_path);

// Lists image files (png/jpg/jpeg) in a directory, sorted by name.
std::vector<std::string> list_image_files(const std::string& dir);

}  // namespace depthpatch

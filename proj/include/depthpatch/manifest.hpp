#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace depthpatch {

// FNV-1a 64-bit content checksum; deterministic and dependency-free. Used for
// artifact identity in manifests, not for security.
uint64_t fnv1a64_file(const std::string& path);
std::string checksum_hex(const std::string& path);

// Writes manifest.json next to the artifacts: tool version, seed, the resolved
// config snapshot and one checksum per artifact. Deliberately no timestamps so
// identical runs yield identical manifests.
void write_manifest(const std::string& out_dir, const nlohmann::json& config_snapshot,
                    uint64_t seed, const std::vector<std::string>& rel_files);

std::string tool_version();

}  // namespace depthpatch

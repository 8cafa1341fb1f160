#include "depthpatch/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "depthpatch/core.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace depthpatch {

uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::missing_file, "cannot open for checksum: " + path);
  uint64_t hash = 1469598103934665603ull;
  char buf[8192];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      hash ^= uint64_t(uint8_t(buf[i]));
      hash *= 1099511628211ull;
    }
    if (!in) break;
  }
  return hash;
}

std::string checksum_hex(const std::string& path) {
  std::ostringstream out;
  out << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << fnv1a64_file(path);
  return out.str();
}

std::string tool_version() {
#ifdef DEPTHPATCH_VERSION
  return DEPTHPATCH_VERSION;
#else
  return "0.0.0";
#endif
}

void write_manifest(const std::string& out_dir, const json& config_snapshot, uint64_t seed,
                    const std::vector<std::string>& rel_files) {
  json artifacts = json::object();
  for (const std::string& rel : rel_files) {
    const fs::path p = fs::path(out_dir) / rel;
    if (fs::exists(p)) artifacts[rel] = checksum_hex(p.string());
  }
  json manifest = {
      {"tool", "depthpatch"},
      {"version", tool_version()},
      {"seed", seed},
      {"config", config_snapshot},
      {"artifacts", artifacts},
  };
  std::ofstream out(fs::path(out_dir) / "manifest.json");
  if (!out) fail(Errc::io_failure, "cannot write manifest in " + out_dir);
  out << manifest.dump(2) << "\n";
}

}  // namespace depthpatch

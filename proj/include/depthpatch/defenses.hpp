#pragma once

#include <functional>
#include <string>
#include <vector>

#include "depthpatch/attack_loss.hpp"
#include "depthpatch/core.hpp"
#include "depthpatch/metrics.hpp"

namespace depthpatch {

enum class DefenseKind { jpeg, bit_depth, median_blur, gaussian_noise, autoencoder };

struct DefenseSpec {
  DefenseKind kind = DefenseKind::jpeg;
  double parameter = 0.0;   // quality | bits | kernel | sigma (unused for autoencoder)
  std::string model_path;   // autoencoder only

  void validate() const;
  std::string family() const;
};

// Parses CLI syntax: "jpeg:50", "bits:3", "median:15", "noise:0.05",
// "autoencoder" or "autoencoder:/path/to/model".
DefenseSpec parse_defense_spec(const std::string& text);

using AutoencoderFn = std::function<ImageRGB(const ImageRGB&)>;

// Input transformations applied upstream of depth inference. gaussian_noise is
// the only stochastic one and is fully seeded. With no model configured the
// autoencoder slot falls back to identity with a loud warning; a configured
// but missing model is an error.
ImageRGB apply_defense(const ImageRGB& image, const DefenseSpec& spec, uint64_t seed,
                       const AutoencoderFn& autoencoder = nullptr);

struct DefenseRow {
  std::string family;
  double parameter = 0.0;
  double benign_e_d = 0.0;  // benign undefended vs. benign defended
  double attack_e_d = 0.0;  // benign defended vs. adversarial defended
};

// Benign/attack error per defense spec, averaged over scenes at the configured
// placement distance.
std::vector<DefenseRow> defense_eval(const AttackAssets& assets, const PatchArtifacts& patch,
                                     const DepthModel& model,
                                     const std::vector<DefenseSpec>& grid, double distance_m,
                                     uint64_t noise_seed, int max_scenes = 0,
                                     const AutoencoderFn& autoencoder = nullptr);

std::vector<DefenseSpec> default_defense_grid(const DefenseConfig& cfg);

void write_defense_csv(const std::vector<DefenseRow>& rows, const std::string& path);

}  // namespace depthpatch

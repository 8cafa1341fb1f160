#pragma once

#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "depthpatch/attack_loss.hpp"
#include "depthpatch/config.hpp"
#include "depthpatch/core.hpp"
#include "depthpatch/mask.hpp"

namespace depthpatch {

// Limited-memory quasi-Newton state for the patch pixels. Fixed step, no line
// search: the per-iteration batch is stochastic, so a Wolfe search has nothing
// stable to probe.
struct LbfgsState {
  int history = 10;
  double step = 0.1;
  std::deque<std::vector<double>> s_list;
  std::deque<std::vector<double>> y_list;
  std::deque<double> rho_list;
  std::vector<double> prev_x;
  std::vector<double> prev_g;
  bool has_prev = false;
};

struct AdamEdgeState {
  std::array<double, 4> m{0, 0, 0, 0};
  std::array<double, 4> v{0, 0, 0, 0};
  std::array<int, 4> t{0, 0, 0, 0};
};

struct AttackState {
  ImageRGB patch;                     // x', starts as the content image
  std::vector<RegionParams> thetas;   // starts covering the whole canvas
  int iteration = 0;
  bool region_frozen = false;
  LbfgsState lbfgs;
  std::vector<AdamEdgeState> adam;    // one per region
};

// One quasi-Newton step on the patch pixels followed by the [0,1] clamp.
// A non-finite gradient aborts the update and reports it via the return value.
bool step_content(AttackState& state, const ImageRGB& grad, const OptimizerConfig& cfg);

// Moves only the edge with the maximum absolute gradient (ties resolve in
// l,r,t,b order) with an adaptive-moment update, then projects the borders.
// All-zero gradients are a no-op.
RegionParams step_region_single(const RegionParams& theta, const EdgeGrad& grad,
                                AdamEdgeState& adam, const OptimizerConfig& cfg, int w, int h);
void step_region(AttackState& state, const std::vector<EdgeGrad>& grads,
                 const OptimizerConfig& cfg, int w, int h);

AttackState init_attack_state(const RunConfig& cfg, const AttackAssets& assets);

struct RunArtifacts {
  AttackState state;
  double initial_adv = 0.0;
  double final_adv = 0.0;
  std::string out_dir;
  std::vector<std::string> files;  // artifact paths, relative to out_dir
};

// The full per-iteration loop: sample a batch, compose, infer depth, assemble
// the objective, backpropagate, always update the content, update the region
// only until the target ratio is reached (then freeze). Emits patch.png,
// theta.json, loss_log.csv, composite samples, the config snapshot and a
// manifest into out_dir.
RunArtifacts run_attack(const RunConfig& cfg, const AttackAssets& assets,
                        std::shared_ptr<DepthModel> model, const std::string& out_dir);

// theta.json round-trip for downstream commands.
void save_thetas(const std::vector<RegionParams>& thetas, double tanh_k, int canvas_w,
                 int canvas_h, const std::string& path);
struct ThetaFile {
  std::vector<RegionParams> thetas;
  double tanh_k = 1.0;
  int canvas_w = 0, canvas_h = 0;
};
ThetaFile load_thetas(const std::string& path);

}  // namespace depthpatch

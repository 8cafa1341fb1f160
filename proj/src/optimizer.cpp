#include "depthpatch/optimizer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "depthpatch/asset_io.hpp"
#include "depthpatch/manifest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace depthpatch {

namespace {

// Two-loop recursion; with empty history this is plain gradient descent
// scaled by the initial Hessian guess.
std::vector<double> lbfgs_direction(const LbfgsState& st, const std::vector<double>& grad) {
  std::vector<double> q = grad;
  const int m = int(st.s_list.size());
  std::vector<double> alpha(m, 0.0);

  for (int i = m - 1; i >= 0; --i) {
    const auto& s = st.s_list[i];
    const auto& y = st.y_list[i];
    double sq = 0.0;
    for (size_t k = 0; k < q.size(); ++k) sq += s[k] * q[k];
    alpha[i] = st.rho_list[i] * sq;
    for (size_t k = 0; k < q.size(); ++k) q[k] -= alpha[i] * y[k];
  }

  double gamma = 1.0;
  if (m > 0) {
    const auto& s = st.s_list[m - 1];
    const auto& y = st.y_list[m - 1];
    double sy = 0.0, yy = 0.0;
    for (size_t k = 0; k < q.size(); ++k) {
      sy += s[k] * y[k];
      yy += y[k] * y[k];
    }
    if (yy > 0.0) gamma = sy / yy;
    // stochastic batches make the curvature estimate noisy; keep the initial
    // Hessian scale in a sane band
    gamma = std::clamp(gamma, 1e-4, 1e4);
  }
  for (double& x : q) x *= gamma;

  for (int i = 0; i < m; ++i) {
    const auto& s = st.s_list[i];
    const auto& y = st.y_list[i];
    double yq = 0.0;
    for (size_t k = 0; k < q.size(); ++k) yq += y[k] * q[k];
    const double beta = st.rho_list[i] * yq;
    for (size_t k = 0; k < q.size(); ++k) q[k] += s[k] * (alpha[i] - beta);
  }
  return q;
}

}  // namespace

bool step_content(AttackState& state, const ImageRGB& grad, const OptimizerConfig& cfg) {
  if (!grad.same_dims(state.patch))
    fail(Errc::dimension_mismatch, "step_content: gradient dims mismatch");
  for (double g : grad.v)
    if (!std::isfinite(g)) {
      std::cerr << "[optimizer] non-finite content gradient at iteration " << state.iteration
                << "; update aborted\n";
      return false;
    }

  LbfgsState& st = state.lbfgs;
  st.history = cfg.lbfgs_history;
  st.step = cfg.content_step;

  // Fixed step length: move content_step (sup-norm) along the quasi-Newton
  // direction. Keeps progress independent of the raw gradient scale, which is
  // tiny for reciprocal-depth losses.
  const std::vector<double> direction = lbfgs_direction(st, grad.v);
  double dmax = 0.0;
  for (double d : direction) dmax = std::max(dmax, std::abs(d));
  std::vector<double> x_new = state.patch.v;
  if (dmax > 0.0) {
    const double scale = st.step / dmax;
    for (size_t k = 0; k < x_new.size(); ++k)
      x_new[k] = clamp01(x_new[k] - scale * direction[k]);
  }

  if (st.has_prev) {
    std::vector<double> s(x_new.size()), y(x_new.size());
    double sy = 0.0, ss = 0.0, yy = 0.0;
    for (size_t k = 0; k < x_new.size(); ++k) {
      s[k] = x_new[k] - st.prev_x[k];
      y[k] = grad.v[k] - st.prev_g[k];
      sy += s[k] * y[k];
      ss += s[k] * s[k];
      yy += y[k] * y[k];
    }
    // cautious update: gradients come from different random batches, so only
    // well-aligned curvature pairs enter the history
    if (sy > 0.05 * std::sqrt(ss) * std::sqrt(yy)) {
      st.s_list.push_back(std::move(s));
      st.y_list.push_back(std::move(y));
      st.rho_list.push_back(1.0 / sy);
      while (int(st.s_list.size()) > st.history) {
        st.s_list.pop_front();
        st.y_list.pop_front();
        st.rho_list.pop_front();
      }
    }
  }
  st.prev_x = state.patch.v;
  st.prev_g = grad.v;
  st.has_prev = true;

  state.patch.v = std::move(x_new);
  return true;
}

RegionParams step_region_single(const RegionParams& theta, const EdgeGrad& grad,
                                AdamEdgeState& adam, const OptimizerConfig& cfg, int w, int h) {
  for (double g : grad)
    if (!std::isfinite(g)) fail(Errc::non_finite_value, "step_region: non-finite gradient");

  int best = -1;
  double best_abs = 0.0;
  for (int e = 0; e < 4; ++e) {
    const double a = std::abs(grad[e]);
    if (a > best_abs) {
      best_abs = a;
      best = e;
    }
  }
  if (best < 0) return theta;  // all-zero gradient

  adam.t[best] += 1;
  adam.m[best] = cfg.adam_beta1 * adam.m[best] + (1.0 - cfg.adam_beta1) * grad[best];
  adam.v[best] = cfg.adam_beta2 * adam.v[best] + (1.0 - cfg.adam_beta2) * grad[best] * grad[best];
  const double m_hat = adam.m[best] / (1.0 - std::pow(cfg.adam_beta1, adam.t[best]));
  const double v_hat = adam.v[best] / (1.0 - std::pow(cfg.adam_beta2, adam.t[best]));
  const double delta = cfg.region_step * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);

  RegionParams raw = theta;
  switch (best) {
    case 0: raw.l -= delta; break;
    case 1: raw.r -= delta; break;
    case 2: raw.t -= delta; break;
    case 3: raw.b -= delta; break;
  }
  return project_params(raw, w, h);
}

void step_region(AttackState& state, const std::vector<EdgeGrad>& grads,
                 const OptimizerConfig& cfg, int w, int h) {
  if (grads.size() != state.thetas.size())
    fail(Errc::dimension_mismatch, "step_region: one gradient per region required");
  if (state.adam.size() != state.thetas.size()) state.adam.resize(state.thetas.size());
  for (size_t r = 0; r < state.thetas.size(); ++r)
    state.thetas[r] = step_region_single(state.thetas[r], grads[r], state.adam[r], cfg, w, h);
}

AttackState init_attack_state(const RunConfig& cfg, const AttackAssets& assets) {
  AttackState state;
  state.patch = assets.content_image;

  const int w = assets.object.image.w, h = assets.object.image.h;
  const int rows = cfg.region.rows, cols = cfg.region.cols;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      RegionParams p;
      p.t = h * double(r) / rows;
      p.b = h * double(r + 1) / rows;
      p.l = w * double(c) / cols;
      p.r = w * double(c + 1) / cols;
      state.thetas.push_back(p);
    }
  state.adam.resize(state.thetas.size());
  return state;
}

void save_thetas(const std::vector<RegionParams>& thetas, double tanh_k, int canvas_w,
                 int canvas_h, const std::string& path) {
  json j;
  j["tanh_k"] = tanh_k;
  j["canvas"] = {{"width", canvas_w}, {"height", canvas_h}};
  j["regions"] = json::array();
  for (const auto& p : thetas) j["regions"].push_back({{"l", p.l}, {"r", p.r}, {"t", p.t}, {"b", p.b}});
  std::ofstream out(path);
  if (!out) fail(Errc::io_failure, "cannot write " + path);
  out << j.dump(2) << "\n";
}

ThetaFile load_thetas(const std::string& path) {
  if (!fs::exists(path)) fail(Errc::missing_file, "theta file not found: " + path);
  json j;
  std::ifstream in(path);
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(Errc::corrupt_stream, "bad theta file: " + std::string(e.what()));
  }
  ThetaFile tf;
  tf.tanh_k = j.value("tanh_k", 1.0);
  tf.canvas_w = j.at("canvas").at("width").get<int>();
  tf.canvas_h = j.at("canvas").at("height").get<int>();
  for (const json& r : j.at("regions"))
    tf.thetas.push_back(RegionParams{r.at("l").get<double>(), r.at("r").get<double>(),
                                     r.at("t").get<double>(), r.at("b").get<double>()});
  if (tf.thetas.empty()) fail(Errc::corrupt_stream, "theta file has no regions");
  return tf;
}

RunArtifacts run_attack(const RunConfig& cfg, const AttackAssets& assets,
                        std::shared_ptr<DepthModel> model, const std::string& out_dir) {
  fs::create_directories(out_dir);
  fs::create_directories(fs::path(out_dir) / "composite_samples");

  RunArtifacts artifacts;
  artifacts.out_dir = out_dir;

  AttackState state = init_attack_state(cfg, assets);
  ObjectiveEvaluator evaluator(cfg, assets, model);

  const int cw = assets.object.image.w, ch = assets.object.image.h;
  const Bbox obj_box = mask_bbox(assets.object.mask);
  const TransformRanges ranges = eot_ranges(
      cfg.eot.min_distance_m, cfg.eot.max_distance_m, cfg.eot.rotation_deg,
      cfg.eot.brightness_delta, cfg.eot.saturation_min, cfg.eot.saturation_max,
      assets.scenes.front().camera, assets.object.height_m, double(obj_box.height()));

  Rng rng(cfg.seed);

  // config snapshot first: a crash mid-run still leaves the resolved config
  {
    std::ofstream snap(fs::path(out_dir) / "config_snapshot.json");
    snap << config_to_json(cfg).dump(2) << "\n";
  }

  std::ofstream log(fs::path(out_dir) / "loss_log.csv");
  log.precision(17);
  log << "iteration,adv,mask,style,total,ratio\n";

  auto sample_batch = [&]() {
    std::vector<BatchItem> batch;
    for (int b = 0; b < cfg.batch_size; ++b) {
      BatchItem item;
      int attempts = 0;
      for (;;) {
        try {
          item.scene_index = int(rng.uniform_int(assets.scenes.size()));
          const SceneAsset& scene = assets.scenes[item.scene_index];
          item.spec = sample_transform(rng, ranges, scene.background.w, obj_box.height(),
                                       obj_box.width());
          // Probe the vertical placement so most bad draws are rejected here;
          // leave two rows of slack for warp rounding.
          const double rad = item.spec.rotation_deg * 3.14159265358979323846 / 180.0;
          const double s_est = item.spec.scale * (std::abs(obj_box.height() * std::cos(rad)) +
                                                  std::abs(obj_box.width() * std::sin(rad)));
          const int d = vertical_position(s_est, scene.camera, assets.object.height_m,
                                          scene.background.h);
          if (d - int(std::ceil(s_est)) + 1 < 2)
            fail(Errc::placement_out_of_frame, "object top above frame");
          break;
        } catch (const Error& e) {
          if (e.code() != Errc::placement_out_of_frame || ++attempts >= 10) throw;
        }
      }
      batch.push_back(item);
    }
    return batch;
  };

  // Rounding in the warp can still push a probed draw out of frame; resample
  // the whole batch a bounded number of times before giving up.
  auto evaluate_with_retry = [&](const ImageRGB& patch, const std::vector<RegionParams>& thetas) {
    for (int attempt = 0;; ++attempt) {
      const std::vector<BatchItem> batch = sample_batch();
      try {
        return evaluator.evaluate(patch, thetas, batch, true);
      } catch (const Error& e) {
        if (e.code() != Errc::placement_out_of_frame || attempt >= 10) throw;
      }
    }
  };

  auto save_sample = [&](const std::string& name) {
    // deterministic composite snapshot: first scene, nominal transform
    const SceneAsset& scene = assets.scenes.front();
    const BinaryMask* shape = assets.shape ? &*assets.shape : nullptr;
    const PatchMaskCtx mctx =
        build_patch_mask(state.thetas, cw, ch, cfg.region.tanh_k, shape);
    const ImageRGB adv_obj = apply_patch(assets.object.image, mctx.values, state.patch);
    TransformSpec spec;
    spec.scale = 0.5 * (ranges.scale_min + ranges.scale_max);
    const double wt = spec.scale * obj_box.width();
    spec.horizontal_col = std::max(0, (scene.background.w - int(std::ceil(wt))) / 2);
    try {
      const PhysicalObject adv_phys{adv_obj, assets.object.mask, assets.object.height_m};
      const PhysicalObject transformed = apply_transform(adv_phys, spec);
      const Composite comp =
          paste(scene.background, transformed, scene.camera, spec.horizontal_col);
      const std::string rel = "composite_samples/" + name;
      save_image(comp.scene_adv, (fs::path(out_dir) / rel).string());
      artifacts.files.push_back(rel);
    } catch (const Error& e) {
      std::cerr << "[attack] composite sample skipped: " << e.what() << "\n";
    }
  };

  artifacts.initial_adv = std::nan("");
  artifacts.final_adv = std::nan("");

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    state.iteration = iter;
    const ObjectiveResult res = evaluate_with_retry(state.patch, state.thetas);

    if (iter == 0) artifacts.initial_adv = res.losses.adv;
    artifacts.final_adv = res.losses.adv;

    log << iter << ',' << res.losses.adv << ',' << res.losses.mask << ','
        << res.losses.style_total << ',' << res.losses.total << ',' << res.ratio << '\n';
    log.flush();

    if (iter == 0) save_sample("iter000000.png");
    if (cfg.snapshot_every > 0 && iter > 0 && iter % cfg.snapshot_every == 0)
      save_sample("iter" + std::to_string(iter) + ".png");

    step_content(state, res.grad_patch, cfg.optimizer);

    if (!state.region_frozen) {
      if (res.ratio <= cfg.target_ratio) {
        state.region_frozen = true;  // permanent freeze
      } else {
        step_region(state, res.grad_thetas, cfg.optimizer, cw, ch);
      }
    }
  }
  log.close();

  save_image(state.patch, (fs::path(out_dir) / "patch.png").string());
  save_thetas(state.thetas, cfg.region.tanh_k, cw, ch, (fs::path(out_dir) / "theta.json").string());
  save_sample("final.png");

  artifacts.files.push_back("patch.png");
  artifacts.files.push_back("theta.json");
  artifacts.files.push_back("loss_log.csv");
  artifacts.files.push_back("config_snapshot.json");
  write_manifest(out_dir, config_to_json(cfg), cfg.seed, artifacts.files);
  artifacts.state = std::move(state);
  return artifacts;
}

}  // namespace depthpatch

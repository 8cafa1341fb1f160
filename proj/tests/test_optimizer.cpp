#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "depthpatch/manifest.hpp"
#include "depthpatch/optimizer.hpp"
#include "support/toysetup.hpp"

using namespace depthpatch;
using testsupport::make_toy_setup;
using testsupport::TmpDir;
using testsupport::ToySetup;

namespace {

AttackState tiny_state(int h, int w) {
  AttackState st;
  st.patch = ImageRGB(h, w, 0.5);
  st.thetas = {RegionParams::full_frame(w, h)};
  st.adam.resize(1);
  return st;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("step_content") {
  OptimizerConfig cfg;

  SUBCASE("zero gradient leaves the patch unchanged") {
    AttackState st = tiny_state(4, 4);
    const ImageRGB before = st.patch;
    CHECK(step_content(st, ImageRGB(4, 4, 0.0), cfg));
    for (size_t i = 0; i < before.v.size(); ++i) CHECK(st.patch.v[i] == before.v[i]);
  }

  SUBCASE("first step with fresh history is scaled gradient descent") {
    AttackState st = tiny_state(3, 3);
    ImageRGB grad(3, 3, 0.0);
    grad.at(1, 1, 0) = 2.0;
    grad.at(0, 2, 1) = -1.0;
    CHECK(step_content(st, grad, cfg));
    // empty history: direction = gradient, normalized to a 0.1 sup-norm move
    CHECK(st.patch.at(1, 1, 0) == doctest::Approx(0.5 - 0.1 * (2.0 / 2.0)));
    CHECK(st.patch.at(0, 2, 1) == doctest::Approx(0.5 + 0.1 * (1.0 / 2.0)));
    CHECK(st.patch.at(2, 2, 2) == 0.5);
  }

  SUBCASE("pixels at 1.0 stay clamped when pushed upward") {
    AttackState st = tiny_state(2, 2);
    for (double& v : st.patch.v) v = 1.0;
    ImageRGB grad(2, 2, -3.0);  // descent direction pushes values up
    CHECK(step_content(st, grad, cfg));
    for (double v : st.patch.v) CHECK(v <= 1.0);
  }

  SUBCASE("non-finite gradients abort the update") {
    AttackState st = tiny_state(2, 2);
    const ImageRGB before = st.patch;
    ImageRGB grad(2, 2, 0.0);
    grad.at(0, 0, 0) = std::nan("");
    CHECK_FALSE(step_content(st, grad, cfg));
    for (size_t i = 0; i < before.v.size(); ++i) CHECK(st.patch.v[i] == before.v[i]);
  }

  SUBCASE("history builds up and the direction stays a descent direction") {
    AttackState st = tiny_state(4, 4);
    Rng rng(3);
    for (int it = 0; it < 8; ++it) {
      ImageRGB grad(4, 4);
      // gradient of a fixed quadratic around 0.3
      for (size_t i = 0; i < grad.v.size(); ++i) grad.v[i] = 2.0 * (st.patch.v[i] - 0.3);
      CHECK(step_content(st, grad, cfg));
    }
    // converging toward the quadratic's minimum
    for (double v : st.patch.v) CHECK(std::abs(v - 0.3) < 0.2);
    CHECK(st.lbfgs.s_list.size() >= 1);
    CHECK(st.lbfgs.s_list.size() <= size_t(cfg.lbfgs_history));
  }
}

TEST_CASE("step_region") {
  OptimizerConfig cfg;
  const int w = 30, h = 30;

  SUBCASE("only the max-|gradient| edge moves") {
    AdamEdgeState adam;
    const RegionParams p{10, 20, 10, 20};
    const RegionParams out = step_region_single(p, EdgeGrad{0.4, -0.9, 0.1, 0.1}, adam, cfg, w, h);
    CHECK(out.l == p.l);
    CHECK(out.t == p.t);
    CHECK(out.b == p.b);
    CHECK(out.r != p.r);
    // negative gradient on r: the edge moves outward by about one Adam step
    CHECK(out.r > p.r);
    CHECK(std::abs(out.r - p.r) <= cfg.region_step + 1e-9);
  }

  SUBCASE("ties resolve to l first") {
    AdamEdgeState adam;
    const RegionParams p{10, 20, 10, 20};
    const RegionParams out = step_region_single(p, EdgeGrad{0.5, 0.5, 0.5, 0.5}, adam, cfg, w, h);
    CHECK(out.l != p.l);
    CHECK(out.r == p.r);
    CHECK(out.t == p.t);
    CHECK(out.b == p.b);
  }

  SUBCASE("all-zero gradient is a no-op") {
    AdamEdgeState adam;
    const RegionParams p{10, 20, 10, 20};
    const RegionParams out = step_region_single(p, EdgeGrad{0, 0, 0, 0}, adam, cfg, w, h);
    CHECK(out.l == p.l);
    CHECK(out.r == p.r);
    CHECK(out.t == p.t);
    CHECK(out.b == p.b);
  }

  SUBCASE("updates that cross the opposite edge get midpointed by projection") {
    AdamEdgeState adam;
    OptimizerConfig big = cfg;
    big.region_step = 5.0;
    const RegionParams p{10, 10.5, 10, 20};
    // negative gradient pushes l rightward past r; projection midpoints them
    const RegionParams out = step_region_single(p, EdgeGrad{-0.9, 0.0, 0.0, 0.0}, adam, big, w, h);
    CHECK(out.l == out.r);
    CHECK(out.l == doctest::Approx(0.5 * (15.0 + 10.5)));
  }

  SUBCASE("driving with the mask-loss gradient shrinks the ratio monotonically") {
    AttackState st = tiny_state(h, w);
    BinaryMask obj(h, w, 1);
    double prev = region_ratio(st.thetas, obj);
    for (int it = 0; it < 40; ++it) {
      const auto grads = mask_loss_grad(st.thetas, w, h);
      step_region(st, grads, cfg, w, h);
      const double ratio = region_ratio(st.thetas, obj);
      CHECK(ratio <= prev + 1e-12);
      prev = ratio;
    }
    CHECK(prev < 1.0);
  }
}

TEST_CASE("theta file round-trip") {
  TmpDir tmp("theta");
  const std::vector<RegionParams> thetas = {{1.5, 8.25, 2.0, 9.75}, {0, 16, 0, 20}};
  save_thetas(thetas, 2.5, 16, 20, tmp.path("theta.json"));
  const ThetaFile tf = load_thetas(tmp.path("theta.json"));
  CHECK(tf.tanh_k == 2.5);
  CHECK(tf.canvas_w == 16);
  CHECK(tf.canvas_h == 20);
  REQUIRE(tf.thetas.size() == 2);
  CHECK(tf.thetas[0].l == 1.5);
  CHECK(tf.thetas[0].b == 9.75);
}

TEST_CASE("run_attack with budget zero still writes artifacts") {
  ToySetup setup = make_toy_setup();
  setup.cfg.iterations = 0;
  TmpDir tmp("budget0");

  const RunArtifacts art = run_attack(setup.cfg, setup.assets, setup.model, tmp.path());

  // state equals initialization
  for (size_t i = 0; i < art.state.patch.v.size(); ++i)
    CHECK(art.state.patch.v[i] == setup.assets.content_image.v[i]);
  REQUIRE(art.state.thetas.size() == 1);
  CHECK(art.state.thetas[0].l == 0.0);
  CHECK(art.state.thetas[0].r == double(setup.assets.object.image.w));

  for (const char* f : {"patch.png", "theta.json", "loss_log.csv", "config_snapshot.json",
                        "manifest.json"})
    CHECK(std::filesystem::exists(tmp.path(f)));
}

TEST_CASE("short attack run descends and is bit-deterministic") {
  ToySetup setup = make_toy_setup();
  setup.cfg.iterations = 12;
  setup.cfg.lambda = 0.1;

  TmpDir tmp_a("runA"), tmp_b("runB");
  const RunArtifacts a = run_attack(setup.cfg, setup.assets, setup.model, tmp_a.path());
  const RunArtifacts b = run_attack(setup.cfg, setup.assets, setup.model, tmp_b.path());

  CHECK(std::isfinite(a.initial_adv));
  CHECK(std::isfinite(a.final_adv));

  for (const char* f : {"patch.png", "theta.json", "loss_log.csv"})
    CHECK(slurp(tmp_a.path(f)) == slurp(tmp_b.path(f)));

  // manifests carry identical checksums for identical runs
  CHECK(slurp(tmp_a.path("manifest.json")) == slurp(tmp_b.path("manifest.json")));

  // the regions only ever shrink from full frame
  const ThetaFile tf = load_thetas(tmp_a.path("theta.json"));
  CHECK(tf.thetas[0].rect_area() <
        RegionParams::full_frame(setup.assets.object.image.w, setup.assets.object.image.h)
            .rect_area());
}

TEST_CASE("region freezes permanently once the target ratio is reached") {
  ToySetup setup = make_toy_setup();
  setup.cfg.iterations = 40;
  setup.cfg.lambda = 0.0;
  setup.cfg.target_ratio = 0.9;  // reached quickly from ratio ~1.67
  TmpDir tmp("freeze");

  const RunArtifacts art = run_attack(setup.cfg, setup.assets, setup.model, tmp.path());
  CHECK(art.state.region_frozen);

  // replay the ratio column: once it dips <= target it must stay constant
  std::ifstream log(tmp.path("loss_log.csv"));
  std::string line;
  std::getline(log, line);  // header
  std::vector<double> ratios;
  while (std::getline(log, line)) {
    const auto pos = line.rfind(',');
    ratios.push_back(std::stod(line.substr(pos + 1)));
  }
  REQUIRE(ratios.size() == 40);
  int frozen_at = -1;
  for (size_t i = 0; i < ratios.size(); ++i) {
    if (frozen_at < 0 && ratios[i] <= setup.cfg.target_ratio) frozen_at = int(i);
    if (frozen_at >= 0 && int(i) > frozen_at) CHECK(ratios[i] == ratios[frozen_at]);
  }
  CHECK(frozen_at >= 0);
}

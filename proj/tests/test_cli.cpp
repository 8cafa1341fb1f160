#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "depthpatch/asset_io.hpp"
#include "depthpatch/cli.hpp"
#include "depthpatch/mde_adapter.hpp"
#include "support/toysetup.hpp"

namespace fs = std::filesystem;
using namespace depthpatch;
using nlohmann::json;
using testsupport::TmpDir;

namespace {

// Writes the in-memory toy setup as an on-disk asset tree + config file.
struct CliFixture {
  TmpDir tmp{"cli"};
  std::string config_path;

  CliFixture() {
    auto setup = testsupport::make_toy_setup();

    fs::create_directories(tmp.path("scenes"));
    save_image(setup.assets.object.image, tmp.path("object.png"));
    save_mask(setup.assets.object.mask, tmp.path("object_mask.png"));
    save_image(setup.assets.style_image, tmp.path("style.png"));
    for (size_t i = 0; i < setup.assets.scenes.size(); ++i)
      save_image(setup.assets.scenes[i].background,
                 tmp.path("scenes/scene" + std::to_string(i) + ".png"));
    {
      std::ofstream cam(tmp.path("scenes/camera.json"));
      cam << R"({"f": 70.0, "tan_alpha": 2.0, "h_cam": 1.5})";
    }

    json cfg = {
        {"seed", 7},
        {"iterations", 3},
        {"batch_size", 1},
        {"lambda", 0.1},
        {"target_ratio", 1.0 / 3.0},
        {"eot",
         {{"min_distance_m", 6.5}, {"max_distance_m", 12.0}, {"rotation_deg", 3.0},
          {"brightness_delta", 0.05}, {"saturation_min", 0.95}, {"saturation_max", 1.05}}},
        {"object", {{"height_m", 1.5}}},
        {"evaluate",
         {{"distances_m", {7.0, 10.0}}, {"laterals_m", {0.0}}, {"max_scenes", 1}}},
        {"paths",
         {{"object_image", tmp.path("object.png")},
          {"object_mask", tmp.path("object_mask.png")},
          {"style_image", tmp.path("style.png")},
          {"scene_dir", tmp.path("scenes")}}},
    };
    config_path = tmp.path("run.json");
    std::ofstream out(config_path);
    out << cfg.dump(2);
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("missing config exits with the config code") {
  CHECK(dispatch({"attack", "--config", "/no/such.cfg", "--out", "/tmp/x"}) == 2);
}

TEST_CASE("bad arguments exit with the config code") {
  CHECK(dispatch({"no-such-verb"}) == 2);
  CHECK(dispatch({}) == 2);
}

TEST_CASE("unavailable backends exit with the backend code") {
  CliFixture fx;
  CHECK(dispatch({"attack", "--config", fx.config_path, "--out", fx.tmp.path("out_md2"),
                  "--set", "model.backend=monodepth2"}) == 4);
}

TEST_CASE("full pipeline through the CLI") {
  CliFixture fx;
  const std::string attack_dir = fx.tmp.path("attack_out");

  SUBCASE("attack, evaluate, defend-eval, export-lidar, plot") {
    REQUIRE(dispatch({"attack", "--config", fx.config_path, "--out", attack_dir}) == 0);
    for (const char* f : {"patch.png", "theta.json", "loss_log.csv", "config_snapshot.json",
                          "manifest.json"})
      CHECK(fs::exists(fs::path(attack_dir) / f));

    REQUIRE(dispatch({"evaluate", "--attack-dir", attack_dir}) == 0);
    CHECK(fs::exists(fs::path(attack_dir) / "eval/sweep.csv"));
    CHECK(fs::exists(fs::path(attack_dir) / "eval/summary.json"));
    CHECK(fs::exists(fs::path(attack_dir) / "eval/manifest.json"));

    REQUIRE(dispatch({"defend-eval", "--attack-dir", attack_dir, "--defense", "bits:5",
                      "--defense", "median:5"}) == 0);
    CHECK(fs::exists(fs::path(attack_dir) / "defense/defense.csv"));

    // depth export: run the toy model on one scene composite and save it
    {
      auto setup = testsupport::make_toy_setup();
      const DepthGrid d = predict_depth(*setup.model, setup.assets.scenes[0].background);
      save_depth(d, fx.tmp.path("scene_depth.f32"));
    }
    REQUIRE(dispatch({"export-lidar", "--depth", fx.tmp.path("scene_depth.f32"), "--camera",
                      fx.tmp.path("scenes/camera.json"), "--out", fx.tmp.path("cloud.xyz")}) == 0);
    CHECK(fs::exists(fx.tmp.path("cloud.xyz")));

    REQUIRE(dispatch({"plot", "--in", (fs::path(attack_dir) / "eval").string()}) == 0);
    CHECK(fs::exists(fs::path(attack_dir) / "eval/plots/ed_vs_distance.png"));
    CHECK(fs::exists(fs::path(attack_dir) / "eval/plots/error_cdf.png"));

    REQUIRE(dispatch({"plot", "--in", (fs::path(attack_dir) / "defense").string()}) == 0);
    CHECK(fs::exists(fs::path(attack_dir) / "defense/plots/defense_bit_depth.png"));
    CHECK(fs::exists(fs::path(attack_dir) / "defense/plots/defense_median_blur.png"));
  }

  SUBCASE("identical runs produce identical manifests") {
    const std::string dir_a = fx.tmp.path("rep_a"), dir_b = fx.tmp.path("rep_b");
    REQUIRE(dispatch({"attack", "--config", fx.config_path, "--out", dir_a}) == 0);
    REQUIRE(dispatch({"attack", "--config", fx.config_path, "--out", dir_b}) == 0);
    CHECK(slurp(dir_a + "/manifest.json") == slurp(dir_b + "/manifest.json"));
  }

  SUBCASE("rerunning from the snapshot reproduces identical artifacts") {
    const std::string dir_a = fx.tmp.path("snap_a"), dir_b = fx.tmp.path("snap_b");
    REQUIRE(dispatch({"attack", "--config", fx.config_path, "--out", dir_a}) == 0);
    REQUIRE(dispatch({"attack", "--config", dir_a + "/config_snapshot.json", "--out", dir_b}) ==
            0);
    CHECK(slurp(dir_a + "/patch.png") == slurp(dir_b + "/patch.png"));
    CHECK(slurp(dir_a + "/theta.json") == slurp(dir_b + "/theta.json"));
  }
}

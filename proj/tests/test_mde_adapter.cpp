#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "depthpatch/asset_io.hpp"
#include "depthpatch/mde_adapter.hpp"
#include "support/helpers.hpp"

using namespace depthpatch;
using testsupport::constant_image;
using testsupport::random_image;

namespace {

ModelConfig default_toy() { return ModelConfig{}; }

}  // namespace

TEST_CASE("toy model golden output on a gray image") {
  const ToyDepthModel model(default_toy());
  const ImageRGB gray = constant_image(16, 24, 0.5, 0.5, 0.5);
  const DepthGrid depth = predict_depth(model, gray);

  const std::string golden_path = std::string(DEPTHPATCH_TEST_DATA_DIR) + "/toy_depth_golden.f32";
  REQUIRE_MESSAGE(std::filesystem::exists(golden_path),
                  "golden depth file missing; regenerate per tests/data/README");
  const DepthGrid golden = load_depth(golden_path);
  REQUIRE(golden.h() == depth.h());
  REQUIRE(golden.w() == depth.w());
  for (size_t i = 0; i < depth.values.v.size(); ++i) {
    // golden is float32 on disk; the comparison is bit-exact at that width
    CHECK(float(depth.values.v[i]) == float(golden.values.v[i]));
  }
}

TEST_CASE("toy model obeys the dims and range contracts") {
  const ToyDepthModel model(default_toy());
  for (auto [h, w] : {std::pair{32, 32}, {64, 96}, {13, 7}}) {
    const DepthGrid d = predict_depth(model, random_image(h, w, 5));
    CHECK(d.h() == h);
    CHECK(d.w() == w);
    for (double z : d.values.v) {
      CHECK(z >= 0.1);
      CHECK(z <= 100.0);
    }
  }
}

TEST_CASE("two forward passes are bit-identical") {
  const ToyDepthModel model(default_toy());
  const ImageRGB img = random_image(18, 22, 9);
  const DepthGrid a = predict_depth(model, img);
  const DepthGrid b = predict_depth(model, img);
  for (size_t i = 0; i < a.values.v.size(); ++i) CHECK(a.values.v[i] == b.values.v[i]);
}

TEST_CASE("row prior: mean depth increases strictly from bottom to top rows") {
  const ToyDepthModel model(default_toy());
  const DepthGrid d = predict_depth(model, constant_image(48, 40, 0.5, 0.5, 0.5));
  double prev = -1.0;
  for (int i = d.h() - 1; i >= 0; --i) {
    double mean = 0.0;
    for (int j = 0; j < d.w(); ++j) mean += d.at(i, j);
    mean /= d.w();
    CHECK(mean > prev);
    prev = mean;
  }
}

TEST_CASE("depth gradient") {
  const ToyDepthModel model(default_toy());
  const ImageRGB img = random_image(8, 8, 23, 0.3, 0.7);

  SUBCASE("zero upstream gives a zero gradient of image shape") {
    const ImageRGB g = depth_gradient(model, img, Grid(8, 8, 0.0));
    CHECK(g.h == 8);
    CHECK(g.w == 8);
    for (double v : g.v) CHECK(v == 0.0);
  }

  SUBCASE("matches central finite differences") {
    Rng rng(3);
    Grid upstream(8, 8);
    for (double& u : upstream.v) u = rng.uniform(-1.0, 1.0);

    auto scalar = [&](const ImageRGB& x) {
      const DepthGrid d = predict_depth(model, x);
      double acc = 0.0;
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) acc += d.at(i, j) * upstream.at(i, j);
      return acc;
    };

    const ImageRGB analytic = depth_gradient(model, img, upstream);
    ImageRGB probe = img;
    Rng pick(8);
    int checked = 0;
    for (int n = 0; n < 20; ++n) {
      const int i = int(pick.uniform_int(8)), j = int(pick.uniform_int(8)),
                c = int(pick.uniform_int(3));
      const double keep = probe.at(i, j, c), step = 1e-4;
      probe.at(i, j, c) = keep + step;
      const double hi = scalar(probe);
      probe.at(i, j, c) = keep - step;
      const double lo = scalar(probe);
      probe.at(i, j, c) = keep;
      const double fd = (hi - lo) / (2 * step);
      const double an = analytic.at(i, j, c);
      if (std::abs(fd) < 1e-9 && std::abs(an) < 1e-9) continue;
      CHECK(testsupport::rel_err(an, fd) <= 1e-3);
      ++checked;
    }
    CHECK(checked >= 10);
  }
}

TEST_CASE("fixed-resolution models reject other sizes; letterboxing adapts them") {
  ModelConfig cfg = default_toy();
  cfg.input_height = 32;
  cfg.input_width = 64;

  const ToyDepthModel fixed(cfg);
  CHECK_THROWS_AS(predict_depth(fixed, random_image(20, 50, 2)), Error);

  const auto boxed = make_depth_model(cfg);  // letterboxed by the factory
  const ImageRGB img = random_image(20, 50, 2, 0.3, 0.7);
  const DepthGrid d = predict_depth(*boxed, img);
  CHECK(d.h() == 20);
  CHECK(d.w() == 50);

  // gradient stays image-shaped and matches finite differences through the
  // resize round-trip
  Rng rng(4);
  Grid upstream(20, 50);
  for (double& u : upstream.v) u = rng.uniform(-1.0, 1.0);
  const ImageRGB analytic = depth_gradient(*boxed, img, upstream);
  CHECK(analytic.h == 20);
  CHECK(analytic.w == 50);

  auto scalar = [&](const ImageRGB& x) {
    const DepthGrid dd = predict_depth(*boxed, x);
    double acc = 0.0;
    for (int i = 0; i < 20; ++i)
      for (int j = 0; j < 50; ++j) acc += dd.at(i, j) * upstream.at(i, j);
    return acc;
  };
  ImageRGB probe = img;
  Rng pick(6);
  int checked = 0;
  for (int n = 0; n < 16; ++n) {
    const int i = int(pick.uniform_int(20)), j = int(pick.uniform_int(50)),
              c = int(pick.uniform_int(3));
    const double keep = probe.at(i, j, c), step = 1e-4;
    probe.at(i, j, c) = keep + step;
    const double hi = scalar(probe);
    probe.at(i, j, c) = keep - step;
    const double lo = scalar(probe);
    probe.at(i, j, c) = keep;
    const double fd = (hi - lo) / (2 * step);
    const double an = analytic.at(i, j, c);
    if (std::abs(fd) < 1e-9 && std::abs(an) < 1e-9) continue;
    CHECK(testsupport::rel_err(an, fd) <= 1e-3);
    ++checked;
  }
  CHECK(checked >= 6);
}

TEST_CASE("pretrained backends report backend_unavailable, never fall back") {
  ModelConfig cfg;
  cfg.backend = "monodepth2";
  try {
    make_depth_model(cfg);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::backend_unavailable);
  }

  cfg.weights_dir = "/nonexistent";
  try {
    make_depth_model(cfg);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::backend_unavailable);
  }
}

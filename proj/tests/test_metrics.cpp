#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "depthpatch/metrics.hpp"
#include "support/toysetup.hpp"

using namespace depthpatch;
using testsupport::make_toy_setup;
using testsupport::TmpDir;
using testsupport::ToySetup;

namespace {

DepthGrid grid_from(const std::vector<std::vector<double>>& rows) {
  DepthGrid d;
  d.values = Grid(int(rows.size()), int(rows[0].size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j) d.values.at(int(i), int(j)) = rows[i][j];
  return d;
}

}  // namespace

TEST_CASE("mean depth error") {
  const DepthGrid base = grid_from({{10, 10, 10}, {10, 10, 10}});
  const BinaryMask full(2, 3, 1);

  SUBCASE("identical grids cost zero") { CHECK(mean_depth_error(base, base, full) == 0.0); }

  SUBCASE("uniform +6 m over the object is 6.0") {
    DepthGrid adv = base;
    for (double& v : adv.values.v) v += 6.0;
    CHECK(mean_depth_error(base, adv, full) == doctest::Approx(6.0));
  }

  SUBCASE("3-pixel mask with errors {0,9,30} averages to 13") {
    DepthGrid adv = base;
    BinaryMask m(2, 3);
    m.at(0, 0) = 1;
    m.at(0, 1) = 1;
    m.at(1, 2) = 1;
    adv.values.at(0, 1) += 9.0;
    adv.values.at(1, 2) += 30.0;
    CHECK(mean_depth_error(base, adv, m) == doctest::Approx(13.0));
  }

  SUBCASE("empty mask is an error") {
    CHECK_THROWS_AS(mean_depth_error(base, base, BinaryMask(2, 3)), Error);
  }
}

TEST_CASE("affected ratio") {
  const DepthGrid base = grid_from({{20, 20}, {20, 20}});
  const BinaryMask full(2, 2, 1);

  SUBCASE("identical grids affect nothing") { CHECK(affected_ratio(base, base, full) == 0.0); }

  SUBCASE("50 m everywhere affects everything") {
    DepthGrid adv = base;
    for (double& v : adv.values.v) v += 50.0;
    CHECK(affected_ratio(base, adv, full) == 1.0);
  }

  SUBCASE("threshold boundary is inclusive (>=)") {
    DepthGrid adv = base;
    adv.values.at(0, 0) += 9.99;
    adv.values.at(0, 1) += 10.0;
    adv.values.at(1, 0) += 10.01;
    // (1,1) unchanged
    CHECK(affected_ratio(base, adv, full, 10.0) == doctest::Approx(0.5));
  }
}

TEST_CASE("metrics equal brute-force double loops on random grids") {
  Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    DepthGrid a, b;
    a.values = Grid(8, 8);
    b.values = Grid(8, 8);
    for (double& v : a.values.v) v = rng.uniform(1.0, 60.0);
    for (double& v : b.values.v) v = rng.uniform(1.0, 60.0);
    BinaryMask m(8, 8);
    for (auto& v : m.v) v = rng.uniform01() < 0.5 ? 1 : 0;
    if (m.count() == 0) m.at(0, 0) = 1;

    double sum = 0.0;
    size_t n = 0, hits = 0;
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) {
        if (!m.at(i, j)) continue;
        const double d = std::abs(a.at(i, j) - b.at(i, j));
        sum += d;
        hits += d >= 10.0 ? 1 : 0;
        ++n;
      }

    CHECK(mean_depth_error(a, b, m) == sum / double(n));
    CHECK(affected_ratio(a, b, m, 10.0) == double(hits) / double(n));

    // symmetry and threshold monotonicity
    CHECK(mean_depth_error(a, b, m) == mean_depth_error(b, a, m));
    double prev = 2.0;
    for (double thr : {1.0, 5.0, 10.0, 20.0, 40.0}) {
      const double r = affected_ratio(a, b, m, thr);
      CHECK(r <= prev);
      prev = r;
    }
  }
}

TEST_CASE("depth from height") {
  const CameraModel cam{100.0, 2.0, 1.5};
  CHECK(depth_from_height(cam, 2.0, 50.0) == doctest::Approx(4.0));
  CHECK(depth_from_height(cam, 2.0, 100.0) == doctest::Approx(2.0));  // doubling s halves z
  const double z = depth_from_height(cam, 2.0, 37.0);
  CHECK(z * 37.0 / cam.f == doctest::Approx(2.0));  // recovers H
  CHECK_THROWS_AS(depth_from_height(cam, 2.0, 0.0), Error);
}

TEST_CASE("detection rate") {
  CHECK(detection_rate({true, true, true}) == 1.0);

  std::vector<bool> route1(477, false);
  for (int i = 0; i < 469; ++i) route1[i] = true;
  CHECK(std::round(detection_rate(route1) * 10000) / 100 == doctest::Approx(98.32));

  std::vector<bool> route1_adv(468, false);
  for (int i = 0; i < 45; ++i) route1_adv[i] = true;
  CHECK(std::round(detection_rate(route1_adv) * 10000) / 100 == doctest::Approx(9.62));

  CHECK_THROWS_AS(detection_rate({}), Error);
}

TEST_CASE("placement sweep") {
  ToySetup setup = make_toy_setup();

  SUBCASE("zero-perturbation patch gives zero error everywhere") {
    PatchArtifacts pa;
    pa.patch = setup.assets.object.image;  // x' = x over the region
    pa.thetas = {RegionParams::full_frame(16, 20)};
    pa.tanh_k = setup.cfg.region.tanh_k;

    const EvalReport report = placement_sweep(setup.assets, pa, *setup.model, setup.cfg.evaluate);
    REQUIRE(!report.cells.empty());
    int evaluated = 0;
    for (const SweepCell& c : report.cells) {
      if (c.skipped) continue;
      CHECK(c.e_d <= 0.05);
      ++evaluated;
    }
    CHECK(evaluated > 0);
  }

  SUBCASE("5x3 grid bookkeeping: at most 15 cells, every distance present") {
    PatchArtifacts pa;
    pa.patch = setup.assets.object.image;
    pa.thetas = {RegionParams::full_frame(16, 20)};
    pa.tanh_k = 1.0;

    const EvalReport report = placement_sweep(setup.assets, pa, *setup.model, setup.cfg.evaluate);
    CHECK(report.cells.size() <= 15);
    for (double z : setup.cfg.evaluate.distances_m) {
      int present = 0;
      for (const SweepCell& c : report.cells)
        if (c.distance_m == z && !c.skipped) ++present;
      CHECK(present >= 1);
    }
  }

  SUBCASE("CSV and summary outputs are written and well-formed") {
    PatchArtifacts pa;
    pa.patch = setup.assets.object.image;
    pa.thetas = {RegionParams::full_frame(16, 20)};
    pa.tanh_k = 1.0;
    const EvalReport report = placement_sweep(setup.assets, pa, *setup.model, setup.cfg.evaluate);

    TmpDir tmp("sweepio");
    write_sweep_csv(report, tmp.path("sweep.csv"));
    write_error_samples_csv(report, tmp.path("errors.csv"));
    write_summary_json(report, tmp.path("summary.json"));
    for (const char* f : {"sweep.csv", "errors.csv", "summary.json"})
      CHECK(std::filesystem::file_size(tmp.path(f)) > 0);
  }
}

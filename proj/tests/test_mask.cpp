#include <doctest.h>

#include <cmath>

#include "depthpatch/mask.hpp"
#include "support/helpers.hpp"

using namespace depthpatch;
using testsupport::finite_diff;
using testsupport::max_grad_rel_err;

namespace {

std::vector<double> theta_vec(const RegionParams& p) { return {p.l, p.r, p.t, p.b}; }
RegionParams theta_from(const std::vector<double>& v) { return {v[0], v[1], v[2], v[3]}; }

double weighted_mask_sum(const RegionParams& p, int w, int h, double k, const Grid& weights) {
  const SoftMask m = soft_mask(p, w, h, k);
  double acc = 0.0;
  for (size_t i = 0; i < m.values.v.size(); ++i) acc += m.values.v[i] * weights.v[i];
  return acc;
}

}  // namespace

TEST_CASE("hard mask: full frame, degenerate, and the 30x30 example") {
  const int w = 30, h = 30;

  const BinaryMask full = hard_mask(RegionParams::full_frame(w, h), w, h);
  CHECK(full.count() == size_t(w) * h);

  const BinaryMask zero = hard_mask(RegionParams{12, 12, 5, 20}, w, h);
  CHECK(zero.count() == 0);

  // w=h=30, l=t=10, r=b=20: a 10x10 interior block of ones
  const BinaryMask fig = hard_mask(RegionParams{10, 20, 10, 20}, w, h);
  CHECK(fig.count() == 100);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const bool inside = i >= 10 && i < 20 && j >= 10 && j < 20;
      CHECK(fig.at(i, j) == (inside ? 1 : 0));
    }
}

TEST_CASE("soft mask pointwise anchors") {
  const int w = 40, h = 40;
  const RegionParams p{10, 30, 10, 30};

  SUBCASE("deep interior saturates to >= 0.999") {
    for (double k : {1.0, 2.0}) {
      const SoftMask m = soft_mask(p, w, h, k);
      // pixels at least 5/k from every border
      const int off = int(std::ceil(5.0 / k));
      for (int i = 10 + off; i <= 30 - off; ++i)
        for (int j = 10 + off; j <= 30 - off; ++j) CHECK(m.values.at(i, j) >= 0.999);
    }
  }

  SUBCASE("corner value is exactly 0.25 for any k") {
    for (double k : {0.5, 1.0, 3.0, 10.0}) {
      const SoftMask m = soft_mask(p, w, h, k);
      CHECK(m.values.at(10, 10) == doctest::Approx(0.25).epsilon(1e-12));
    }
  }

  SUBCASE("border midline is ~0.5") {
    const SoftMask m = soft_mask(p, w, h, 1.0);
    CHECK(m.values.at(10, 20) == doctest::Approx(0.5).epsilon(1e-3));
  }
}

TEST_CASE("soft mask converges to the hard mask away from borders") {
  const int w = 30, h = 26;
  const RegionParams p{8, 22, 6, 19};
  const BinaryMask hard = hard_mask(p, w, h);

  auto interior_disagreement = [&](double k) {
    const SoftMask soft = soft_mask(p, w, h, k);
    double worst = 0.0;
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const double dist = std::min(std::min(std::abs(i - p.t), std::abs(i - p.b)),
                                     std::min(std::abs(j - p.l), std::abs(j - p.r)));
        if (dist < 2.0) continue;
        worst = std::max(worst, std::abs(soft.values.at(i, j) - double(hard.at(i, j))));
      }
    return worst;
  };

  const double d5 = interior_disagreement(5.0);
  CHECK(d5 <= 1e-3);
  CHECK(interior_disagreement(8.0) <= d5);
  CHECK(interior_disagreement(12.0) <= interior_disagreement(8.0));
}

TEST_CASE("soft mask gradients match central finite differences") {
  const int w = 18, h = 14;
  Rng rng(77);
  Grid weights(h, w);
  for (double& x : weights.v) x = rng.uniform(-1.0, 1.0);

  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    Rng trng(seed);
    RegionParams p;
    p.l = trng.uniform(2.0, 7.0);
    p.r = trng.uniform(10.0, 16.0);
    p.t = trng.uniform(1.0, 5.0);
    p.b = trng.uniform(8.0, 12.0);

    const SoftMask m = soft_mask(p, w, h, 1.0);
    const EdgeGrad analytic = soft_mask_vjp(m, weights);
    const auto fd = finite_diff(
        [&](const std::vector<double>& v) {
          return weighted_mask_sum(theta_from(v), w, h, 1.0, weights);
        },
        theta_vec(p), 1e-3);
    CHECK(max_grad_rel_err({analytic.begin(), analytic.end()}, fd) <= 1e-4);
  }
}

TEST_CASE("mask loss values and the equal-edge gradient identity") {
  const int w = 30, h = 30;
  CHECK(mask_loss({RegionParams::full_frame(w, h)}, w, h) == doctest::Approx(1.0));
  CHECK(mask_loss({RegionParams{4, 4, 9, 9}}, w, h) == 0.0);
  CHECK(mask_loss({RegionParams{10, 20, 10, 20}}, w, h) == doctest::Approx(1.0 / 3.0));

  const auto grads = mask_loss_grad({RegionParams{10, 20, 10, 20}}, w, h);
  REQUIRE(grads.size() == 1);
  const double g = 1.0 / (w + h);
  CHECK(grads[0][0] == -g);  // exact, by construction
  CHECK(grads[0][1] == g);
  CHECK(grads[0][2] == -g);
  CHECK(grads[0][3] == g);
  for (int e = 0; e < 4; ++e) CHECK(std::abs(grads[0][e]) == g);

  const auto fd = finite_diff(
      [&](const std::vector<double>& v) { return mask_loss({theta_from(v)}, w, h); },
      theta_vec(RegionParams{10, 20, 10, 20}), 1e-3);
  CHECK(max_grad_rel_err({grads[0].begin(), grads[0].end()}, fd) <= 1e-4);
}

TEST_CASE("compose_shape") {
  const int w = 24, h = 24;
  const RegionParams p{6, 16, 4, 14};
  const SoftMask soft = soft_mask(p, w, h, 2.0);

  SUBCASE("all-ones shape is the identity") {
    const BinaryMask shape(2, 2, 1);
    const SoftMask out = compose_shape(soft, shape);
    for (size_t i = 0; i < out.values.v.size(); ++i) CHECK(out.values.v[i] == soft.values.v[i]);
  }

  SUBCASE("all-zeros shape clears the rectangle interior, skirt untouched") {
    const BinaryMask shape(2, 2, 0);
    const SoftMask out = compose_shape(soft, shape);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const bool inside = i >= 4 && i < 14 && j >= 6 && j < 16;
        if (inside)
          CHECK(out.values.at(i, j) == 0.0);
        else
          CHECK(out.values.at(i, j) == soft.values.at(i, j));
      }
  }

  SUBCASE("2x2 checkerboard scales to 5x5 blocks, verified pixelwise") {
    BinaryMask shape(2, 2, 0);
    shape.at(0, 0) = 1;
    shape.at(1, 1) = 1;
    const SoftMask out = compose_shape(soft, shape);
    // independent nearest-neighbor oracle over the 10x10 region box
    for (int i = 4; i < 14; ++i)
      for (int j = 6; j < 16; ++j) {
        const int si = std::min(1, (i - 4) / 5);
        const int sj = std::min(1, (j - 6) / 5);
        const double expect = shape.at(si, sj) ? soft.values.at(i, j) : 0.0;
        CHECK(out.values.at(i, j) == doctest::Approx(expect).epsilon(1e-12));
      }
  }

  SUBCASE("degenerate region is an error") {
    const SoftMask tiny = soft_mask(RegionParams{6, 6.2, 4, 14}, w, h, 2.0);
    CHECK_THROWS_AS(compose_shape(tiny, BinaryMask(2, 2, 1)), Error);
  }

  SUBCASE("compose_shape never increases any pixel value") {
    Rng rng(5);
    BinaryMask shape(3, 4);
    for (auto& v : shape.v) v = rng.uniform01() < 0.5 ? 0 : 1;
    const SoftMask out = compose_shape(soft, shape);
    for (size_t i = 0; i < out.values.v.size(); ++i)
      CHECK(out.values.v[i] <= soft.values.v[i] + 1e-15);
  }
}

TEST_CASE("union_masks") {
  SUBCASE("single mask is the identity") {
    const SoftMask m = soft_mask(RegionParams{2, 8, 3, 9}, 12, 12, 1.0);
    const UnionResult u = union_masks({m.values});
    for (size_t i = 0; i < u.values.v.size(); ++i) CHECK(u.values.v[i] == m.values.v[i]);
  }

  SUBCASE("disjoint saturated regions equal the elementwise max") {
    const int w = 20, h = 20;
    const SoftMask a = soft_mask(RegionParams{1, 8, 1, 8}, w, h, 8.0);
    const SoftMask b = soft_mask(RegionParams{12, 19, 12, 19}, w, h, 8.0);
    const UnionResult u = union_masks({a.values, b.values});
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const double mx = std::max(a.values.at(i, j), b.values.at(i, j));
        CHECK(u.values.at(i, j) == doctest::Approx(mx).epsilon(1e-6));
      }
  }

  SUBCASE("output stays in [0,1] for any inputs") {
    const int w = 16, h = 16;
    std::vector<Grid> masks;
    for (int r = 0; r < 3; ++r)
      masks.push_back(soft_mask(RegionParams{2, 14, 2, 14}, w, h, 2.0).values);
    const UnionResult u = union_masks(masks);
    for (double v : u.values.v) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }

  SUBCASE("dimension mismatch is an error") {
    CHECK_THROWS_AS(union_masks({Grid(4, 4), Grid(4, 5)}), Error);
  }
}

TEST_CASE("region_ratio") {
  BinaryMask obj(30, 30);
  for (int i = 5; i < 20; ++i)
    for (int j = 5; j < 25; ++j) obj.at(i, j) = 1;  // 15x20 = 300 px

  CHECK(region_ratio(RegionParams{5, 25, 5, 20}, obj) == doctest::Approx(1.0));
  CHECK(region_ratio(RegionParams{7, 7, 9, 9}, obj) == 0.0);
  CHECK(region_ratio(RegionParams{0, 10, 0, 10}, obj) == doctest::Approx(1.0 / 3.0));

  CHECK_THROWS_AS(region_ratio(RegionParams{0, 1, 0, 1}, BinaryMask(4, 4)), Error);
}

TEST_CASE("project_params clamps and midpoints") {
  const int w = 30, h = 20;
  const RegionParams ok{3, 9, 2, 11};
  const RegionParams same = project_params(ok, w, h);
  CHECK(same.l == 3.0);
  CHECK(same.r == 9.0);
  CHECK(same.t == 2.0);
  CHECK(same.b == 11.0);

  CHECK(project_params(RegionParams{-3, 9, 2, 11}, w, h).l == 0.0);
  CHECK(project_params(RegionParams{3, 99, 2, 11}, w, h).r == double(w));

  const RegionParams inv = project_params(RegionParams{12, 10, 2, 11}, w, h);
  CHECK(inv.l == doctest::Approx(11.0));
  CHECK(inv.r == doctest::Approx(11.0));
}

TEST_CASE("patch mask assembly gradients (shape + union) match finite differences") {
  const int w = 22, h = 18;
  BinaryMask shape(2, 2, 1);
  shape.at(0, 1) = 0;

  Rng rng(13);
  Grid weights(h, w);
  for (double& x : weights.v) x = rng.uniform(-1.0, 1.0);

  const std::vector<RegionParams> thetas = {{3, 10, 2, 9}, {12, 20, 8, 16}};

  auto value = [&](const std::vector<double>& flat) {
    std::vector<RegionParams> ps;
    for (size_t r = 0; r < flat.size(); r += 4)
      ps.push_back({flat[r], flat[r + 1], flat[r + 2], flat[r + 3]});
    const PatchMaskCtx ctx = build_patch_mask(ps, w, h, 1.0, &shape);
    double acc = 0.0;
    for (size_t i = 0; i < ctx.values.v.size(); ++i) acc += ctx.values.v[i] * weights.v[i];
    return acc;
  };

  const PatchMaskCtx ctx = build_patch_mask(thetas, w, h, 1.0, &shape);
  const auto grads = patch_mask_vjp(ctx, weights);
  REQUIRE(grads.size() == 2);

  std::vector<double> flat;
  for (const auto& p : thetas) {
    flat.push_back(p.l);
    flat.push_back(p.r);
    flat.push_back(p.t);
    flat.push_back(p.b);
  }
  const auto fd = finite_diff(value, flat, 1e-4);

  std::vector<double> analytic;
  for (const auto& g : grads) analytic.insert(analytic.end(), g.begin(), g.end());
  // the shape boxes snap to pixels, so FD probes that cross a snap boundary
  // are excluded by the small step; compare with the standard tolerance
  CHECK(max_grad_rel_err(analytic, fd, 1e-6) <= 1e-3);
}

// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <rdg/errors.hpp>
#include <rdg/splatter.hpp>

#include "support/finite_difference.hpp"
#include "support/reference_splatter.hpp"
#include "support/scene_fixtures.hpp"

using namespace rdg;

namespace {

// Primitive whose footprint is flat across the tested pixel: huge screen
// covariance makes falloff at the center numerically 1.
GaussianPrimitive flat_primitive(double z, double alpha, const Eigen::Vector3d& color) {
  GaussianPrimitive p;
  p.position = {0.0, 0.0, z};
  p.log_scale = Eigen::Vector3d::Constant(std::log(40.0 * z));
  p.opacity_logit = logit(alpha);
  p.color = color;
  return p;
}

}  // namespace

TEST_CASE("render composites one flat primitive as alpha times color") {
  Camera cam = rdgtest::axis_camera(3, 3.0, 0.1, 100.0);
  GaussianSet set;
  set.primitives.push_back(flat_primitive(2.0, 0.8, {1.0, 0.0, 0.0}));
  const RenderOutput out = render(set, cam);
  CHECK(out.image.at(1, 1, 0) == doctest::Approx(0.8).epsilon(1e-9));
  CHECK(out.image.at(1, 1, 1) == doctest::Approx(0.0));
  CHECK(out.acc_alpha.at(1, 1) == doctest::Approx(0.8).epsilon(1e-9));
}

TEST_CASE("render blends two primitives per the compositing identities") {
  // effective alphas 0.6 then 0.5, grays 1.0 and 0.5, depths 2 and 4
  Camera cam = rdgtest::axis_camera(3, 3.0, 0.1, 100.0);
  GaussianSet set;
  set.primitives.push_back(flat_primitive(2.0, 0.6, {1.0, 1.0, 1.0}));
  set.primitives.push_back(flat_primitive(4.0, 0.5, {0.5, 0.5, 0.5}));
  const RenderOutput out = render(set, cam);
  CHECK(out.image.at(1, 1, 0) == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(out.depth_raw.at(1, 1) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(out.acc_alpha.at(1, 1) == doctest::Approx(0.8).epsilon(1e-9));
  CHECK(out.depth.at(1, 1) == doctest::Approx(2.5).epsilon(1e-9));
}

TEST_CASE("render of an empty frustum returns zero buffers") {
  Camera cam = rdgtest::axis_camera();
  GaussianSet set;
  GaussianPrimitive behind;
  behind.position = {0.0, 0.0, -3.0};
  set.primitives.push_back(behind);
  const RenderOutput out = render(set, cam);
  for (double v : out.image.data()) CHECK(v == 0.0);
  for (double v : out.acc_alpha.data()) CHECK(v == 0.0);
}

TEST_CASE("blending weights sum to one under opaque coverage") {
  Camera cam = rdgtest::axis_camera(3, 3.0, 0.1, 100.0);
  GaussianSet set;
  for (int i = 0; i < 4; ++i)
    set.primitives.push_back(flat_primitive(1.5 + 0.5 * i, 0.995, {0.5, 0.5, 0.5}));
  const RenderOutput out = render(set, cam);
  // The 0.99 alpha clamp and the 1e-4 transmittance cutoff floor the
  // residual transmittance at exactly 1e-6; allow rounding on top of it.
  CHECK(std::abs(out.acc_alpha.at(1, 1) - 1.0) <= 1.01e-6);

  // Conservation identity: accumulated weights telescope to 1 - T.
  double transmittance = 1.0;
  for (int i = 0; i < 3; ++i) transmittance *= 1.0 - 0.99;  // 3 processed, clamped
  CHECK(out.acc_alpha.at(1, 1) == doctest::Approx(1.0 - transmittance).epsilon(1e-12));
}

TEST_CASE("alpha-normalized depth stays within a percent of raw under near-full coverage") {
  Camera cam = rdgtest::axis_camera(3, 3.0, 0.1, 100.0);
  GaussianSet set;
  for (int i = 0; i < 4; ++i)
    set.primitives.push_back(flat_primitive(1.5 + 0.5 * i, 0.995, {0.5, 0.5, 0.5}));
  const RenderOutput out = render(set, cam);
  REQUIRE(out.acc_alpha.at(1, 1) > 0.99);
  CHECK(std::abs(out.depth.at(1, 1) - out.depth_raw.at(1, 1)) <=
        0.01 * out.depth.at(1, 1));
}

TEST_CASE("render is bit-identical under primitive permutation") {
  Camera cam = rdgtest::axis_camera();
  const GaussianSet set = rdgtest::random_scene(5, 42);
  const RenderOutput base = render(set, cam);

  GaussianSet shuffled = set;
  std::mt19937 rng(7);
  std::shuffle(shuffled.primitives.begin(), shuffled.primitives.end(), rng);
  const RenderOutput perm = render(shuffled, cam);

  CHECK(base.image.data() == perm.image.data());
  CHECK(base.depth_raw.data() == perm.depth_raw.data());
  CHECK(base.depth.data() == perm.depth.data());
  CHECK(base.acc_alpha.data() == perm.acc_alpha.data());
}

TEST_CASE("render matches the naive per-pixel reference evaluator") {
  Camera cam = rdgtest::axis_camera();
  for (unsigned seed : {1u, 2u, 3u, 4u, 5u, 6u, 7u, 8u}) {
    const GaussianSet set = rdgtest::random_scene(1 + seed % 5, 100 + seed);
    const RenderOutput out = render(set, cam);
    const rdgtest::ReferenceOutputs ref = rdgtest::reference_render(set, cam);
    for (size_t i = 0; i < out.image.size(); ++i)
      CHECK(std::abs(out.image.data()[i] - ref.image.data()[i]) <= 1e-6);
    for (size_t i = 0; i < out.depth.size(); ++i) {
      CHECK(std::abs(out.depth_raw.data()[i] - ref.depth_raw.data()[i]) <= 1e-6);
      CHECK(std::abs(out.depth.data()[i] - ref.depth.data()[i]) <= 1e-6);
      CHECK(std::abs(out.acc_alpha.data()[i] - ref.acc_alpha.data()[i]) <= 1e-6);
    }
  }
}

TEST_CASE("backward returns zeros for zero cotangents") {
  Camera cam = rdgtest::axis_camera();
  const GaussianSet set = rdgtest::random_scene(4, 9);
  const RenderOutput out = render(set, cam);
  const ImageBuffer zero_img(cam.height, cam.width, 0.0);
  const DepthMap zero_depth(cam.height, cam.width, 0.0);
  const GradientSet g = backward(out, set, cam, zero_img, zero_depth);
  for (size_t i = 0; i < g.size(); ++i) {
    CHECK(g.position[i].norm() == 0.0);
    CHECK(g.color[i].norm() == 0.0);
    CHECK(g.opacity_logit[i] == 0.0);
  }
}

TEST_CASE("single-primitive color gradient equals the effective alpha") {
  Camera cam = rdgtest::axis_camera(3, 3.0, 0.1, 100.0);
  GaussianSet set;
  set.primitives.push_back(flat_primitive(2.0, 0.73, {0.2, 0.4, 0.6}));
  const RenderOutput out = render(set, cam);

  ImageBuffer d_img(cam.height, cam.width, 0.0);
  d_img.at(1, 1, 0) = 1.0;
  const DepthMap zero_depth(cam.height, cam.width, 0.0);
  const GradientSet g = backward(out, set, cam, d_img, zero_depth);
  CHECK(g.color[0][0] == doctest::Approx(0.73).epsilon(1e-9));
  CHECK(g.color[0][1] == 0.0);
}

TEST_CASE("backward throws TapeMismatch after densification") {
  Camera cam = rdgtest::axis_camera();
  GaussianSet set = rdgtest::random_scene(3, 21);
  const RenderOutput out = render(set, cam);
  set.generation_tag++;
  const ImageBuffer d_img(cam.height, cam.width, 0.0);
  const DepthMap d_depth(cam.height, cam.width, 0.0);
  CHECK_THROWS_AS(backward(out, set, cam, d_img, d_depth), TapeMismatch);
}

TEST_CASE("backward matches central finite differences on random scenes") {
  Camera cam = rdgtest::axis_camera();
  const auto seeds = rdgtest::safe_scene_seeds(6, 300, 5, cam);
  REQUIRE(seeds.size() == 6);
  const double h = 1e-4;

  for (unsigned seed : seeds) {
    const GaussianSet set = rdgtest::random_scene(5, seed);
    std::mt19937 rng(seed + 999);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    ImageBuffer d_img(cam.height, cam.width);
    DepthMap d_depth(cam.height, cam.width);
    for (double& v : d_img.data()) v = uni(rng);
    for (double& v : d_depth.data()) v = 0.2 * uni(rng);

    const auto loss = [&](const std::vector<double>& params) {
      const GaussianSet s = rdgtest::unflatten(params);
      const RenderOutput out = render(s, cam);
      double total = 0.0;
      for (size_t i = 0; i < out.image.size(); ++i)
        total += d_img.data()[i] * out.image.data()[i];
      for (size_t i = 0; i < out.depth.size(); ++i)
        total += d_depth.data()[i] * out.depth.data()[i];
      return total;
    };

    const RenderOutput out = render(set, cam);
    const GradientSet analytic = backward(out, set, cam, d_img, d_depth);
    const std::vector<double> fd =
        rdgtest::central_difference(loss, rdgtest::flatten(set), h);
    const double err = rdgtest::rel_error_l2(rdgtest::flatten_gradients(analytic), fd);
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("backward against the raw depth cotangent also matches finite differences") {
  Camera cam = rdgtest::axis_camera();
  const auto seeds = rdgtest::safe_scene_seeds(2, 800, 4, cam);
  REQUIRE(seeds.size() == 2);
  for (unsigned seed : seeds) {
    const GaussianSet set = rdgtest::random_scene(4, seed);
    ImageBuffer d_img(cam.height, cam.width, 0.0);
    DepthMap d_depth(cam.height, cam.width, 0.05);

    const auto loss = [&](const std::vector<double>& params) {
      const RenderOutput out = render(rdgtest::unflatten(params), cam);
      double total = 0.0;
      for (size_t i = 0; i < out.depth_raw.size(); ++i)
        total += d_depth.data()[i] * out.depth_raw.data()[i];
      return total;
    };
    const RenderOutput out = render(set, cam);
    const GradientSet analytic =
        backward(out, set, cam, d_img, d_depth, DepthCotangent::kRaw);
    const std::vector<double> fd =
        rdgtest::central_difference(loss, rdgtest::flatten(set), 1e-4);
    CHECK(rdgtest::rel_error_l2(rdgtest::flatten_gradients(analytic), fd) <= 1e-4);
  }
}

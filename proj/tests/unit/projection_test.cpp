// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <rdg/projection.hpp>

#include "support/scene_fixtures.hpp"

using namespace rdg;

TEST_CASE("build_covariance identity inputs give the identity") {
  GaussianPrimitive prim;
  const Eigen::Matrix3d sigma = build_covariance(prim);
  CHECK((sigma - Eigen::Matrix3d::Identity()).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("build_covariance scales enter squared") {
  GaussianPrimitive prim;
  prim.log_scale = {std::log(2.0), 0.0, 0.0};
  const Eigen::Matrix3d sigma = build_covariance(prim);
  CHECK(sigma(0, 0) == doctest::Approx(4.0));
  CHECK(sigma(1, 1) == doctest::Approx(1.0));
  CHECK(sigma(2, 2) == doctest::Approx(1.0));
  CHECK(std::abs(sigma(0, 1)) < 1e-12);
}

TEST_CASE("build_covariance rotates the scaled axes") {
  GaussianPrimitive prim;
  prim.log_scale = {std::log(2.0), 0.0, 0.0};
  const double s = std::sin(M_PI / 4.0);  // 90 deg about z: q = (cos45, 0, 0, sin45)
  prim.rotation = {s, 0.0, 0.0, s};
  const Eigen::Matrix3d sigma = build_covariance(prim);
  CHECK(sigma(0, 0) == doctest::Approx(1.0));
  CHECK(sigma(1, 1) == doctest::Approx(4.0));
  CHECK(sigma(2, 2) == doctest::Approx(1.0));
}

TEST_CASE("build_covariance stays PSD and reconstructs from its eigendecomposition") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    GaussianPrimitive prim;
    for (int k = 0; k < 3; ++k) prim.log_scale[k] = -2.0 + 3.0 * uni(rng);
    Eigen::Vector4d q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
    prim.rotation = q.normalized();
    const Eigen::Matrix3d sigma = build_covariance(prim);
    CHECK((sigma - sigma.transpose()).norm() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(sigma);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-9);
    const Eigen::Matrix3d rebuilt = eig.eigenvectors() *
                                    eig.eigenvalues().asDiagonal() *
                                    eig.eigenvectors().transpose();
    CHECK((sigma - rebuilt).norm() < 1e-6);
  }
}

TEST_CASE("project_gaussian matches the on-axis closed form") {
  rdg::Camera cam = rdgtest::axis_camera(20, 24.0);
  GaussianPrimitive prim;
  const double sigma3d = 0.08, z = 2.0;
  prim.position = {0.0, 0.0, z};
  prim.log_scale = Eigen::Vector3d::Constant(std::log(sigma3d));
  const auto proj = project_gaussian(prim, cam);
  REQUIRE(proj.has_value());
  const double expected = std::pow(cam.fx * sigma3d / z, 2.0);
  CHECK(proj->cov2d(0, 0) - kCov2dFloorPx2 == doctest::Approx(expected).epsilon(1e-9));
  CHECK(proj->cov2d(1, 1) - kCov2dFloorPx2 == doctest::Approx(expected).epsilon(1e-9));
  CHECK(std::abs(proj->cov2d(0, 1)) < 1e-12);
  CHECK(proj->mean2d.x() == doctest::Approx(cam.cx));
  CHECK(proj->view_depth == doctest::Approx(z));
}

TEST_CASE("project_gaussian culls points behind the camera") {
  rdg::Camera cam = rdgtest::axis_camera();
  GaussianPrimitive prim;
  prim.position = {0.0, 0.0, -1.0};
  CHECK(!project_gaussian(prim, cam).has_value());
  prim.position = {0.0, 0.0, 0.0};
  CHECK(!project_gaussian(prim, cam).has_value());
}

TEST_CASE("project_gaussian is invariant under a shared rigid world offset") {
  rdg::Camera cam = rdgtest::axis_camera();
  GaussianPrimitive prim;
  prim.position = {0.2, -0.1, 2.3};
  prim.log_scale = {std::log(0.1), std::log(0.07), std::log(0.05)};
  const auto base = project_gaussian(prim, cam);

  const Eigen::Vector3d offset(3.0, -2.0, 1.0);
  rdg::Camera moved = cam;
  moved.t_wc = cam.t_wc - cam.rot_wc * offset;  // same rig, eye shifted by offset
  GaussianPrimitive shifted = prim;
  shifted.position += offset;
  const auto moved_proj = project_gaussian(shifted, moved);
  REQUIRE(base.has_value());
  REQUIRE(moved_proj.has_value());
  CHECK((base->mean2d - moved_proj->mean2d).norm() < 1e-9);
  CHECK((base->cov2d - moved_proj->cov2d).norm() < 1e-9);
  CHECK(base->view_depth == doctest::Approx(moved_proj->view_depth));
}

TEST_CASE("projected covariance agrees with finite-difference jacobian propagation") {
  rdg::Camera cam = rdgtest::axis_camera(24, 26.0);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double h = 1e-4;

  for (int trial = 0; trial < 50; ++trial) {
    GaussianPrimitive prim;
    prim.position = {0.6 * (uni(rng) - 0.5), 0.6 * (uni(rng) - 0.5), 1.7 + uni(rng)};
    for (int k = 0; k < 3; ++k) prim.log_scale[k] = std::log(0.05 + 0.1 * uni(rng));
    Eigen::Vector4d q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
    prim.rotation = q.normalized();

    const auto proj = project_gaussian(prim, cam);
    REQUIRE(proj.has_value());

    const Eigen::Vector3d t = cam.to_view(prim.position);
    auto pi = [&](const Eigen::Vector3d& p) {
      return Eigen::Vector2d(cam.fx * p.x() / p.z() + cam.cx,
                             cam.fy * p.y() / p.z() + cam.cy);
    };
    Eigen::Matrix<double, 2, 3> j_num;
    for (int k = 0; k < 3; ++k) {
      Eigen::Vector3d tp = t, tm = t;
      tp[k] += h;
      tm[k] -= h;
      j_num.col(k) = (pi(tp) - pi(tm)) / (2.0 * h);
    }
    const Eigen::Matrix2d cov_num = j_num * cam.rot_wc * build_covariance(prim) *
                                    cam.rot_wc.transpose() * j_num.transpose();
    const Eigen::Matrix2d cov_analytic =
        proj->cov2d - kCov2dFloorPx2 * Eigen::Matrix2d::Identity();
    CHECK((cov_analytic - cov_num).norm() / cov_num.norm() <= 1e-3);

    CHECK(proj->view_depth == t.z());  // machine-exact: same arithmetic path
  }
}

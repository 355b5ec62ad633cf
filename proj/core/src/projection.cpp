// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#include "rdg/projection.hpp"

namespace rdg {

Eigen::Matrix3d build_covariance(const GaussianPrimitive& prim) {
  const Eigen::Matrix3d r = rotation_matrix(prim.rotation);
  const Eigen::Vector3d s2 = (2.0 * prim.log_scale).array().exp();
  // R * diag(exp(2s)) * R^T, symmetrized to wash out round-off.
  Eigen::Matrix3d sigma = r * s2.asDiagonal() * r.transpose();
  return 0.5 * (sigma + sigma.transpose());
}

Eigen::Matrix<double, 2, 3> projection_jacobian(const Eigen::Vector3d& t,
                                                double fx, double fy) {
  const double inv_z = 1.0 / t.z();
  const double inv_z2 = inv_z * inv_z;
  Eigen::Matrix<double, 2, 3> j;
  j << fx * inv_z, 0.0, -fx * t.x() * inv_z2,
      0.0, fy * inv_z, -fy * t.y() * inv_z2;
  return j;
}

std::optional<ProjectedGaussian> project_gaussian(const GaussianPrimitive& prim,
                                                  const Camera& cam) {
  const Eigen::Vector3d t = cam.to_view(prim.position);
  if (t.z() <= kNearCullFraction * cam.near_z) return std::nullopt;

  const Eigen::Matrix<double, 2, 3> j = projection_jacobian(t, cam.fx, cam.fy);
  const Eigen::Matrix<double, 2, 3> a = j * cam.rot_wc;
  const Eigen::Matrix3d sigma = build_covariance(prim);

  ProjectedGaussian out;
  out.view_depth = t.z();
  out.mean2d = {cam.fx * t.x() / t.z() + cam.cx, cam.fy * t.y() / t.z() + cam.cy};
  Eigen::Matrix2d cov = a * sigma * a.transpose();
  cov = 0.5 * (cov + cov.transpose());
  cov(0, 0) += kCov2dFloorPx2;
  cov(1, 1) += kCov2dFloorPx2;
  out.cov2d = cov;
  return out;
}

}  // namespace rdg

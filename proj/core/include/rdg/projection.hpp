// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <optional>

#include "rdg/scene.hpp"

namespace rdg {

/// Anti-aliasing floor added to the diagonal of every projected 2D
/// covariance; keeps cov2d invertible for degenerate splats.
inline constexpr double kCov2dFloorPx2 = 0.3;

/// Fraction of the near plane below which a primitive is culled for a view.
inline constexpr double kNearCullFraction = 0.5;

struct ProjectedGaussian {
  Eigen::Vector2d mean2d;   // pixel coordinates
  Eigen::Matrix2d cov2d;    // includes the diagonal floor
  double view_depth = 0.0;  // view-space z of the mean
};

/// Sigma = R * M * M^T * R^T with M = diag(exp(log_scale)).
Eigen::Matrix3d build_covariance(const GaussianPrimitive& prim);

/// Perspective Jacobian of (x,y,z) -> (fx*x/z + cx, fy*y/z + cy) at t.
Eigen::Matrix<double, 2, 3> projection_jacobian(const Eigen::Vector3d& t,
                                                double fx, double fy);

/// Affine-approximate projection of the primitive's covariance into pixel
/// space: cov2d = J * Wrot * Sigma * Wrot^T * J^T + floor * I. Returns
/// nullopt (behind camera) when view-space z <= kNearCullFraction * near.
std::optional<ProjectedGaussian> project_gaussian(const GaussianPrimitive& prim,
                                                  const Camera& cam);

}  // namespace rdg

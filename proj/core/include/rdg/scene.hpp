// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <vector>

namespace rdg {

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// One anisotropic 3D Gaussian. Rotation is stored as a unit quaternion
/// (w, x, y, z); scales are stored in log space so unconstrained gradient
/// updates keep them positive; opacity is stored as a logit.
struct GaussianPrimitive {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector4d rotation = {1.0, 0.0, 0.0, 0.0};  // (w, x, y, z)
  Eigen::Vector3d log_scale = Eigen::Vector3d::Zero();
  double opacity_logit = 0.0;
  Eigen::Vector3d color = {0.5, 0.5, 0.5};  // degree-0 coefficient, [0,1]

  double opacity() const { return sigmoid(opacity_logit); }
  Eigen::Vector3d scale() const { return log_scale.array().exp(); }

  void renormalize_rotation() {
    const double n = rotation.norm();
    if (n > 0.0) rotation /= n;
  }
};

/// Rotation matrix of the normalized quaternion.
Eigen::Matrix3d rotation_matrix(const Eigen::Vector4d& q);

/// The optimizable scene. generation_tag increments whenever the primitive
/// list changes cardinality or order (densify, prune, merge), invalidating
/// any gradient tape recorded against the old list.
struct GaussianSet {
  std::vector<GaussianPrimitive> primitives;
  std::uint64_t generation_tag = 0;

  size_t size() const { return primitives.size(); }
  bool empty() const { return primitives.empty(); }
};

/// Pinhole camera with a rigid world-to-camera transform. View space is
/// x-right, y-down, z-forward; pixel (ix, iy) has center (ix+0.5, iy+0.5).
struct Camera {
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;
  double near_z = 0.1, far_z = 100.0;
  Eigen::Matrix3d rot_wc = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t_wc = Eigen::Vector3d::Zero();

  Eigen::Vector3d to_view(const Eigen::Vector3d& p_world) const {
    return rot_wc * p_world + t_wc;
  }
  Eigen::Vector3d to_world(const Eigen::Vector3d& p_view) const {
    return rot_wc.transpose() * (p_view - t_wc);
  }
  Eigen::Vector3d center_world() const { return -rot_wc.transpose() * t_wc; }

  /// Camera at `eye` looking at `target`, world +y treated as up.
  static Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                        double fx, double fy, int width, int height,
                        double near_z, double far_z);
};

inline Eigen::Matrix3d rotation_matrix(const Eigen::Vector4d& q_raw) {
  Eigen::Vector4d q = q_raw.normalized();
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

inline Camera Camera::look_at(const Eigen::Vector3d& eye,
                              const Eigen::Vector3d& target, double fx,
                              double fy, int width, int height, double near_z,
                              double far_z) {
  Camera cam;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.width = width;
  cam.height = height;
  cam.near_z = near_z;
  cam.far_z = far_z;

  const Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d right = Eigen::Vector3d::UnitY().cross(forward);
  if (right.norm() < 1e-12) right = Eigen::Vector3d::UnitX();  // looking straight up/down
  right.normalize();
  const Eigen::Vector3d down = right.cross(forward);  // unit by construction

  cam.rot_wc.row(0) = right;
  cam.rot_wc.row(1) = down;
  cam.rot_wc.row(2) = forward;
  cam.t_wc = -cam.rot_wc * eye;
  return cam;
}

}  // namespace rdg

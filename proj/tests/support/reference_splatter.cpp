// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#include "support/reference_splatter.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

namespace rdgtest {

ReferenceOutputs reference_render(const rdg::GaussianSet& set, const rdg::Camera& cam) {
  const int h = cam.height, w = cam.width;
  ReferenceOutputs out;
  out.image = rdg::ImageBuffer(h, w);
  out.depth_raw = rdg::DepthMap(h, w);
  out.depth = rdg::DepthMap(h, w);
  out.acc_alpha = rdg::DepthMap(h, w);

  struct Sample {
    double z;
    size_t idx;
    double alpha;
    Eigen::Vector3d color;
  };

  for (int py = 0; py < h; ++py) {
    for (int px = 0; px < w; ++px) {
      const double cx_px = px + 0.5, cy_px = py + 0.5;
      std::vector<Sample> samples;

      for (size_t i = 0; i < set.primitives.size(); ++i) {
        const rdg::GaussianPrimitive& prim = set.primitives[i];
        const Eigen::Vector3d view = cam.rot_wc * prim.position + cam.t_wc;
        if (view.z() <= 0.5 * cam.near_z) continue;

        const double u = cam.fx * view.x() / view.z() + cam.cx;
        const double v = cam.fy * view.y() / view.z() + cam.cy;

        Eigen::Matrix<double, 2, 3> jac;
        jac << cam.fx / view.z(), 0.0, -cam.fx * view.x() / (view.z() * view.z()),
            0.0, cam.fy / view.z(), -cam.fy * view.y() / (view.z() * view.z());

        const Eigen::Matrix3d rot = rdg::rotation_matrix(prim.rotation);
        Eigen::Matrix3d sigma = Eigen::Matrix3d::Zero();
        for (int k = 0; k < 3; ++k)
          sigma += std::exp(2.0 * prim.log_scale[k]) * rot.col(k) * rot.col(k).transpose();
        sigma = 0.5 * (sigma + sigma.transpose());

        const Eigen::Matrix<double, 2, 3> a = jac * cam.rot_wc;
        Eigen::Matrix2d cov = a * sigma * a.transpose();
        cov = 0.5 * (cov + cov.transpose());
        cov(0, 0) += 0.3;
        cov(1, 1) += 0.3;

        const double half_tr = 0.5 * (cov(0, 0) + cov(1, 1));
        const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
        const double lam_max = half_tr + std::sqrt(std::max(0.0, half_tr * half_tr - det));
        const double radius = 3.0 * std::sqrt(lam_max);
        if (std::abs(cx_px - u) > radius || std::abs(cy_px - v) > radius) continue;

        const Eigen::Vector2d d(cx_px - u, cy_px - v);
        const double power = -0.5 * d.dot(cov.inverse() * d);
        const double falloff = std::exp(std::min(0.0, power));
        const double alpha = std::min(0.99, rdg::sigmoid(prim.opacity_logit) * falloff);
        samples.push_back({view.z(), i, alpha, prim.color});
      }

      std::stable_sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) {
        if (a.z != b.z) return a.z < b.z;
        return a.idx < b.idx;
      });

      double transmittance = 1.0, acc = 0.0, draw = 0.0;
      Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
      for (const Sample& s : samples) {
        if (transmittance < 1e-4) break;
        const double weight = s.alpha * transmittance;
        rgb += weight * s.color;
        draw += weight * s.z;
        acc += weight;
        transmittance *= (1.0 - s.alpha);
      }
      out.image.set_pixel(py, px, rgb);
      out.depth_raw.at(py, px) = draw;
      out.acc_alpha.at(py, px) = acc;
      out.depth.at(py, px) = draw / std::max(acc, 1e-6);
    }
  }
  return out;
}

}  // namespace rdgtest

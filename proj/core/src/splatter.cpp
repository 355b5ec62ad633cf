// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#include "rdg/splatter.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rdg/errors.hpp"

namespace rdg {
namespace {

struct PixelRect {
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive; empty when x0 > x1
  bool empty() const { return x0 > x1 || y0 > y1; }
};

// Integer pixel range whose centers satisfy |center - mean| <= radius,
// clamped to the image. Must stay equivalent to the per-pixel test used by
// reference evaluators: pixel ix is inside iff |ix + 0.5 - mean| <= radius.
PixelRect cull_rect(const TapeEntry& e, int width, int height) {
  PixelRect r;
  const double rad = e.cull_radius;
  r.x0 = std::max(0, static_cast<int>(std::ceil(e.mean2d.x() - rad - 0.5)));
  r.x1 = std::min(width - 1, static_cast<int>(std::floor(e.mean2d.x() + rad - 0.5)));
  r.y0 = std::max(0, static_cast<int>(std::ceil(e.mean2d.y() - rad - 0.5)));
  r.y1 = std::min(height - 1, static_cast<int>(std::floor(e.mean2d.y() + rad - 0.5)));
  return r;
}

double max_eigenvalue_2x2(const Eigen::Matrix2d& m) {
  const double half_trace = 0.5 * (m(0, 0) + m(1, 1));
  const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  const double disc = std::max(0.0, half_trace * half_trace - det);
  return half_trace + std::sqrt(disc);
}

// Shared by forward and backward so both see bit-identical alpha values.
inline void falloff_alpha(const TapeEntry& e, double px, double py,
                          Eigen::Vector2d& d, double& f, double& alpha,
                          bool& clamped) {
  d = Eigen::Vector2d(px - e.mean2d.x(), py - e.mean2d.y());
  const double power = -0.5 * d.dot(e.cov_inv * d);
  f = std::exp(std::min(0.0, power));
  const double a = e.alpha_base * f;
  clamped = a > kAlphaClamp;
  alpha = clamped ? kAlphaClamp : a;
}

}  // namespace

void GradientSet::resize_zero(size_t n) {
  position.assign(n, Eigen::Vector3d::Zero());
  rotation.assign(n, Eigen::Vector4d::Zero());
  log_scale.assign(n, Eigen::Vector3d::Zero());
  opacity_logit.assign(n, 0.0);
  color.assign(n, Eigen::Vector3d::Zero());
  screen_grad_mag.assign(n, 0.0);
}

void GradientSet::accumulate(const GradientSet& other, double weight) {
  if (other.size() != size()) throw ShapeMismatch("GradientSet cardinality mismatch");
  for (size_t i = 0; i < size(); ++i) {
    position[i] += weight * other.position[i];
    rotation[i] += weight * other.rotation[i];
    log_scale[i] += weight * other.log_scale[i];
    opacity_logit[i] += weight * other.opacity_logit[i];
    color[i] += weight * other.color[i];
    screen_grad_mag[i] += weight * other.screen_grad_mag[i];
  }
}

RenderOutput render(const GaussianSet& set, const Camera& cam) {
  const int h = cam.height, w = cam.width;
  RenderOutput out;
  out.image = ImageBuffer(h, w);
  out.depth_raw = DepthMap(h, w);
  out.depth = DepthMap(h, w);
  out.acc_alpha = DepthMap(h, w);
  out.processed.assign(static_cast<size_t>(h) * w, 0);
  out.pixel_offset.assign(static_cast<size_t>(h) * w + 1, 0);
  out.generation_tag = set.generation_tag;

  for (std::uint32_t i = 0; i < set.primitives.size(); ++i) {
    const GaussianPrimitive& prim = set.primitives[i];
    const auto proj = project_gaussian(prim, cam);
    if (!proj) continue;  // behind camera: skipped for this view
    TapeEntry e;
    e.prim = i;
    e.mean2d = proj->mean2d;
    e.cov_inv = proj->cov2d.inverse();
    e.view_depth = proj->view_depth;
    e.alpha_base = prim.opacity();
    e.cull_radius = kCullSigmas * std::sqrt(max_eigenvalue_2x2(proj->cov2d));
    e.color = prim.color;
    out.visible.push_back(e);
  }
  if (out.visible.empty()) return out;  // empty frustum: zero buffers

  std::sort(out.visible.begin(), out.visible.end(),
            [](const TapeEntry& a, const TapeEntry& b) {
              if (a.view_depth != b.view_depth) return a.view_depth < b.view_depth;
              return a.prim < b.prim;
            });

  std::vector<PixelRect> rects(out.visible.size());
  std::vector<std::uint32_t> counts(static_cast<size_t>(h) * w, 0);
  for (size_t s = 0; s < out.visible.size(); ++s) {
    rects[s] = cull_rect(out.visible[s], w, h);
    for (int y = rects[s].y0; y <= rects[s].y1; ++y)
      for (int x = rects[s].x0; x <= rects[s].x1; ++x)
        ++counts[static_cast<size_t>(y) * w + x];
  }
  for (size_t p = 0; p < counts.size(); ++p)
    out.pixel_offset[p + 1] = out.pixel_offset[p] + counts[p];
  out.contributors.resize(out.pixel_offset.back());
  std::vector<std::uint32_t> cursor(out.pixel_offset.begin(), out.pixel_offset.end() - 1);
  for (size_t s = 0; s < out.visible.size(); ++s) {
    for (int y = rects[s].y0; y <= rects[s].y1; ++y)
      for (int x = rects[s].x0; x <= rects[s].x1; ++x)
        out.contributors[cursor[static_cast<size_t>(y) * w + x]++] =
            static_cast<std::uint32_t>(s);
  }

  for (int y = 0; y < h; ++y) {
    const double py = y + 0.5;
    for (int x = 0; x < w; ++x) {
      const double px = x + 0.5;
      const size_t p = static_cast<size_t>(y) * w + x;
      double transmittance = 1.0;
      double acc = 0.0, draw = 0.0;
      Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
      std::uint32_t n = 0;
      for (std::uint32_t idx = out.pixel_offset[p]; idx < out.pixel_offset[p + 1]; ++idx) {
        if (transmittance < kTransmittanceCutoff) break;
        const TapeEntry& e = out.visible[out.contributors[idx]];
        Eigen::Vector2d d;
        double f, alpha;
        bool clamped;
        falloff_alpha(e, px, py, d, f, alpha, clamped);
        const double weight = alpha * transmittance;
        rgb += weight * e.color;
        draw += weight * e.view_depth;
        acc += weight;
        transmittance *= (1.0 - alpha);
        ++n;
      }
      out.processed[p] = n;
      out.image.set_pixel(y, x, rgb);
      out.depth_raw.at(y, x) = draw;
      out.acc_alpha.at(y, x) = acc;
      out.depth.at(y, x) = draw / std::max(acc, kDepthNormEps);
    }
  }
  return out;
}

GradientSet backward(const RenderOutput& out, const GaussianSet& set,
                     const Camera& cam, const ImageBuffer& dL_dimage,
                     const DepthMap& dL_ddepth, DepthCotangent which) {
  if (out.generation_tag != set.generation_tag)
    throw TapeMismatch("gaussian set changed since render");
  const int h = cam.height, w = cam.width;
  if (dL_dimage.height() != h || dL_dimage.width() != w ||
      dL_ddepth.height() != h || dL_ddepth.width() != w)
    throw ShapeMismatch("cotangent shape does not match the render");

  GradientSet grads;
  grads.resize_zero(set.size());
  if (out.visible.empty()) return grads;

  const size_t n_slots = out.visible.size();
  std::vector<Eigen::Vector3d> g_color(n_slots, Eigen::Vector3d::Zero());
  std::vector<Eigen::Vector2d> g_mean2d(n_slots, Eigen::Vector2d::Zero());
  std::vector<Eigen::Matrix2d> g_lambda(n_slots, Eigen::Matrix2d::Zero());
  std::vector<double> g_opacity_f(n_slots, 0.0);
  std::vector<double> g_view_depth(n_slots, 0.0);

  struct Step {
    std::uint32_t slot;
    double alpha, trans, f;
    Eigen::Vector2d d;
  };
  std::vector<Step> walk;

  for (int y = 0; y < h; ++y) {
    const double py = y + 0.5;
    for (int x = 0; x < w; ++x) {
      const double px = x + 0.5;
      const size_t p = static_cast<size_t>(y) * w + x;
      const std::uint32_t n = out.processed[p];
      if (n == 0) continue;

      const Eigen::Vector3d g_img = dL_dimage.pixel(y, x);
      double g_raw = 0.0, g_acc = 0.0;
      if (which == DepthCotangent::kNormalized) {
        const double acc = out.acc_alpha.at(y, x);
        const double denom = std::max(acc, kDepthNormEps);
        g_raw = dL_ddepth.at(y, x) / denom;
        g_acc = acc > kDepthNormEps
                    ? -dL_ddepth.at(y, x) * out.depth_raw.at(y, x) / (denom * denom)
                    : 0.0;
      } else {
        g_raw = dL_ddepth.at(y, x);
      }
      if (g_img.isZero(0.0) && g_raw == 0.0 && g_acc == 0.0) continue;

      walk.clear();
      double transmittance = 1.0;
      for (std::uint32_t k = 0; k < n; ++k) {
        const std::uint32_t slot = out.contributors[out.pixel_offset[p] + k];
        const TapeEntry& e = out.visible[slot];
        Step s;
        s.slot = slot;
        s.trans = transmittance;
        bool clamped;
        falloff_alpha(e, px, py, s.d, s.f, s.alpha, clamped);
        s.f = clamped ? -1.0 : s.f;  // flag: no gradient through the clamp
        transmittance *= (1.0 - s.alpha);
        walk.push_back(s);
      }

      Eigen::Vector3d suffix_c = Eigen::Vector3d::Zero();
      double suffix_d = 0.0, suffix_a = 0.0;
      for (std::uint32_t k = n; k-- > 0;) {
        const Step& s = walk[k];
        const TapeEntry& e = out.visible[s.slot];
        const double weight = s.alpha * s.trans;
        const double inv_rest = 1.0 / (1.0 - s.alpha);

        g_color[s.slot] += g_img * weight;
        g_view_depth[s.slot] += g_raw * weight;

        const double g_alpha =
            g_img.dot(s.trans * e.color - suffix_c * inv_rest) +
            g_raw * (s.trans * e.view_depth - suffix_d * inv_rest) +
            g_acc * (s.trans - suffix_a * inv_rest);

        if (s.f >= 0.0) {  // unclamped: alpha = alpha_base * f
          const double g_f_scaled = g_alpha * e.alpha_base * s.f;
          g_opacity_f[s.slot] += g_alpha * s.f;
          const Eigen::Vector2d lam_d = e.cov_inv * s.d;
          g_mean2d[s.slot] += g_f_scaled * lam_d;
          g_lambda[s.slot] += (-0.5 * g_f_scaled) * (s.d * s.d.transpose());
        }

        suffix_c += weight * e.color;
        suffix_d += weight * e.view_depth;
        suffix_a += weight;
      }
    }
  }

  // Chain the accumulated screen-space gradients back to primitive space.
  for (size_t slot = 0; slot < n_slots; ++slot) {
    const TapeEntry& e = out.visible[slot];
    const GaussianPrimitive& prim = set.primitives[e.prim];

    const Eigen::Vector3d t = cam.to_view(prim.position);
    const double tz = t.z(), tz2 = tz * tz, tz3 = tz2 * tz;
    const Eigen::Matrix<double, 2, 3> jac = projection_jacobian(t, cam.fx, cam.fy);
    const Eigen::Matrix<double, 2, 3> a_mat = jac * cam.rot_wc;
    const Eigen::Matrix3d sigma = build_covariance(prim);

    // cov2d = A Sigma A^T + floor; lambda = cov2d^{-1}
    const Eigen::Matrix2d g_cov = -e.cov_inv * g_lambda[slot] * e.cov_inv;
    const Eigen::Matrix<double, 2, 3> g_a = (g_cov + g_cov.transpose()) * a_mat * sigma;
    const Eigen::Matrix3d g_sigma_full = a_mat.transpose() * g_cov * a_mat;
    const Eigen::Matrix3d g_sigma = 0.5 * (g_sigma_full + g_sigma_full.transpose());
    const Eigen::Matrix<double, 2, 3> g_jac = g_a * cam.rot_wc.transpose();

    Eigen::Vector3d g_t = Eigen::Vector3d::Zero();
    g_t.x() += g_jac(0, 2) * (-cam.fx / tz2);
    g_t.y() += g_jac(1, 2) * (-cam.fy / tz2);
    g_t.z() += g_jac(0, 0) * (-cam.fx / tz2) + g_jac(1, 1) * (-cam.fy / tz2) +
               g_jac(0, 2) * (2.0 * cam.fx * t.x() / tz3) +
               g_jac(1, 2) * (2.0 * cam.fy * t.y() / tz3);

    const Eigen::Vector2d gm = g_mean2d[slot];
    g_t.x() += gm.x() * cam.fx / tz;
    g_t.y() += gm.y() * cam.fy / tz;
    g_t.z() += -gm.x() * cam.fx * t.x() / tz2 - gm.y() * cam.fy * t.y() / tz2;

    g_t.z() += g_view_depth[slot];

    const std::uint32_t i = e.prim;
    grads.position[i] += cam.rot_wc.transpose() * g_t;
    grads.color[i] += g_color[slot];
    grads.opacity_logit[i] += g_opacity_f[slot] * e.alpha_base * (1.0 - e.alpha_base);
    grads.screen_grad_mag[i] += gm.norm();

    // Sigma = R diag(exp(2s)) R^T
    const Eigen::Matrix3d rot = rotation_matrix(prim.rotation);
    const Eigen::Vector3d s2 = (2.0 * prim.log_scale).array().exp();
    const Eigen::Matrix3d g_rot = 2.0 * g_sigma * rot * s2.asDiagonal();
    const Eigen::Matrix3d rtgr = rot.transpose() * g_sigma * rot;
    for (int k = 0; k < 3; ++k)
      grads.log_scale[i][k] += rtgr(k, k) * 2.0 * s2[k];

    const Eigen::Vector4d q = prim.rotation.normalized();
    const double qw = q[0], qx = q[1], qy = q[2], qz = q[3];
    Eigen::Matrix3d dr[4];
    dr[0] << 0, -qz, qy, qz, 0, -qx, -qy, qx, 0;
    dr[1] << 0, qy, qz, qy, -2 * qx, -qw, qz, qw, -2 * qx;
    dr[2] << -2 * qy, qx, qw, qx, 0, qz, -qw, qz, -2 * qy;
    dr[3] << -2 * qz, -qw, qx, qw, -2 * qz, qy, qx, qy, 0;
    Eigen::Vector4d g_qhat;
    for (int k = 0; k < 4; ++k)
      g_qhat[k] = 2.0 * (g_rot.array() * dr[k].array()).sum();
    // through q_hat = q / ||q||
    const double qn = prim.rotation.norm();
    grads.rotation[i] += (g_qhat - q * q.dot(g_qhat)) / qn;
  }
  return grads;
}

}  // namespace rdg

// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#include "rdg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rdg/splatter.hpp"

namespace rdg {
namespace {

constexpr double kPi = 3.14159265358979323846;

double mean_nn3(const std::vector<Eigen::Vector3d>& pts, size_t self) {
  double d0 = 1e300, d1 = 1e300, d2 = 1e300;
  for (size_t j = 0; j < pts.size(); ++j) {
    if (j == self) continue;
    const double d = (pts[j] - pts[self]).norm();
    if (d < d0) {
      d2 = d1;
      d1 = d0;
      d0 = d;
    } else if (d < d1) {
      d2 = d1;
      d1 = d;
    } else if (d < d2) {
      d2 = d;
    }
  }
  int n = 0;
  double sum = 0.0;
  for (double d : {d0, d1, d2})
    if (d < 1e300) {
      sum += d;
      ++n;
    }
  return n > 0 ? sum / n : 0.1;
}

DepthMap gaussian_blur(const DepthMap& in, double sigma) {
  if (sigma <= 0.0) return in;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i)
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));

  const int h = in.height(), w = in.width();
  DepthMap tmp(h, w), out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0, mass = 0.0;
      for (int d = -radius; d <= radius; ++d) {
        const int xx = x + d;
        if (xx < 0 || xx >= w) continue;
        acc += k[d + radius] * in.at(y, xx);
        mass += k[d + radius];
      }
      tmp.at(y, x) = acc / mass;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0, mass = 0.0;
      for (int d = -radius; d <= radius; ++d) {
        const int yy = y + d;
        if (yy < 0 || yy >= h) continue;
        acc += k[d + radius] * tmp.at(yy, x);
        mass += k[d + radius];
      }
      out.at(y, x) = acc / mass;
    }
  return out;
}

}  // namespace

SyntheticScene make_scene(const SceneSpec& spec) {
  SyntheticScene scene;
  scene.box_min = Eigen::Vector3d(-0.5, -0.5, -0.5);
  scene.box_max = Eigen::Vector3d(0.5, 0.5, 0.5);

  std::mt19937 rng(spec.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<Eigen::Vector3d> centers;
  if (spec.layout == SceneSpec::Layout::kClustered) {
    const int n_clusters = std::max(1, spec.n_gaussians / 50);
    for (int c = 0; c < n_clusters; ++c)
      centers.emplace_back(0.7 * (uni(rng) - 0.5), 0.7 * (uni(rng) - 0.5),
                           0.7 * (uni(rng) - 0.5));
  }

  std::vector<Eigen::Vector3d> positions;
  for (int i = 0; i < spec.n_gaussians; ++i) {
    Eigen::Vector3d p;
    if (spec.layout == SceneSpec::Layout::kUniform) {
      p = Eigen::Vector3d(uni(rng) - 0.5, uni(rng) - 0.5, uni(rng) - 0.5);
    } else {
      const Eigen::Vector3d& c = centers[i % centers.size()];
      p = c + 0.12 * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
      p = p.cwiseMax(scene.box_min).cwiseMin(scene.box_max);
    }
    positions.push_back(p);
  }

  for (int i = 0; i < spec.n_gaussians; ++i) {
    GaussianPrimitive prim;
    prim.position = positions[i];
    prim.color = Eigen::Vector3d(0.1 + 0.85 * uni(rng), 0.1 + 0.85 * uni(rng),
                                 0.1 + 0.85 * uni(rng));
    for (int k = 0; k < 3; ++k)
      prim.log_scale[k] = std::log(0.03 + 0.07 * uni(rng));
    prim.opacity_logit = logit(0.45 + 0.45 * uni(rng));
    Eigen::Vector4d q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
    prim.rotation = q.normalized();
    scene.gt_set.primitives.push_back(prim);
  }

  const double radius = 2.2;
  const double fx = 1.1 * spec.resolution;
  const Eigen::Vector3d target = Eigen::Vector3d::Zero();
  auto arc_camera = [&](double azimuth_deg, double elevation_deg) {
    const double az = azimuth_deg * kPi / 180.0;
    const double el = elevation_deg * kPi / 180.0;
    const Eigen::Vector3d eye(radius * std::cos(el) * std::sin(az),
                              radius * std::sin(el),
                              -radius * std::cos(el) * std::cos(az));
    return Camera::look_at(eye, target, fx, fx, spec.resolution, spec.resolution,
                           scene.near_z, scene.far_z);
  };

  for (int i = 0; i < spec.n_train; ++i) {
    const double az = spec.n_train == 1
                          ? 0.0
                          : -28.0 + 56.0 * i / (spec.n_train - 1);
    scene.train_cams.push_back(arc_camera(az, (i % 2 == 0) ? 6.0 : -6.0));
  }
  for (int i = 0; i < spec.n_eval; ++i) {
    const double az = -18.0 + 36.0 * (i + 0.5) / spec.n_eval;
    scene.eval_cams.push_back(arc_camera(az, 2.0));
  }
  scene.scene_extent = radius;

  for (const Camera& cam : scene.train_cams) {
    const RenderOutput out = render(scene.gt_set, cam);
    scene.train_images.push_back(out.image);
    scene.train_depths.push_back(out.depth);
  }
  for (const Camera& cam : scene.eval_cams) {
    const RenderOutput out = render(scene.gt_set, cam);
    scene.eval_images.push_back(out.image);
    scene.eval_depths.push_back(out.depth);
  }
  return scene;
}

DepthMap corrupt_depth(const DepthMap& gt, const CorruptionModel& model) {
  DepthMap d(gt.height(), gt.width());
  for (size_t i = 0; i < gt.size(); ++i)
    d.data()[i] = model.scale * gt.data()[i] + model.shift;
  d = gaussian_blur(d, model.blur_sigma);
  if (model.noise_sigma > 0.0) {
    std::mt19937 rng(model.seed);
    std::normal_distribution<double> noise(0.0, model.noise_sigma);
    for (double& v : d.data()) v += noise(rng);
  }
  for (double& v : d.data()) v = std::max(v, 1e-6);
  return d;
}

GaussianSet random_initial_set(const Eigen::Vector3d& box_min,
                               const Eigen::Vector3d& box_max, int n,
                               unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<Eigen::Vector3d> positions;
  for (int i = 0; i < n; ++i) {
    Eigen::Vector3d p;
    for (int k = 0; k < 3; ++k)
      p[k] = box_min[k] + (box_max[k] - box_min[k]) * uni(rng);
    positions.push_back(p);
  }
  GaussianSet set;
  for (int i = 0; i < n; ++i) {
    GaussianPrimitive prim;
    prim.position = positions[i];
    const double s = std::clamp(mean_nn3(positions, i), 1e-3, 0.5);
    prim.log_scale = Eigen::Vector3d::Constant(std::log(s));
    prim.opacity_logit = logit(0.1);
    prim.color = Eigen::Vector3d(0.2 + 0.6 * uni(rng), 0.2 + 0.6 * uni(rng),
                                 0.2 + 0.6 * uni(rng));
    set.primitives.push_back(prim);
  }
  return set;
}

}  // namespace rdg

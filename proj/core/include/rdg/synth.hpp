// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "rdg/image.hpp"
#include "rdg/scene.hpp"

namespace rdg {

struct SceneSpec {
  int n_gaussians = 200;
  enum class Layout { kClustered, kUniform };
  Layout layout = Layout::kClustered;
  int n_train = 3;
  int n_eval = 2;
  int resolution = 64;
  unsigned seed = 7;
};

/// Synthetic corruption standing in for a monocular depth estimate: a
/// global affine bias, Gaussian blur, and seeded Gaussian noise.
struct CorruptionModel {
  double scale = 1.0;
  double shift = 0.0;
  double blur_sigma = 0.0;   // px
  double noise_sigma = 0.0;  // depth units
  unsigned seed = 0;
};

struct SyntheticScene {
  GaussianSet gt_set;
  std::vector<Camera> train_cams, eval_cams;
  std::vector<ImageBuffer> train_images, eval_images;
  std::vector<DepthMap> train_depths, eval_depths;
  Eigen::Vector3d box_min, box_max;
  double scene_extent = 1.0;  // scene center to farthest camera
  double near_z = 1.0, far_z = 4.0;
};

/// Ground-truth Gaussians in a unit-scale box with cameras on an arc facing
/// it; all ground-truth buffers come straight out of the splatter so they
/// are reproducible bit-exactly from gt_set.
SyntheticScene make_scene(const SceneSpec& spec);

/// blur(scale * d + shift) + noise, clamped positive.
DepthMap corrupt_depth(const DepthMap& gt, const CorruptionModel& model);

/// Random training initialization: uniform positions in the box, opacity
/// 0.1, isotropic scale from the mean distance to the three nearest
/// neighbors.
GaussianSet random_initial_set(const Eigen::Vector3d& box_min,
                               const Eigen::Vector3d& box_max, int n,
                               unsigned seed);

}  // namespace rdg

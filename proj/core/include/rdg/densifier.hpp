// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <utility>
#include <vector>

#include "rdg/image.hpp"
#include "rdg/scene.hpp"
#include "rdg/splatter.hpp"

namespace rdg {

/// Patches whose depth-regularization loss strictly exceeds the mean.
struct ErrorPatchMap {
  DepthMap patch_losses;
  double threshold = 0.0;
  std::vector<int> selected;  // flattened patch ids, row-major
};

struct DensifyConfig {
  int interval = 100;             // steps between densify events
  int k_samples = 8;              // new primitives per selected patch
  double grad_threshold = 2e-4;   // mean screen-gradient split/clone gate
  std::vector<int> opacity_reset_steps = {1000, 3000};
  double opacity_reset_value = 0.04;
  double prune_opacity = 0.005;
  double split_scale_fraction = 0.01;  // of scene extent: split above, clone below
  double split_scale_shrink = 1.6;
  int patch_px = 8;
  bool adaptive_sampling = true;
  int adaptive_after = 1000;        // engages once depth supervision is active
  bool use_patch_depth_range = false;
  double new_opacity = 0.1;
};

ErrorPatchMap select_error_patches(const DepthMap& per_patch_loss);

/// Casts a ray through the center pixel of every selected patch and places
/// k primitives at view depths linearly spaced over [near, far] inclusive
/// (midpoint when k = 1). New primitives take the ground-image color at the
/// center pixel, opacity cfg.new_opacity, and an isotropic scale equal to
/// the mean distance to the three nearest existing primitives.
std::vector<GaussianPrimitive> sample_along_rays(
    const ErrorPatchMap& selected, const Camera& cam,
    std::pair<double, double> depth_range, int k, int patch_px,
    const ImageBuffer& gt_image, const std::vector<GaussianPrimitive>& existing,
    double new_opacity = 0.1);

/// Appends `fresh` to the set, preserving existing order, and bumps the
/// generation tag.
GaussianSet merge(GaussianSet set, const std::vector<GaussianPrimitive>& fresh);

/// Per-view context for adaptive sampling inside schedule_step.
struct SamplingView {
  const Camera* cam = nullptr;
  const ImageBuffer* gt_image = nullptr;
  const DepthMap* patch_losses = nullptr;    // per-patch depth loss raster
  const DepthMap* rendered_depth = nullptr;  // used with use_patch_depth_range
};

struct ScheduleOutcome {
  GaussianSet set;
  // For each output primitive: its index in the input set, or -1 when it is
  // new (clone, split child, ray sample); lets the caller remap optimizer
  // moments.
  std::vector<int> source_index;
  int n_cloned = 0, n_split = 0, n_pruned = 0, n_sampled = 0;
  bool densified = false;
  bool opacity_reset = false;
};

/// Every cfg.interval steps: clone/split primitives whose mean screen
/// gradient exceeds the threshold, prune low-opacity primitives, then grow
/// along rays through high-error patches; independently, reset all
/// opacities at the configured steps. `mean_screen_grads` is the caller's
/// per-primitive mean of GradientSet::screen_grad_mag since the last event.
ScheduleOutcome schedule_step(const GaussianSet& set,
                              const std::vector<double>& mean_screen_grads,
                              int t, const DensifyConfig& cfg,
                              double scene_extent,
                              const std::vector<SamplingView>& views,
                              std::mt19937& rng);

}  // namespace rdg

// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#include "rdg/densifier.hpp"

#include <algorithm>
#include <cmath>

#include "rdg/errors.hpp"
#include "rdg/projection.hpp"

namespace rdg {
namespace {

double mean_nn_distance(const Eigen::Vector3d& p,
                        const std::vector<GaussianPrimitive>& existing) {
  // mean of up to 3 nearest existing positions; brute force is fine at
  // desk scale
  double d0 = 1e300, d1 = 1e300, d2 = 1e300;
  for (const auto& e : existing) {
    const double d = (e.position - p).norm();
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
  return n > 0 ? sum / n : 0.0;
}

}  // namespace

ErrorPatchMap select_error_patches(const DepthMap& per_patch_loss) {
  ErrorPatchMap m;
  m.patch_losses = per_patch_loss;
  double sum = 0.0;
  for (double v : per_patch_loss.data()) sum += v;
  m.threshold = sum / static_cast<double>(per_patch_loss.size());
  for (int i = 0; i < static_cast<int>(per_patch_loss.size()); ++i)
    if (per_patch_loss.data()[i] > m.threshold) m.selected.push_back(i);
  return m;
}

std::vector<GaussianPrimitive> sample_along_rays(
    const ErrorPatchMap& selected, const Camera& cam,
    std::pair<double, double> depth_range, int k, int patch_px,
    const ImageBuffer& gt_image, const std::vector<GaussianPrimitive>& existing,
    double new_opacity) {
  std::vector<GaussianPrimitive> fresh;
  if (selected.selected.empty()) return fresh;
  const auto [near, far] = depth_range;
  const int patch_cols = selected.patch_losses.width();

  std::vector<double> depths;
  if (k == 1) {
    depths.push_back(0.5 * (near + far));
  } else {
    for (int i = 0; i < k; ++i)
      depths.push_back(near + (far - near) * i / (k - 1));
  }

  const double fallback_scale = 0.05 * (far - near);
  for (int patch_id : selected.selected) {
    const int py = patch_id / patch_cols, px = patch_id % patch_cols;
    const int iy = py * patch_px + patch_px / 2;
    const int ix = px * patch_px + patch_px / 2;
    const double u = ix + 0.5, v = iy + 0.5;
    const Eigen::Vector3d dir_view((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
    const Eigen::Vector3d color = gt_image.pixel(
        std::min(iy, gt_image.height() - 1), std::min(ix, gt_image.width() - 1));

    for (double d : depths) {
      GaussianPrimitive prim;
      prim.position = cam.to_world(dir_view * d);
      double s = mean_nn_distance(prim.position, existing);
      if (s <= 0.0) s = fallback_scale;
      s = std::clamp(s, 1e-3, 0.5 * (far - near));
      prim.log_scale = Eigen::Vector3d::Constant(std::log(s));
      prim.opacity_logit = logit(new_opacity);
      prim.color = color;
      fresh.push_back(prim);
    }
  }
  return fresh;
}

GaussianSet merge(GaussianSet set, const std::vector<GaussianPrimitive>& fresh) {
  set.primitives.insert(set.primitives.end(), fresh.begin(), fresh.end());
  ++set.generation_tag;
  return set;
}

ScheduleOutcome schedule_step(const GaussianSet& set,
                              const std::vector<double>& mean_screen_grads,
                              int t, const DensifyConfig& cfg,
                              double scene_extent,
                              const std::vector<SamplingView>& views,
                              std::mt19937& rng) {
  ScheduleOutcome out;
  out.set = set;
  out.source_index.resize(set.size());
  for (size_t i = 0; i < set.size(); ++i) out.source_index[i] = static_cast<int>(i);

  const bool densify_event = cfg.interval > 0 && t > 0 && t % cfg.interval == 0;
  if (densify_event) {
    if (mean_screen_grads.size() != set.size())
      throw ShapeMismatch("schedule_step: gradient stats cardinality mismatch");
    std::vector<GaussianPrimitive> kept;
    std::vector<int> kept_src;
    std::vector<GaussianPrimitive> spawned;
    std::normal_distribution<double> unit_normal(0.0, 1.0);

    for (size_t i = 0; i < set.size(); ++i) {
      const GaussianPrimitive& prim = set.primitives[i];
      if (prim.opacity() < cfg.prune_opacity) {
        ++out.n_pruned;
        continue;
      }
      const bool high_grad = mean_screen_grads[i] > cfg.grad_threshold;
      const double max_scale = prim.scale().maxCoeff();
      if (high_grad && max_scale > cfg.split_scale_fraction * scene_extent) {
        // split: two children sampled from the parent's own distribution
        const Eigen::Matrix3d rot = rotation_matrix(prim.rotation);
        for (int c = 0; c < 2; ++c) {
          GaussianPrimitive child = prim;
          Eigen::Vector3d n(unit_normal(rng), unit_normal(rng), unit_normal(rng));
          child.position = prim.position + rot * (prim.scale().asDiagonal() * n);
          child.log_scale =
              prim.log_scale - Eigen::Vector3d::Constant(std::log(cfg.split_scale_shrink));
          spawned.push_back(child);
        }
        ++out.n_split;
        continue;  // parent replaced by its children
      }
      kept.push_back(prim);
      kept_src.push_back(static_cast<int>(i));
      if (high_grad) {
        spawned.push_back(prim);
        ++out.n_cloned;
      }
    }

    if (cfg.adaptive_sampling && t >= cfg.adaptive_after) {
      for (const SamplingView& view : views) {
        if (!view.cam || !view.gt_image || !view.patch_losses) continue;
        const ErrorPatchMap selected = select_error_patches(*view.patch_losses);
        double near = view.cam->near_z, far = view.cam->far_z;
        if (cfg.use_patch_depth_range && view.rendered_depth &&
            !view.rendered_depth->empty()) {
          double mn = 1e300, mx = -1e300;
          for (double v : view.rendered_depth->data())
            if (v > 0.0) {
              mn = std::min(mn, v);
              mx = std::max(mx, v);
            }
          if (mn < mx) {
            near = std::max(near, 0.9 * mn);
            far = std::min(far, 1.1 * mx);
          }
        }
        const auto fresh = sample_along_rays(selected, *view.cam, {near, far},
                                             cfg.k_samples, cfg.patch_px,
                                             *view.gt_image, kept, cfg.new_opacity);
        out.n_sampled += static_cast<int>(fresh.size());
        spawned.insert(spawned.end(), fresh.begin(), fresh.end());
      }
    }

    out.set.primitives = std::move(kept);
    out.set.primitives.insert(out.set.primitives.end(), spawned.begin(), spawned.end());
    out.source_index = std::move(kept_src);
    out.source_index.resize(out.set.size(), -1);
    ++out.set.generation_tag;
    out.densified = true;
  }

  if (std::find(cfg.opacity_reset_steps.begin(), cfg.opacity_reset_steps.end(), t) !=
      cfg.opacity_reset_steps.end()) {
    const double reset_logit = logit(cfg.opacity_reset_value);
    for (auto& prim : out.set.primitives) prim.opacity_logit = reset_logit;
    out.opacity_reset = true;
  }
  return out;
}

}  // namespace rdg

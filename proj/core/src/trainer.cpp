// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#include "rdg/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "rdg/errors.hpp"

namespace rdg {
namespace {

bool all_finite(const LossReport& r) {
  return std::isfinite(r.l_color) && std::isfinite(r.l_g) && std::isfinite(r.l_l) &&
         std::isfinite(r.l_depth) && std::isfinite(r.l_rdg) && std::isfinite(r.total);
}

void adam_update(double& param, double grad, double& m, double& v, double lr,
                 double beta1, double beta2, double eps, double bc1, double bc2) {
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad * grad;
  param -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
}

}  // namespace

TrainState make_initial_state(const TrainConfig& config, GaussianSet initial_set) {
  TrainState s;
  s.set = std::move(initial_set);
  s.moment1.resize_zero(s.set.size());
  s.moment2.resize_zero(s.set.size());
  s.b = config.guidance.b0;
  s.omega = config.loss.omega0;
  s.screen_grad_accum.assign(s.set.size(), 0.0);
  s.rng.seed(config.seed);
  return s;
}

LossReport train_step(TrainState& state, const std::vector<TrainView>& views,
                      const TrainConfig& config) {
  const int t = state.step + 1;
  const int n_views = static_cast<int>(views.size());
  const double view_w = 1.0 / std::max(1, n_views);

  // Schedules advance first so that step t consumes b(t), omega(t).
  if (config.guidance.schedule_per_step) {
    state.b = schedule_advance(state.b, t, config.guidance.m);
    state.omega = schedule_advance(state.omega, t, config.loss.m);
  } else if (t % config.loss.m == 0) {
    state.b = schedule_advance(state.b, t, config.guidance.m);
    state.omega = schedule_advance(state.omega, t, config.loss.m);
  }

  const bool depth_active = config.enable_depth_loss && t > config.depth_warmup;
  const bool rdg_active = config.enable_rdg && t > config.depth_warmup;
  const bool densify_event =
      config.densify.interval > 0 && t % config.densify.interval == 0;
  const bool want_patch_raster =
      (densify_event && config.densify.adaptive_sampling &&
       t >= config.densify.adaptive_after) ||
      depth_active;

  GradientSet grads;
  grads.resize_zero(state.set.size());
  LossParts parts;
  std::vector<DepthMap> patch_rasters(views.size());
  std::vector<DepthMap> rendered_depths(views.size());

  for (int vi = 0; vi < n_views; ++vi) {
    const TrainView& view = views[vi];
    const RenderOutput out = render(state.set, view.cam);

    ImageBuffer d_image;
    double l_color = color_loss(out.image, view.image, config.loss.beta, &d_image);
    parts.l_color += view_w * l_color;

    DepthMap d_depth(view.cam.height, view.cam.width, 0.0);
    if (depth_active) {
      DepthMap g_pearson;
      const double lg = pearson_loss(view.refined_depth, out.depth,
                                     config.loss.epsilon, &g_pearson);
      DepthMap g_local;
      const double ll = local_depth_loss(view.refined_depth, out.depth,
                                         config.guidance.patch_px,
                                         config.loss.epsilon, &g_local,
                                         &patch_rasters[vi]);
      parts.l_g += view_w * lg;
      parts.l_l += view_w * ll;
      for (int y = 0; y < d_depth.height(); ++y)
        for (int x = 0; x < d_depth.width(); ++x) {
          double g = g_pearson.at(y, x);
          if (y < g_local.height() && x < g_local.width())
            g += config.loss.lambda * g_local.at(y, x);
          d_depth.at(y, x) = g;
        }
    } else if (want_patch_raster) {
      local_depth_loss(view.refined_depth, out.depth, config.guidance.patch_px,
                       config.loss.epsilon, nullptr, &patch_rasters[vi]);
    }

    if (rdg_active) {
      const RdgChainResult chain =
          rdg_chain(out.image, out.depth, config.guidance.patch_px, state.b);
      parts.l_rdg += view_w * chain.loss;
      for (size_t i = 0; i < d_image.size(); ++i)
        d_image.data()[i] += state.omega * chain.d_image.data()[i];
    }

    const GradientSet view_grads =
        backward(out, state.set, view.cam, d_image, d_depth, config.depth_supervision);
    grads.accumulate(view_grads, view_w);
    if (densify_event) rendered_depths[vi] = out.depth;
  }

  if (parts.patch_losses.empty() && !patch_rasters.empty())
    parts.patch_losses = patch_rasters[0];
  LossReport report =
      total_loss(parts, config.loss, t, state.omega, config.depth_warmup);
  if (!all_finite(report)) {
    char msg[160];
    std::snprintf(msg, sizeof(msg),
                  "non-finite loss at step %d (color=%g g=%g l=%g rdg=%g)", t,
                  report.l_color, report.l_g, report.l_l, report.l_rdg);
    throw NonFiniteLoss(t, msg);
  }

  // One adaptive-moment update per parameter group.
  ++state.adam_steps;
  const double bc1 = 1.0 - std::pow(config.adam_beta1, state.adam_steps);
  const double bc2 = 1.0 - std::pow(config.adam_beta2, state.adam_steps);
  const double b1 = config.adam_beta1, b2 = config.adam_beta2, eps = config.adam_eps;
  for (size_t i = 0; i < state.set.size(); ++i) {
    GaussianPrimitive& p = state.set.primitives[i];
    for (int k = 0; k < 3; ++k) {
      adam_update(p.position[k], grads.position[i][k], state.moment1.position[i][k],
                  state.moment2.position[i][k], config.lr.position, b1, b2, eps, bc1, bc2);
      adam_update(p.log_scale[k], grads.log_scale[i][k], state.moment1.log_scale[i][k],
                  state.moment2.log_scale[i][k], config.lr.scale, b1, b2, eps, bc1, bc2);
      adam_update(p.color[k], grads.color[i][k], state.moment1.color[i][k],
                  state.moment2.color[i][k], config.lr.color, b1, b2, eps, bc1, bc2);
    }
    for (int k = 0; k < 4; ++k)
      adam_update(p.rotation[k], grads.rotation[i][k], state.moment1.rotation[i][k],
                  state.moment2.rotation[i][k], config.lr.rotation, b1, b2, eps, bc1, bc2);
    adam_update(p.opacity_logit, grads.opacity_logit[i], state.moment1.opacity_logit[i],
                state.moment2.opacity_logit[i], config.lr.opacity, b1, b2, eps, bc1, bc2);
    p.renormalize_rotation();
  }

  // Densification bookkeeping.
  ++state.steps_since_densify;
  for (size_t i = 0; i < state.set.size(); ++i)
    state.screen_grad_accum[i] += grads.screen_grad_mag[i];

  std::vector<double> mean_grads(state.set.size(), 0.0);
  for (size_t i = 0; i < state.set.size(); ++i)
    mean_grads[i] = state.screen_grad_accum[i] / state.steps_since_densify;

  std::vector<SamplingView> sampling_views;
  if (densify_event) {
    for (int vi = 0; vi < n_views; ++vi) {
      if (patch_rasters[vi].empty()) continue;
      SamplingView sv;
      sv.cam = &views[vi].cam;
      sv.gt_image = &views[vi].image;
      sv.patch_losses = &patch_rasters[vi];
      sv.rendered_depth = &rendered_depths[vi];
      sampling_views.push_back(sv);
    }
  }

  ScheduleOutcome outcome =
      schedule_step(state.set, mean_grads, t, config.densify, config.scene_extent,
                    sampling_views, state.rng);
  if (outcome.densified) {
    GradientSet m1, m2;
    m1.resize_zero(outcome.set.size());
    m2.resize_zero(outcome.set.size());
    for (size_t i = 0; i < outcome.set.size(); ++i) {
      const int src = outcome.source_index[i];
      if (src < 0) continue;
      m1.position[i] = state.moment1.position[src];
      m1.rotation[i] = state.moment1.rotation[src];
      m1.log_scale[i] = state.moment1.log_scale[src];
      m1.opacity_logit[i] = state.moment1.opacity_logit[src];
      m1.color[i] = state.moment1.color[src];
      m2.position[i] = state.moment2.position[src];
      m2.rotation[i] = state.moment2.rotation[src];
      m2.log_scale[i] = state.moment2.log_scale[src];
      m2.opacity_logit[i] = state.moment2.opacity_logit[src];
      m2.color[i] = state.moment2.color[src];
    }
    state.moment1 = std::move(m1);
    state.moment2 = std::move(m2);
    state.screen_grad_accum.assign(outcome.set.size(), 0.0);
    state.steps_since_densify = 0;
  }
  state.set = std::move(outcome.set);

  state.step = t;
  state.history.push_back(report);
  return report;
}

EvalRecord evaluate(const GaussianSet& set, const std::vector<EvalView>& views,
                    int step, bool quantize_8bit) {
  EvalRecord rec;
  rec.step = step;
  for (const EvalView& view : views) {
    RenderOutput out = render(set, view.cam);
    if (quantize_8bit) {
      for (double& v : out.image.data())
        v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
      for (double& v : out.depth.data()) v = static_cast<float>(v);
    }
    rec.per_view.push_back(
        compute_metrics(out.image, view.image, out.depth, view.depth_gt));
  }
  for (const Metrics& m : rec.per_view) {
    rec.mean.psnr += m.psnr;
    rec.mean.ssim += m.ssim;
    rec.mean.rmse += m.rmse;
  }
  const double n = std::max<size_t>(1, rec.per_view.size());
  rec.mean.psnr /= n;
  rec.mean.ssim /= n;
  rec.mean.rmse /= n;
  return rec;
}

FitResult fit(const TrainConfig& config, const Dataset& dataset,
              GaussianSet initial_set, std::ostream* run_log) {
  TrainState state = make_initial_state(config, std::move(initial_set));
  FitResult result;

  for (int t = 1; t <= config.total_steps; ++t) {
    const LossReport r = train_step(state, dataset.train, config);
    if (run_log) {
      char line[320];
      std::snprintf(line, sizeof(line),
                    "{\"step\":%d,\"l_color\":%.17g,\"l_g\":%.17g,\"l_l\":%.17g,"
                    "\"l_depth\":%.17g,\"l_rdg\":%.17g,\"total\":%.17g,"
                    "\"primitive_count\":%zu,\"b\":%.17g,\"omega\":%.17g}",
                    t, r.l_color, r.l_g, r.l_l, r.l_depth, r.l_rdg, r.total,
                    state.set.size(), state.b, state.omega);
      (*run_log) << line << '\n';
    }
    if (config.eval_every > 0 && t % config.eval_every == 0 && t != config.total_steps)
      result.evals.push_back(evaluate(state.set, dataset.eval, t, false));
  }
  result.evals.push_back(evaluate(state.set, dataset.eval, config.total_steps, false));
  result.history = std::move(state.history);
  result.set = std::move(state.set);
  return result;
}

}  // namespace rdg

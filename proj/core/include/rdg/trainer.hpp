// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <random>
#include <vector>

#include "rdg/densifier.hpp"
#include "rdg/depth_refiner.hpp"
#include "rdg/guidance.hpp"
#include "rdg/losses.hpp"
#include "rdg/scene.hpp"
#include "rdg/splatter.hpp"

namespace rdg {

struct LearningRates {
  double position = 2e-4;
  double opacity = 3e-3;
  double scale = 6e-2;
  double rotation = 5e-3;
  double color = 2e-3;
};

struct TrainConfig {
  int total_steps = 6000;
  int depth_warmup = 1000;
  LearningRates lr;
  LossWeights loss;
  GuidanceParams guidance;
  EnergyParams energy_coarse = EnergyParams::coarse_pass();
  EnergyParams energy_fine = EnergyParams::fine_pass();
  DensifyConfig densify;
  double scene_extent = 1.0;
  unsigned seed = 1;
  bool enable_depth_loss = true;
  bool enable_rdg = true;
  DepthCotangent depth_supervision = DepthCotangent::kNormalized;
  int eval_every = 500;
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
};

struct TrainView {
  Camera cam;
  ImageBuffer image;         // ground-truth view
  DepthMap refined_depth;    // precomputed supervision, never optimized
};

struct EvalView {
  Camera cam;
  ImageBuffer image;
  DepthMap depth_gt;
};

struct Dataset {
  std::vector<TrainView> train;
  std::vector<EvalView> eval;
};

struct TrainState {
  int step = 0;
  GaussianSet set;
  GradientSet moment1, moment2;  // Adam state, same layout as the gradients
  int adam_steps = 0;
  double b = 0.4;
  double omega = 0.05;
  std::vector<double> screen_grad_accum;  // since the last densify event
  int steps_since_densify = 0;
  std::mt19937 rng;
  std::vector<LossReport> history;
};

TrainState make_initial_state(const TrainConfig& config, GaussianSet initial_set);

/// One optimization step over every training view: render, evaluate the
/// loss stack (depth and guidance terms only past the warmup), average the
/// per-view gradients, apply one adaptive-moment update per parameter
/// group, then run the densification schedule. Throws NonFiniteLoss when
/// any loss component stops being finite.
LossReport train_step(TrainState& state, const std::vector<TrainView>& views,
                      const TrainConfig& config);

struct EvalRecord {
  int step = 0;
  std::vector<Metrics> per_view;
  Metrics mean;
};

struct FitResult {
  GaussianSet set;
  std::vector<EvalRecord> evals;  // every eval_every steps and at the end
  std::vector<LossReport> history;
};

/// Renders every eval view and reports metrics. With quantize_8bit the
/// rendered image is rounded to 8-bit levels and the rendered depth to
/// float32 before comparison, mirroring what on-disk ground truth would
/// carry.
EvalRecord evaluate(const GaussianSet& set, const std::vector<EvalView>& views,
                    int step, bool quantize_8bit);

/// Runs config.total_steps steps. When `run_log` is given, appends one JSON
/// record per step: {"step":..,"l_color":..,...,"primitive_count":..,
/// "b":..,"omega":..}.
FitResult fit(const TrainConfig& config, const Dataset& dataset,
              GaussianSet initial_set, std::ostream* run_log = nullptr);

}  // namespace rdg

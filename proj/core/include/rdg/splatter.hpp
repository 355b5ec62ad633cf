// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "rdg/image.hpp"
#include "rdg/projection.hpp"
#include "rdg/scene.hpp"

namespace rdg {

/// Compositing stops once transmittance drops below this.
inline constexpr double kTransmittanceCutoff = 1e-4;
/// Per-sample alpha is clamped here to keep transmittance positive.
inline constexpr double kAlphaClamp = 0.99;
/// Screen-space cull: a primitive touches a pixel iff both |dx| and |dy|
/// between pixel center and splat mean are <= 3 * sqrt(lambda_max(cov2d)).
inline constexpr double kCullSigmas = 3.0;
/// Guard for alpha-normalized depth at uncovered pixels.
inline constexpr double kDepthNormEps = 1e-6;

/// One view-visible primitive with its projected footprint, sorted
/// front-to-back. The tape references these by slot index.
struct TapeEntry {
  std::uint32_t prim = 0;       // index into GaussianSet::primitives
  Eigen::Vector2d mean2d;
  Eigen::Matrix2d cov_inv;
  double view_depth = 0.0;
  double alpha_base = 0.0;      // sigmoid(opacity_logit)
  double cull_radius = 0.0;     // kCullSigmas * sqrt(lambda_max)
  Eigen::Vector3d color;
};

struct RenderOutput {
  ImageBuffer image;     // composited color
  DepthMap depth_raw;    // plain alpha-blended z accumulation
  DepthMap depth;        // depth_raw / max(acc_alpha, eps)
  DepthMap acc_alpha;

  // Compositing tape: per pixel, the slots of every footprint-covering
  // entry in front-to-back order; processed[p] of them ran before the
  // transmittance cutoff.
  std::vector<TapeEntry> visible;
  std::vector<std::uint32_t> pixel_offset;   // size H*W+1, prefix sums
  std::vector<std::uint32_t> contributors;   // flat slot list
  std::vector<std::uint32_t> processed;      // size H*W

  std::uint64_t generation_tag = 0;
};

/// Per-primitive gradients, same cardinality as the rendered set.
struct GradientSet {
  std::vector<Eigen::Vector3d> position;
  std::vector<Eigen::Vector4d> rotation;
  std::vector<Eigen::Vector3d> log_scale;
  std::vector<double> opacity_logit;
  std::vector<Eigen::Vector3d> color;
  std::vector<double> screen_grad_mag;  // ||dL/dmean2d||, densify bookkeeping

  size_t size() const { return position.size(); }
  void resize_zero(size_t n);
  void accumulate(const GradientSet& other, double weight);
};

/// Which rendered depth the dL_ddepth cotangent refers to.
enum class DepthCotangent { kNormalized, kRaw };

/// Front-to-back alpha compositing of color and view-space depth.
/// Primitives are sorted once per view by (view_depth, index); an empty
/// frustum yields zero buffers with acc_alpha = 0.
RenderOutput render(const GaussianSet& set, const Camera& cam);

/// Analytic gradients of sum_p <dL_dimage(p), image(p)> + dL_ddepth(p) *
/// depth(p) with respect to every primitive attribute. Throws TapeMismatch
/// if the set was densified/pruned after `out` was rendered.
GradientSet backward(const RenderOutput& out, const GaussianSet& set,
                     const Camera& cam, const ImageBuffer& dL_dimage,
                     const DepthMap& dL_ddepth,
                     DepthCotangent which = DepthCotangent::kNormalized);

}  // namespace rdg

// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "rdg/image.hpp"

namespace rdg {

/// Grid of per-patch descriptor vectors. For images the descriptor is a
/// handcrafted 6-dim vector (mean luma, luma std, mean |grad_x|, mean
/// |grad_y|, two smoothed-pyramid samples at the patch center); for depth
/// it is the flattened patch centered by the global mean, so foreground
/// and background patches point in opposite directions.
struct PatchGrid {
  int rows = 0, cols = 0;
  int patch_px = 0;
  int descriptor_dim = 0;
  std::vector<Eigen::VectorXd> patches;  // rows*cols, row-major

  int count() const { return rows * cols; }
};

/// Pairwise cosine similarities between patch descriptors. Zero-norm
/// patches are flagged and score 0 against everything.
struct SimilarityTensor {
  Eigen::MatrixXd values;            // count x count, symmetric, diag 1
  std::vector<std::uint8_t> degenerate;  // per patch

  int count() const { return static_cast<int>(values.rows()); }
};

struct GuidanceParams {
  double b0 = 0.4;        // initial bias
  int m = 6000;           // schedule horizon
  int patch_px = 8;
  bool detach_depth = true;   // no gradient through depth similarities
  bool schedule_per_step = true;  // fractional exponent applied every step
};

inline constexpr int kImageDescriptorDim = 6;

/// Image descriptors; trailing pixels that do not fill a patch are cropped.
PatchGrid extract_features(const ImageBuffer& img, int patch_px);

/// Backward of extract_features: descriptor cotangents to pixel cotangents
/// (accumulated into RGB through the luma weights).
ImageBuffer extract_features_backward(const ImageBuffer& img, int patch_px,
                                      const std::vector<Eigen::VectorXd>& g_desc);

/// Depth-side patch vectors: flattened patches minus the global mean depth.
PatchGrid depth_patch_grid(const DepthMap& depth, int patch_px);

SimilarityTensor similarity(const PatchGrid& grid);

/// Backward of similarity: pair-value cotangents (symmetric matrix, one
/// independent value per unordered pair) to descriptor cotangents.
std::vector<Eigen::VectorXd> similarity_backward(const PatchGrid& grid,
                                                 const SimilarityTensor& sim,
                                                 const Eigen::MatrixXd& g_values);

/// One application of x(t) = clamp(x(t-1)^(t/m), 1e-4, 1-1e-4); shared by
/// the bias b and the guidance weight omega.
double schedule_advance(double prev, int t, int m);

inline double bias_schedule(double b_prev, int t, const GuidanceParams& p) {
  return schedule_advance(b_prev, t, p.m);
}

struct RdgLossResult {
  double loss = 0.0;
  Eigen::MatrixXd dL_dF;  // zero where F <= 0 (clamp subgradient)
  Eigen::MatrixXd dL_dD;  // filled only when with_depth_grad
};

/// Sum over unordered off-diagonal pairs of
/// log(1 + exp(-(D - b) * max(F, 0))); D is treated as constant unless
/// with_depth_grad is set.
RdgLossResult rdg_loss(const SimilarityTensor& F, const SimilarityTensor& D,
                       double b, bool with_depth_grad = false);

struct RdgChainResult {
  double loss = 0.0;
  ImageBuffer d_image;
};

/// Full guidance chain: descriptors and similarities from the rendered
/// image, depth similarities from the rendered depth (detached), loss and
/// its gradient with respect to the image pixels.
RdgChainResult rdg_chain(const ImageBuffer& img, const DepthMap& depth,
                         int patch_px, double b);

}  // namespace rdg

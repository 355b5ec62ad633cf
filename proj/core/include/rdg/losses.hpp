// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>

#include "rdg/image.hpp"

namespace rdg {

/// Scalar weights of the total training objective.
struct LossWeights {
  double beta = 0.4;     // D-SSIM weight inside the color loss
  double lambda = 0.1;   // local depth term weight
  double omega0 = 0.05;  // initial guidance weight
  double epsilon = 1e-6;
  int m = 6000;          // schedule horizon (total training steps)
};

struct LossReport {
  double l_color = 0.0;
  double l_g = 0.0;
  double l_l = 0.0;
  double l_depth = 0.0;
  double l_rdg = 0.0;
  double omega = 0.0;
  double total = 0.0;
  DepthMap patch_losses;  // per-patch local depth loss, feeds the densifier
};

/// Mean SSIM (11x11 Gaussian window, sigma 1.5, C1=0.01^2, C2=0.03^2,
/// kernel renormalized where the window leaves the raster) averaged over
/// channels. If g_a is non-null it receives d(ssim)/da.
double ssim(const ImageBuffer& a, const ImageBuffer& b, ImageBuffer* g_a = nullptr);
double ssim(const DepthMap& a, const DepthMap& b, DepthMap* g_a = nullptr);

/// L1 + beta * (1 - SSIM)/2 between rendered and ground-truth images.
/// The L1 term is a mean over pixels and channels. Gradients flow into
/// rendered only.
double color_loss(const ImageBuffer& rendered, const ImageBuffer& target,
                  double beta, ImageBuffer* g_rendered = nullptr);

/// 1 - Cov(ref, rendered) / (sigma(ref) * sigma(rendered) + eps).
/// Constant inputs contribute zero loss and zero gradient; `degenerate`
/// (when given) reports that branch. Gradients flow into rendered only.
double pearson_loss(const DepthMap& ref, const DepthMap& rendered, double eps,
                    DepthMap* g_rendered = nullptr, bool* degenerate = nullptr);

/// Per-patch z-normalization with population standard deviation:
/// (v - mean(patch)) / (std(patch) + eps). Trailing rows/columns that do
/// not fill a patch are cropped.
DepthMap patch_normalize(const DepthMap& d, int patch_px, double eps);

/// Mean squared difference of the patch-normalized maps. Also emits the
/// per-patch mean raster when asked. Gradients flow into rendered only.
double local_depth_loss(const DepthMap& ref, const DepthMap& rendered,
                        int patch_px, double eps,
                        DepthMap* g_rendered = nullptr,
                        DepthMap* per_patch = nullptr);

struct LossParts {
  double l_color = 0.0;
  double l_g = 0.0;
  double l_l = 0.0;
  double l_rdg = 0.0;
  DepthMap patch_losses;
};

/// Composes the total objective. Depth terms (l_g, l_l) enter only when
/// t > depth_warmup; omega is the current guidance weight.
LossReport total_loss(const LossParts& parts, const LossWeights& weights,
                      int t, double omega, int depth_warmup);

struct Metrics {
  double psnr = 0.0;
  double ssim = 0.0;
  double rmse = 0.0;
};

/// PSNR (capped at 99 dB when MSE < 1e-10), SSIM as above, and depth RMSE.
Metrics compute_metrics(const ImageBuffer& rendered, const ImageBuffer& target,
                        const DepthMap& depth, const DepthMap& depth_gt);

/// RMSE between a*x+b and y after least-squares fitting of (a, b); used
/// wherever depth carries scale/shift ambiguity.
double affine_aligned_rmse(const DepthMap& x, const DepthMap& y);

}  // namespace rdg

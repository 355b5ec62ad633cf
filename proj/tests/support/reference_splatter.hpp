// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <rdg/image.hpp>
#include <rdg/scene.hpp>

namespace rdgtest {

struct ReferenceOutputs {
  rdg::ImageBuffer image;
  rdg::DepthMap depth_raw, depth, acc_alpha;
};

/// Naive per-pixel compositing evaluator, written independently of the
/// production splatter (no tape, no contributor lists, per-pixel sorting).
/// Implements the same mathematical contract: affine projection with the
/// 0.3 px^2 floor, the 3-sigma box cull on pixel centers, alpha clamp at
/// 0.99, transmittance cutoff at 1e-4, alpha-normalized depth.
ReferenceOutputs reference_render(const rdg::GaussianSet& set, const rdg::Camera& cam);

}  // namespace rdgtest

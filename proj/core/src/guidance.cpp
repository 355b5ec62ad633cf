// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#include "rdg/guidance.hpp"

#include <algorithm>
#include <cmath>

#include "rdg/errors.hpp"

namespace rdg {
namespace {

constexpr double kNormFloor = 1e-12;
constexpr int kPyramidTapsLevel1 = 2;  // [1 2 1]/4 applied twice (sigma ~ 1)
constexpr int kPyramidTapsLevel2 = 6;  // six applications (sigma ~ 1.7)

double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double logistic(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// Separable [1 2 1]/4 smoothing with replicate borders, applied n times.
DepthMap binomial_blur(const DepthMap& in, int n) {
  DepthMap cur = in;
  const int h = in.height(), w = in.width();
  for (int pass = 0; pass < n; ++pass) {
    DepthMap tmp(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int xw = std::max(0, x - 1), xe = std::min(w - 1, x + 1);
        tmp.at(y, x) = 0.25 * cur.at(y, xw) + 0.5 * cur.at(y, x) + 0.25 * cur.at(y, xe);
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int yn = std::max(0, y - 1), ys = std::min(h - 1, y + 1);
        cur.at(y, x) = 0.25 * tmp.at(yn, x) + 0.5 * tmp.at(y, x) + 0.25 * tmp.at(ys, x);
      }
  }
  return cur;
}

// Exact adjoint of binomial_blur: scatter through the same clamped taps,
// horizontal and vertical stages reversed.
DepthMap binomial_blur_adjoint(const DepthMap& g_out, int n) {
  DepthMap cur = g_out;
  const int h = g_out.height(), w = g_out.width();
  for (int pass = 0; pass < n; ++pass) {
    DepthMap tmp(h, w, 0.0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int yn = std::max(0, y - 1), ys = std::min(h - 1, y + 1);
        tmp.at(yn, x) += 0.25 * cur.at(y, x);
        tmp.at(y, x) += 0.5 * cur.at(y, x);
        tmp.at(ys, x) += 0.25 * cur.at(y, x);
      }
    DepthMap next(h, w, 0.0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int xw = std::max(0, x - 1), xe = std::min(w - 1, x + 1);
        next.at(y, xw) += 0.25 * tmp.at(y, x);
        next.at(y, x) += 0.5 * tmp.at(y, x);
        next.at(y, xe) += 0.25 * tmp.at(y, x);
      }
    cur = next;
  }
  return cur;
}

}  // namespace

PatchGrid extract_features(const ImageBuffer& img, int patch_px) {
  PatchGrid g;
  g.patch_px = patch_px;
  g.rows = img.height() / patch_px;
  g.cols = img.width() / patch_px;
  g.descriptor_dim = kImageDescriptorDim;
  g.patches.reserve(static_cast<size_t>(g.rows) * g.cols);

  const DepthMap luma = luminance(img);
  DepthMap gx, gy;
  central_gradients(luma, gx, gy);
  const DepthMap blur1 = binomial_blur(luma, kPyramidTapsLevel1);
  const DepthMap blur2 = binomial_blur(luma, kPyramidTapsLevel2);

  const double n = static_cast<double>(patch_px) * patch_px;
  for (int py = 0; py < g.rows; ++py) {
    for (int px = 0; px < g.cols; ++px) {
      double mu = 0.0, agx = 0.0, agy = 0.0;
      for (int y = 0; y < patch_px; ++y)
        for (int x = 0; x < patch_px; ++x) {
          const int iy = py * patch_px + y, ix = px * patch_px + x;
          mu += luma.at(iy, ix);
          agx += std::abs(gx.at(iy, ix));
          agy += std::abs(gy.at(iy, ix));
        }
      mu /= n;
      double var = 0.0;
      for (int y = 0; y < patch_px; ++y)
        for (int x = 0; x < patch_px; ++x) {
          const double v = luma.at(py * patch_px + y, px * patch_px + x) - mu;
          var += v * v;
        }
      const int cy = py * patch_px + patch_px / 2;
      const int cx = px * patch_px + patch_px / 2;
      Eigen::VectorXd d(kImageDescriptorDim);
      d << mu, std::sqrt(var / n), agx / n, agy / n, blur1.at(cy, cx), blur2.at(cy, cx);
      g.patches.push_back(std::move(d));
    }
  }
  return g;
}

ImageBuffer extract_features_backward(const ImageBuffer& img, int patch_px,
                                      const std::vector<Eigen::VectorXd>& g_desc) {
  const int rows = img.height() / patch_px, cols = img.width() / patch_px;
  if (g_desc.size() != static_cast<size_t>(rows) * cols)
    throw ShapeMismatch("extract_features_backward: descriptor count mismatch");

  const DepthMap luma = luminance(img);
  DepthMap gx, gy;
  central_gradients(luma, gx, gy);

  const int h = img.height(), w = img.width();
  DepthMap g_luma(h, w, 0.0);
  DepthMap g_blur1(h, w, 0.0), g_blur2(h, w, 0.0);
  const double n = static_cast<double>(patch_px) * patch_px;

  for (int py = 0; py < rows; ++py) {
    for (int px = 0; px < cols; ++px) {
      const Eigen::VectorXd& gd = g_desc[static_cast<size_t>(py) * cols + px];
      double mu = 0.0;
      for (int y = 0; y < patch_px; ++y)
        for (int x = 0; x < patch_px; ++x)
          mu += luma.at(py * patch_px + y, px * patch_px + x);
      mu /= n;
      double var = 0.0;
      for (int y = 0; y < patch_px; ++y)
        for (int x = 0; x < patch_px; ++x) {
          const double v = luma.at(py * patch_px + y, px * patch_px + x) - mu;
          var += v * v;
        }
      const double sd = std::sqrt(var / n);

      for (int y = 0; y < patch_px; ++y)
        for (int x = 0; x < patch_px; ++x) {
          const int iy = py * patch_px + y, ix = px * patch_px + x;
          double acc = gd[0] / n;  // mean channel
          if (sd > 1e-12) acc += gd[1] * (luma.at(iy, ix) - mu) / (n * sd);
          g_luma.at(iy, ix) += acc;

          // |grad| channels scatter through the central-difference stencil
          const double sgx = gx.at(iy, ix) > 0.0 ? 1.0 : (gx.at(iy, ix) < 0.0 ? -1.0 : 0.0);
          const double sgy = gy.at(iy, ix) > 0.0 ? 1.0 : (gy.at(iy, ix) < 0.0 ? -1.0 : 0.0);
          const int xw = std::max(0, ix - 1), xe = std::min(w - 1, ix + 1);
          const int yn = std::max(0, iy - 1), ys = std::min(h - 1, iy + 1);
          g_luma.at(iy, xe) += gd[2] / n * sgx * 0.5;
          g_luma.at(iy, xw) -= gd[2] / n * sgx * 0.5;
          g_luma.at(ys, ix) += gd[3] / n * sgy * 0.5;
          g_luma.at(yn, ix) -= gd[3] / n * sgy * 0.5;
        }

      const int cy = py * patch_px + patch_px / 2;
      const int cx = px * patch_px + patch_px / 2;
      g_blur1.at(cy, cx) += gd[4];
      g_blur2.at(cy, cx) += gd[5];
    }
  }

  const DepthMap gb1 = binomial_blur_adjoint(g_blur1, kPyramidTapsLevel1);
  const DepthMap gb2 = binomial_blur_adjoint(g_blur2, kPyramidTapsLevel2);
  for (size_t i = 0; i < g_luma.size(); ++i)
    g_luma.data()[i] += gb1.data()[i] + gb2.data()[i];

  ImageBuffer g_img(h, w, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      g_img.at(y, x, 0) = kLumaR * g_luma.at(y, x);
      g_img.at(y, x, 1) = kLumaG * g_luma.at(y, x);
      g_img.at(y, x, 2) = kLumaB * g_luma.at(y, x);
    }
  return g_img;
}

PatchGrid depth_patch_grid(const DepthMap& depth, int patch_px) {
  PatchGrid g;
  g.patch_px = patch_px;
  g.rows = depth.height() / patch_px;
  g.cols = depth.width() / patch_px;
  g.descriptor_dim = patch_px * patch_px;
  g.patches.reserve(static_cast<size_t>(g.rows) * g.cols);

  double mean = 0.0;
  const int usable_h = g.rows * patch_px, usable_w = g.cols * patch_px;
  for (int y = 0; y < usable_h; ++y)
    for (int x = 0; x < usable_w; ++x) mean += depth.at(y, x);
  mean /= static_cast<double>(usable_h) * usable_w;

  for (int py = 0; py < g.rows; ++py)
    for (int px = 0; px < g.cols; ++px) {
      Eigen::VectorXd v(g.descriptor_dim);
      for (int y = 0; y < patch_px; ++y)
        for (int x = 0; x < patch_px; ++x)
          v[y * patch_px + x] = depth.at(py * patch_px + y, px * patch_px + x) - mean;
      g.patches.push_back(std::move(v));
    }
  return g;
}

SimilarityTensor similarity(const PatchGrid& grid) {
  const int n = grid.count();
  SimilarityTensor t;
  t.values = Eigen::MatrixXd::Zero(n, n);
  t.degenerate.assign(n, 0);

  std::vector<double> norms(n);
  for (int i = 0; i < n; ++i) {
    norms[i] = grid.patches[i].norm();
    if (norms[i] < kNormFloor) t.degenerate[i] = 1;
  }
  for (int i = 0; i < n; ++i) {
    if (!t.degenerate[i]) t.values(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      double v = 0.0;
      if (!t.degenerate[i] && !t.degenerate[j])
        v = grid.patches[i].dot(grid.patches[j]) / (norms[i] * norms[j]);
      t.values(i, j) = v;
      t.values(j, i) = v;
    }
  }
  return t;
}

std::vector<Eigen::VectorXd> similarity_backward(const PatchGrid& grid,
                                                 const SimilarityTensor& sim,
                                                 const Eigen::MatrixXd& g_values) {
  const int n = grid.count();
  if (g_values.rows() != n || g_values.cols() != n)
    throw ShapeMismatch("similarity_backward: cotangent shape mismatch");
  std::vector<Eigen::VectorXd> g(n);
  for (int i = 0; i < n; ++i)
    g[i] = Eigen::VectorXd::Zero(grid.descriptor_dim);

  std::vector<double> norms(n);
  for (int i = 0; i < n; ++i) norms[i] = grid.patches[i].norm();

  for (int i = 0; i < n; ++i) {
    if (sim.degenerate[i]) continue;
    for (int j = i + 1; j < n; ++j) {
      if (sim.degenerate[j]) continue;
      const double gij = g_values(i, j);
      if (gij == 0.0) continue;
      const double inv = 1.0 / (norms[i] * norms[j]);
      const double f = sim.values(i, j);
      g[i] += gij * (grid.patches[j] * inv - f * grid.patches[i] / (norms[i] * norms[i]));
      g[j] += gij * (grid.patches[i] * inv - f * grid.patches[j] / (norms[j] * norms[j]));
    }
  }
  return g;
}

double schedule_advance(double prev, int t, int m) {
  const double next = std::pow(prev, static_cast<double>(t) / static_cast<double>(m));
  return std::clamp(next, 1e-4, 1.0 - 1e-4);
}

RdgLossResult rdg_loss(const SimilarityTensor& F, const SimilarityTensor& D,
                       double b, bool with_depth_grad) {
  const int n = F.count();
  if (D.count() != n) throw ShapeMismatch("rdg_loss: tensor shape mismatch");
  RdgLossResult r;
  r.dL_dF = Eigen::MatrixXd::Zero(n, n);
  if (with_depth_grad) r.dL_dD = Eigen::MatrixXd::Zero(n, n);

  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double f_pos = std::max(F.values(i, j), 0.0);
      const double margin = D.values(i, j) - b;
      const double z = -margin * f_pos;
      r.loss += softplus(z);
      const double sig = logistic(z);
      if (F.values(i, j) > 0.0) {
        const double g = -margin * sig;
        r.dL_dF(i, j) = g;
        r.dL_dF(j, i) = g;
      }
      if (with_depth_grad) {
        const double g = -f_pos * sig;
        r.dL_dD(i, j) = g;
        r.dL_dD(j, i) = g;
      }
    }
  }
  return r;
}

RdgChainResult rdg_chain(const ImageBuffer& img, const DepthMap& depth,
                         int patch_px, double b) {
  const PatchGrid fgrid = extract_features(img, patch_px);
  const PatchGrid dgrid = depth_patch_grid(depth, patch_px);
  const SimilarityTensor f_sim = similarity(fgrid);
  const SimilarityTensor d_sim = similarity(dgrid);
  const RdgLossResult l = rdg_loss(f_sim, d_sim, b);

  RdgChainResult out;
  out.loss = l.loss;
  const std::vector<Eigen::VectorXd> g_desc =
      similarity_backward(fgrid, f_sim, l.dL_dF);
  out.d_image = extract_features_backward(img, patch_px, g_desc);
  return out;
}

}  // namespace rdg

// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <vector>

#include "rdg/image.hpp"

namespace rdg {

/// Weights and bandwidths of the refinement energy. Bandwidth units inside
/// refine(): pixel distances in pixels; depth and color normalized to
/// [0, 255] (depth by the coarse map's min/max range); gradients taken on
/// those [0, 255]-scaled rasters.
struct EnergyParams {
  double w_u = 1.0;   // unary module weight
  double w_p = 10.0;  // pairwise module weight
  double w_h = 5.0;   // high-frequency module weight
  double theta_alpha = 35.0;  // spatial kernel, px
  double theta_mu = 10.0;     // depth kernel
  double theta_beta = 10.0;   // color kernel
  double tau = 5.0;    // edge sensitivity of g_u
  double gamma = 10.0;  // gradient-similarity sensitivity of g_p
  int labels = 64;
  int unary_window_radius = 3;  // 7x7 windows
  int neighborhood_radius = 9;  // pairwise truncation, px
  int icm_sweeps = 10;
  double epsilon = 1e-6;

  static EnergyParams coarse_pass() { return {}; }
  static EnergyParams fine_pass() {
    EnergyParams p;
    p.theta_alpha = 10.0;
    p.theta_mu = 2.0;
    p.theta_beta = 2.0;
    p.neighborhood_radius = 3;
    return p;
  }
};

/// Label raster plus the monotone depth values the labels decode to.
struct LabeledDepthField {
  int height = 0, width = 0;
  std::vector<int> labels;          // row-major
  std::vector<double> level_values; // strictly increasing, original units

  DepthMap decode() const;
};

/// Plain kernel product of the pairwise module (without g_p):
/// (1 - exp(-|xi-xj|^2 / 2 theta_mu^2))
///   * exp(-||pi-pj||^2 / 2 theta_alpha^2 - ||yi-yj||^2 / 2 theta_beta^2).
double pairwise_cost(double x_i, double x_j, const Eigen::Vector2d& pix_i,
                     const Eigen::Vector2d& pix_j, const Eigen::Vector3d& y_i,
                     const Eigen::Vector3d& y_j, const EnergyParams& p);

/// Labeled unary module: if the candidate keeps the coarse label,
/// -log(clamp(S, eps, 1)); otherwise -log(clamp((1-S)/(l-1), eps, 1)),
/// where S compares z-normalized local windows of the coarse depth and the
/// image luminance. Windows with no variation on either side count as
/// perfectly matched (S = 1).
double unary_cost(const DepthMap& coarse, const ImageBuffer& img, int y, int x,
                  int candidate_label, const EnergyParams& p);

/// High-frequency terms for caller-scaled rasters: luma is derived from img
/// (scaled by 255), d is used as given.
struct HfTerms {
  DepthMap psi_h;  // ||grad I - grad D||^2
  DepthMap g_u;    // exp(-psi_h / 2 tau^2)
  DepthMap grad_x_i, grad_y_i;
  double gamma = 10.0;

  double g_p(int yi, int xi, int yj, int xj) const;
};
HfTerms hf_terms(const ImageBuffer& img, const DepthMap& d, const EnergyParams& p);

/// Precomputed energy tables for one (coarse depth, image, params) triple.
/// Shared by ICM inference, total-energy evaluation, and the exhaustive
/// test oracles.
class EnergyModel {
 public:
  EnergyModel(const DepthMap& coarse, const ImageBuffer& img, const EnergyParams& p);

  int height() const { return h_; }
  int width() const { return w_; }
  int label_count() const { return params_.labels; }
  const EnergyParams& params() const { return params_; }

  int coarse_label(int i) const { return coarse_labels_[i]; }
  double unary_equal(int i) const { return unary_eq_[i]; }
  double unary_differs(int i) const { return unary_neq_[i]; }
  double level_norm(int k) const { return level_norm_[k]; }
  const std::vector<double>& level_values() const { return level_orig_; }
  /// 1 - exp(-(lv[a]-lv[b])^2 / 2 theta_mu^2) in normalized units.
  double pair_depth_factor(int a, int b) const {
    return pdf_[static_cast<size_t>(a) * params_.labels + b];
  }
  /// w_p * spatial * color * g_p for the pair (i, i+offset); 0 when the
  /// offset leaves the raster.
  double pair_weight(int i, int offset_index) const;
  const std::vector<std::pair<int, int>>& half_offsets() const { return half_offsets_; }

  /// w_u * psi_u * g_u + w_h * psi_h at pixel i under the given labeling.
  double pixel_term(int i, const std::vector<int>& labels) const;

  double total_energy(const std::vector<int>& labels) const;

  /// Raster-scan coordinate descent; stops early when a sweep changes
  /// nothing. Appends the energy before sweeping and after each sweep to
  /// `energies` when provided. Returns the number of sweeps run.
  int run_icm(std::vector<int>& labels, int max_sweeps,
              std::vector<double>* energies = nullptr) const;

  LabeledDepthField quantize(const DepthMap& coarse) const;

 private:
  double candidate_local_energy(int i, int candidate, std::vector<int>& labels,
                                std::vector<double>& dvals,
                                const std::vector<double>& pair_hist) const;

  int h_ = 0, w_ = 0;
  EnergyParams params_;
  double depth_min_ = 0.0, depth_range_ = 1.0;
  std::vector<int> coarse_labels_;
  std::vector<double> unary_eq_, unary_neq_;
  std::vector<double> level_norm_, level_orig_;
  std::vector<double> pdf_;
  std::vector<double> grad_x_i_, grad_y_i_;  // luma gradients, [0,255] units
  std::vector<std::pair<int, int>> half_offsets_;  // (dy, dx), half plane
  std::vector<double> offset_spatial_;
  std::vector<float> pair_weights_;  // [pixel][half offset]
};

struct RefineResult {
  DepthMap refined;
  bool degenerate = false;          // coarse range below epsilon; passthrough
  std::vector<double> coarse_energies;  // energy before + after each sweep
  std::vector<double> fine_energies;
};

/// Two-pass labeled-MRF refinement: quantize the coarse depth, run ICM
/// under the coarse kernel set, re-run under the fine kernel set, decode.
/// Output values always lie inside [min coarse, max coarse].
RefineResult refine(const DepthMap& coarse, const ImageBuffer& img,
                    const EnergyParams& coarse_params,
                    const EnergyParams& fine_params);

}  // namespace rdg

// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#include "rdg/depth_refiner.hpp"

#include <algorithm>
#include <cmath>

#include "rdg/errors.hpp"

namespace rdg {
namespace {

constexpr double kWindowSsimC2 = 0.03 * 0.03;
constexpr double kVarFloor = 1e-12;

// Correlation-form SSIM of z-normalized windows clipped to the raster.
// Either window flat -> treated as perfectly matched.
double window_ssim(const DepthMap& a, const DepthMap& b, int cy, int cx, int radius) {
  const int h = a.height(), w = a.width();
  const int y0 = std::max(0, cy - radius), y1 = std::min(h - 1, cy + radius);
  const int x0 = std::max(0, cx - radius), x1 = std::min(w - 1, cx + radius);
  const double n = static_cast<double>(y1 - y0 + 1) * (x1 - x0 + 1);

  double ma = 0.0, mb = 0.0;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      ma += a.at(y, x);
      mb += b.at(y, x);
    }
  ma /= n;
  mb /= n;
  double va = 0.0, vb = 0.0, cab = 0.0;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double da = a.at(y, x) - ma;
      const double db = b.at(y, x) - mb;
      va += da * da;
      vb += db * db;
      cab += da * db;
    }
  if (va / n < kVarFloor || vb / n < kVarFloor) return 1.0;
  const double rho = cab / std::sqrt(va * vb);
  return (2.0 * rho + kWindowSsimC2) / (2.0 + kWindowSsimC2);
}

double clamped_neg_log(double v, double eps) {
  return -std::log(std::clamp(v, eps, 1.0));
}

}  // namespace

DepthMap LabeledDepthField::decode() const {
  DepthMap out(height, width);
  for (int i = 0; i < height * width; ++i) out.data()[i] = level_values[labels[i]];
  return out;
}

double pairwise_cost(double x_i, double x_j, const Eigen::Vector2d& pix_i,
                     const Eigen::Vector2d& pix_j, const Eigen::Vector3d& y_i,
                     const Eigen::Vector3d& y_j, const EnergyParams& p) {
  const double dd = x_i - x_j;
  const double depth_term = 1.0 - std::exp(-dd * dd / (2.0 * p.theta_mu * p.theta_mu));
  const double ds = (pix_i - pix_j).squaredNorm();
  const double dc = (y_i - y_j).squaredNorm();
  return depth_term * std::exp(-ds / (2.0 * p.theta_alpha * p.theta_alpha) -
                               dc / (2.0 * p.theta_beta * p.theta_beta));
}

double unary_cost(const DepthMap& coarse, const ImageBuffer& img, int y, int x,
                  int candidate_label, const EnergyParams& p) {
  double mn = coarse.data()[0], mx = coarse.data()[0];
  for (double v : coarse.data()) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  const double range = std::max(mx - mn, p.epsilon);
  DepthMap dn(coarse.height(), coarse.width());
  for (size_t i = 0; i < coarse.size(); ++i)
    dn.data()[i] = (coarse.data()[i] - mn) / range * 255.0;
  const DepthMap luma = luminance(img, 255.0);

  const double s = window_ssim(dn, luma, y, x, p.unary_window_radius);
  const int current = static_cast<int>(std::lround(
      (coarse.at(y, x) - mn) / range * (p.labels - 1)));
  if (candidate_label == std::clamp(current, 0, p.labels - 1))
    return clamped_neg_log(s, p.epsilon);
  return clamped_neg_log((1.0 - s) / (p.labels - 1), p.epsilon);
}

double HfTerms::g_p(int yi, int xi, int yj, int xj) const {
  const double dx = grad_x_i.at(yi, xi) - grad_x_i.at(yj, xj);
  const double dy = grad_y_i.at(yi, xi) - grad_y_i.at(yj, xj);
  return std::exp(-(dx * dx + dy * dy) / (2.0 * gamma * gamma));
}

HfTerms hf_terms(const ImageBuffer& img, const DepthMap& d, const EnergyParams& p) {
  if (img.height() != d.height() || img.width() != d.width())
    throw ShapeMismatch("hf_terms: raster shape mismatch");
  HfTerms t;
  t.gamma = p.gamma;
  const DepthMap luma = luminance(img, 255.0);
  central_gradients(luma, t.grad_x_i, t.grad_y_i);
  DepthMap gxd, gyd;
  central_gradients(d, gxd, gyd);

  t.psi_h = DepthMap(d.height(), d.width());
  t.g_u = DepthMap(d.height(), d.width());
  for (int y = 0; y < d.height(); ++y)
    for (int x = 0; x < d.width(); ++x) {
      const double hx = t.grad_x_i.at(y, x) - gxd.at(y, x);
      const double hy = t.grad_y_i.at(y, x) - gyd.at(y, x);
      const double ph = hx * hx + hy * hy;
      t.psi_h.at(y, x) = ph;
      t.g_u.at(y, x) = std::exp(-ph / (2.0 * p.tau * p.tau));
    }
  return t;
}

EnergyModel::EnergyModel(const DepthMap& coarse, const ImageBuffer& img,
                         const EnergyParams& p)
    : h_(coarse.height()), w_(coarse.width()), params_(p) {
  if (img.height() != h_ || img.width() != w_)
    throw ShapeMismatch("EnergyModel: image/depth shape mismatch");
  const int l = p.labels;
  const int npx = h_ * w_;

  double mn = coarse.data()[0], mx = coarse.data()[0];
  for (double v : coarse.data()) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  depth_min_ = mn;
  depth_range_ = std::max(mx - mn, p.epsilon);

  level_norm_.resize(l);
  level_orig_.resize(l);
  for (int k = 0; k < l; ++k) {
    level_norm_[k] = 255.0 * k / (l - 1);
    level_orig_[k] = mn + depth_range_ * k / (l - 1);
  }

  DepthMap dn(h_, w_);
  coarse_labels_.resize(npx);
  for (int i = 0; i < npx; ++i) {
    dn.data()[i] = (coarse.data()[i] - mn) / depth_range_ * 255.0;
    coarse_labels_[i] = std::clamp(
        static_cast<int>(std::lround(dn.data()[i] / 255.0 * (l - 1))), 0, l - 1);
  }

  const DepthMap luma = luminance(img, 255.0);
  DepthMap gx, gy;
  central_gradients(luma, gx, gy);
  grad_x_i_ = gx.data();
  grad_y_i_ = gy.data();

  unary_eq_.resize(npx);
  unary_neq_.resize(npx);
  for (int y = 0; y < h_; ++y)
    for (int x = 0; x < w_; ++x) {
      const double s = window_ssim(dn, luma, y, x, p.unary_window_radius);
      unary_eq_[y * w_ + x] = clamped_neg_log(s, p.epsilon);
      unary_neq_[y * w_ + x] = clamped_neg_log((1.0 - s) / (l - 1), p.epsilon);
    }

  pdf_.resize(static_cast<size_t>(l) * l);
  for (int a = 0; a < l; ++a)
    for (int b = 0; b < l; ++b) {
      const double dd = level_norm_[a] - level_norm_[b];
      pdf_[static_cast<size_t>(a) * l + b] =
          1.0 - std::exp(-dd * dd / (2.0 * p.theta_mu * p.theta_mu));
    }

  const int r = p.neighborhood_radius;
  for (int dy = 0; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      if (dy == 0 && dx <= 0) continue;
      if (dy * dy + dx * dx > r * r) continue;
      half_offsets_.emplace_back(dy, dx);
      offset_spatial_.push_back(std::exp(
          -(dy * dy + dx * dx) / (2.0 * p.theta_alpha * p.theta_alpha)));
    }

  pair_weights_.assign(static_cast<size_t>(npx) * half_offsets_.size(), 0.0f);
  const double inv_beta = 1.0 / (2.0 * p.theta_beta * p.theta_beta);
  const double inv_gamma = 1.0 / (2.0 * p.gamma * p.gamma);
  for (int y = 0; y < h_; ++y)
    for (int x = 0; x < w_; ++x) {
      const int i = y * w_ + x;
      const Eigen::Vector3d ci = 255.0 * img.pixel(y, x);
      for (size_t o = 0; o < half_offsets_.size(); ++o) {
        const int yy = y + half_offsets_[o].first;
        const int xx = x + half_offsets_[o].second;
        if (yy < 0 || yy >= h_ || xx < 0 || xx >= w_) continue;
        const int j = yy * w_ + xx;
        const double dc = (ci - 255.0 * img.pixel(yy, xx)).squaredNorm();
        const double dgx = grad_x_i_[i] - grad_x_i_[j];
        const double dgy = grad_y_i_[i] - grad_y_i_[j];
        pair_weights_[static_cast<size_t>(i) * half_offsets_.size() + o] =
            static_cast<float>(p.w_p * offset_spatial_[o] *
                               std::exp(-dc * inv_beta -
                                        (dgx * dgx + dgy * dgy) * inv_gamma));
      }
    }
}

double EnergyModel::pair_weight(int i, int offset_index) const {
  return pair_weights_[static_cast<size_t>(i) * half_offsets_.size() + offset_index];
}

double EnergyModel::pixel_term(int i, const std::vector<int>& labels) const {
  const int y = i / w_, x = i % w_;
  const int xe = std::min(w_ - 1, x + 1), xw = std::max(0, x - 1);
  const int ys = std::min(h_ - 1, y + 1), yn = std::max(0, y - 1);
  const double gxd = 0.5 * (level_norm_[labels[y * w_ + xe]] -
                            level_norm_[labels[y * w_ + xw]]);
  const double gyd = 0.5 * (level_norm_[labels[ys * w_ + x]] -
                            level_norm_[labels[yn * w_ + x]]);
  const double hx = grad_x_i_[i] - gxd;
  const double hy = grad_y_i_[i] - gyd;
  const double psi_h = hx * hx + hy * hy;
  const double g_u = std::exp(-psi_h / (2.0 * params_.tau * params_.tau));
  const double u = labels[i] == coarse_labels_[i] ? unary_eq_[i] : unary_neq_[i];
  return params_.w_u * u * g_u + params_.w_h * psi_h;
}

double EnergyModel::total_energy(const std::vector<int>& labels) const {
  const int npx = h_ * w_;
  double e = 0.0;
  for (int i = 0; i < npx; ++i) e += pixel_term(i, labels);
  for (int i = 0; i < npx; ++i) {
    const int y = i / w_, x = i % w_;
    for (size_t o = 0; o < half_offsets_.size(); ++o) {
      const double wgt = pair_weight(i, o);
      if (wgt == 0.0) continue;
      const int j = (y + half_offsets_[o].first) * w_ + x + half_offsets_[o].second;
      e += wgt * pair_depth_factor(labels[i], labels[j]);
    }
  }
  return e;
}

int EnergyModel::run_icm(std::vector<int>& labels, int max_sweeps,
                         std::vector<double>* energies) const {
  const int l = params_.labels;
  const int npx = h_ * w_;
  std::vector<double> hist(l);
  std::vector<int> affected;
  affected.reserve(5);
  if (energies) energies->push_back(total_energy(labels));

  int sweeps = 0;
  for (; sweeps < max_sweeps; ++sweeps) {
    int changes = 0;
    for (int i = 0; i < npx; ++i) {
      const int y = i / w_, x = i % w_;

      std::fill(hist.begin(), hist.end(), 0.0);
      for (size_t o = 0; o < half_offsets_.size(); ++o) {
        const auto [dy, dx] = half_offsets_[o];
        const int yf = y + dy, xf = x + dx;
        if (yf >= 0 && yf < h_ && xf >= 0 && xf < w_)
          hist[labels[yf * w_ + xf]] += pair_weight(i, o);
        const int yb = y - dy, xb = x - dx;
        if (yb >= 0 && yb < h_ && xb >= 0 && xb < w_)
          hist[labels[yb * w_ + xb]] += pair_weight(yb * w_ + xb, o);
      }

      // pixels whose depth gradient involves pixel i, plus i itself
      affected.clear();
      affected.push_back(i);
      if (x > 0) affected.push_back(i - 1);
      if (x + 1 < w_) affected.push_back(i + 1);
      if (y > 0) affected.push_back(i - w_);
      if (y + 1 < h_) affected.push_back(i + w_);

      const int current = labels[i];
      int best = current;
      double best_e = 0.0, current_e = 0.0;
      for (int c = 0; c < l; ++c) {
        labels[i] = c;
        double e = 0.0;
        for (int j : affected) e += pixel_term(j, labels);
        const double* row = &pdf_[static_cast<size_t>(c) * l];
        for (int k = 0; k < l; ++k) e += hist[k] * row[k];
        if (c == current) current_e = e;
        if (c == 0 || e < best_e) {
          best_e = e;
          best = c;
        }
      }
      labels[i] = best_e < current_e ? best : current;
      if (labels[i] != current) ++changes;
    }
    if (energies) energies->push_back(total_energy(labels));
    if (changes == 0) {
      ++sweeps;
      break;
    }
  }
  return sweeps;
}

LabeledDepthField EnergyModel::quantize(const DepthMap& coarse) const {
  LabeledDepthField f;
  f.height = h_;
  f.width = w_;
  f.labels = coarse_labels_;
  f.level_values = level_orig_;
  (void)coarse;
  return f;
}

RefineResult refine(const DepthMap& coarse, const ImageBuffer& img,
                    const EnergyParams& coarse_params,
                    const EnergyParams& fine_params) {
  if (coarse_params.labels != fine_params.labels || coarse_params.labels < 2)
    throw ShapeMismatch("refine: both passes must share a label count >= 2");
  RefineResult out;
  double mn = coarse.data()[0], mx = coarse.data()[0];
  for (double v : coarse.data()) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  if (mx - mn < coarse_params.epsilon) {
    out.refined = coarse;
    out.degenerate = true;
    return out;
  }

  const EnergyModel coarse_model(coarse, img, coarse_params);
  LabeledDepthField field = coarse_model.quantize(coarse);
  coarse_model.run_icm(field.labels, coarse_params.icm_sweeps, &out.coarse_energies);

  const EnergyModel fine_model(coarse, img, fine_params);
  fine_model.run_icm(field.labels, fine_params.icm_sweeps, &out.fine_energies);

  out.refined = field.decode();
  return out;
}

}  // namespace rdg

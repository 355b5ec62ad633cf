// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#include "rdg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "rdg/errors.hpp"

namespace rdg {
namespace {

constexpr int kSsimRadius = 5;  // 11x11 window
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

const std::vector<double>& ssim_kernel_1d() {
  static const std::vector<double> k = [] {
    std::vector<double> v(2 * kSsimRadius + 1);
    double sum = 0.0;
    for (int i = -kSsimRadius; i <= kSsimRadius; ++i) {
      v[i + kSsimRadius] = std::exp(-0.5 * i * i / (kSsimSigma * kSsimSigma));
      sum += v[i + kSsimRadius];
    }
    for (double& x : v) x /= sum;
    return v;
  }();
  return k;
}

// Unnormalized correlation with the 2D Gaussian kernel, window clipped to
// the raster. The kernel is symmetric, so this operator is its own adjoint.
DepthMap filter_gauss(const DepthMap& in) {
  const auto& k = ssim_kernel_1d();
  const int h = in.height(), w = in.width();
  DepthMap out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -kSsimRadius; dy <= kSsimRadius; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        const double ky = k[dy + kSsimRadius];
        for (int dx = -kSsimRadius; dx <= kSsimRadius; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= w) continue;
          acc += ky * k[dx + kSsimRadius] * in.at(yy, xx);
        }
      }
      out.at(y, x) = acc;
    }
  }
  return out;
}

const DepthMap& kernel_mass(int h, int w) {
  static DepthMap cached;
  if (cached.height() != h || cached.width() != w) {
    DepthMap ones(h, w, 1.0);
    cached = filter_gauss(ones);
  }
  return cached;
}

DepthMap multiply(const DepthMap& a, const DepthMap& b) {
  DepthMap out(a.height(), a.width());
  for (size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  return out;
}

double ssim_channel(const DepthMap& x, const DepthMap& y, DepthMap* g_x) {
  const int h = x.height(), w = x.width();
  const DepthMap& z = kernel_mass(h, w);
  const double n = static_cast<double>(h) * w;

  DepthMap mx = filter_gauss(x), my = filter_gauss(y);
  DepthMap pxx = filter_gauss(multiply(x, x));
  DepthMap pyy = filter_gauss(multiply(y, y));
  DepthMap pxy = filter_gauss(multiply(x, y));
  for (size_t i = 0; i < mx.size(); ++i) {
    const double inv_z = 1.0 / z.data()[i];
    mx.data()[i] *= inv_z;
    my.data()[i] *= inv_z;
    pxx.data()[i] *= inv_z;
    pyy.data()[i] *= inv_z;
    pxy.data()[i] *= inv_z;
  }

  double total = 0.0;
  DepthMap g_mx, g_pxx, g_pxy;
  if (g_x) {
    g_mx = DepthMap(h, w);
    g_pxx = DepthMap(h, w);
    g_pxy = DepthMap(h, w);
  }
  for (size_t i = 0; i < mx.size(); ++i) {
    const double ux = mx.data()[i], uy = my.data()[i];
    const double vx = pxx.data()[i] - ux * ux;
    const double vy = pyy.data()[i] - uy * uy;
    const double cxy = pxy.data()[i] - ux * uy;
    const double a1 = 2.0 * ux * uy + kSsimC1;
    const double a2 = 2.0 * cxy + kSsimC2;
    const double b1 = ux * ux + uy * uy + kSsimC1;
    const double b2 = vx + vy + kSsimC2;
    const double s = (a1 * a2) / (b1 * b2);
    total += s;
    if (g_x) {
      const double g = 1.0 / n;  // upstream from the spatial mean
      const double ds_da1 = a2 / (b1 * b2);
      const double ds_da2 = a1 / (b1 * b2);
      const double ds_db1 = -s / b1;
      const double ds_db2 = -s / b2;
      // raw adjoints: mx enters a1, b1, and the centered moments
      g_mx.data()[i] = g * (ds_da1 * 2.0 * uy + ds_db1 * 2.0 * ux +
                            ds_db2 * (-2.0 * ux) + ds_da2 * 2.0 * (-uy));
      g_pxx.data()[i] = g * ds_db2;
      g_pxy.data()[i] = g * ds_da2 * 2.0;
    }
  }

  if (g_x) {
    for (size_t i = 0; i < g_mx.size(); ++i) {
      const double inv_z = 1.0 / z.data()[i];
      g_mx.data()[i] *= inv_z;
      g_pxx.data()[i] *= inv_z;
      g_pxy.data()[i] *= inv_z;
    }
    const DepthMap t_m = filter_gauss(g_mx);
    const DepthMap t_xx = filter_gauss(g_pxx);
    const DepthMap t_xy = filter_gauss(g_pxy);
    *g_x = DepthMap(h, w);
    for (size_t i = 0; i < t_m.size(); ++i)
      g_x->data()[i] =
          t_m.data()[i] + 2.0 * x.data()[i] * t_xx.data()[i] + y.data()[i] * t_xy.data()[i];
  }
  return total / n;
}

DepthMap extract_channel(const ImageBuffer& img, int c) {
  DepthMap out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) out.at(y, x) = img.at(y, x, c);
  return out;
}

}  // namespace

double ssim(const DepthMap& a, const DepthMap& b, DepthMap* g_a) {
  if (!a.same_shape(b)) throw ShapeMismatch("ssim: shape mismatch");
  return ssim_channel(a, b, g_a);
}

double ssim(const ImageBuffer& a, const ImageBuffer& b, ImageBuffer* g_a) {
  if (!a.same_shape(b)) throw ShapeMismatch("ssim: shape mismatch");
  double total = 0.0;
  if (g_a) *g_a = ImageBuffer(a.height(), a.width());
  for (int c = 0; c < 3; ++c) {
    DepthMap gc;
    total += ssim_channel(extract_channel(a, c), extract_channel(b, c),
                          g_a ? &gc : nullptr);
    if (g_a)
      for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x) g_a->at(y, x, c) = gc.at(y, x) / 3.0;
  }
  return total / 3.0;
}

double color_loss(const ImageBuffer& rendered, const ImageBuffer& target,
                  double beta, ImageBuffer* g_rendered) {
  if (!rendered.same_shape(target)) throw ShapeMismatch("color_loss: shape mismatch");
  const double n = static_cast<double>(rendered.size());
  double l1 = 0.0;
  for (size_t i = 0; i < rendered.size(); ++i)
    l1 += std::abs(rendered.data()[i] - target.data()[i]);
  l1 /= n;

  ImageBuffer g_ssim;
  const double s = ssim(rendered, target, g_rendered ? &g_ssim : nullptr);
  const double loss = l1 + beta * 0.5 * (1.0 - s);

  if (g_rendered) {
    *g_rendered = ImageBuffer(rendered.height(), rendered.width());
    for (size_t i = 0; i < rendered.size(); ++i) {
      const double diff = rendered.data()[i] - target.data()[i];
      const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      g_rendered->data()[i] = sign / n - beta * 0.5 * g_ssim.data()[i];
    }
  }
  return loss;
}

double pearson_loss(const DepthMap& ref, const DepthMap& rendered, double eps,
                    DepthMap* g_rendered, bool* degenerate) {
  if (!ref.same_shape(rendered)) throw ShapeMismatch("pearson_loss: shape mismatch");
  const double n = static_cast<double>(ref.size());
  double mu_r = 0.0, mu_o = 0.0;
  for (size_t i = 0; i < ref.size(); ++i) {
    mu_r += ref.data()[i];
    mu_o += rendered.data()[i];
  }
  mu_r /= n;
  mu_o /= n;
  double cov = 0.0, var_r = 0.0, var_o = 0.0;
  for (size_t i = 0; i < ref.size(); ++i) {
    const double dr = ref.data()[i] - mu_r;
    const double dd = rendered.data()[i] - mu_o;
    cov += dr * dd;
    var_r += dr * dr;
    var_o += dd * dd;
  }
  cov /= n;
  var_r /= n;
  var_o /= n;
  const double sig_r = std::sqrt(var_r), sig_o = std::sqrt(var_o);

  if (g_rendered) *g_rendered = DepthMap(ref.height(), ref.width());
  if (sig_r <= eps || sig_o <= eps) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  if (degenerate) *degenerate = false;

  const double denom = sig_r * sig_o + eps;
  const double corr = cov / denom;
  if (g_rendered) {
    for (size_t i = 0; i < ref.size(); ++i) {
      const double dr = ref.data()[i] - mu_r;
      const double dd = rendered.data()[i] - mu_o;
      const double dcov = dr / n;
      const double dsig_o = dd / (n * sig_o);
      const double dcorr = (dcov * denom - cov * sig_r * dsig_o) / (denom * denom);
      g_rendered->data()[i] = -dcorr;
    }
  }
  return 1.0 - corr;
}

DepthMap patch_normalize(const DepthMap& d, int patch_px, double eps) {
  const int ph = d.height() / patch_px, pw = d.width() / patch_px;
  DepthMap out(ph * patch_px, pw * patch_px);
  const double n = static_cast<double>(patch_px) * patch_px;
  for (int py = 0; py < ph; ++py) {
    for (int px = 0; px < pw; ++px) {
      double mu = 0.0;
      for (int y = 0; y < patch_px; ++y)
        for (int x = 0; x < patch_px; ++x)
          mu += d.at(py * patch_px + y, px * patch_px + x);
      mu /= n;
      double var = 0.0;
      for (int y = 0; y < patch_px; ++y)
        for (int x = 0; x < patch_px; ++x) {
          const double v = d.at(py * patch_px + y, px * patch_px + x) - mu;
          var += v * v;
        }
      const double sd = std::sqrt(var / n);
      for (int y = 0; y < patch_px; ++y)
        for (int x = 0; x < patch_px; ++x)
          out.at(py * patch_px + y, px * patch_px + x) =
              (d.at(py * patch_px + y, px * patch_px + x) - mu) / (sd + eps);
    }
  }
  return out;
}

double local_depth_loss(const DepthMap& ref, const DepthMap& rendered,
                        int patch_px, double eps, DepthMap* g_rendered,
                        DepthMap* per_patch) {
  if (!ref.same_shape(rendered)) throw ShapeMismatch("local_depth_loss: shape mismatch");
  const int ph = ref.height() / patch_px, pw = ref.width() / patch_px;
  const DepthMap rn = patch_normalize(ref, patch_px, eps);
  const double n_px = static_cast<double>(patch_px) * patch_px;
  const double n_all = n_px * ph * pw;

  if (g_rendered) *g_rendered = DepthMap(ref.height(), ref.width());
  if (per_patch) *per_patch = DepthMap(ph, pw);

  double total = 0.0;
  std::vector<double> diff(static_cast<size_t>(patch_px) * patch_px);
  std::vector<double> centered(diff.size());
  for (int py = 0; py < ph; ++py) {
    for (int px = 0; px < pw; ++px) {
      double mu = 0.0;
      for (int y = 0; y < patch_px; ++y)
        for (int x = 0; x < patch_px; ++x)
          mu += rendered.at(py * patch_px + y, px * patch_px + x);
      mu /= n_px;
      double var = 0.0;
      for (int y = 0; y < patch_px; ++y)
        for (int x = 0; x < patch_px; ++x) {
          const double v = rendered.at(py * patch_px + y, px * patch_px + x) - mu;
          centered[y * patch_px + x] = v;
          var += v * v;
        }
      var /= n_px;
      const double sd = std::sqrt(var);
      const double inv_s = 1.0 / (sd + eps);

      double patch_sum = 0.0;
      double dot_dc = 0.0;  // sum_j diff_j * centered_j, for the std chain
      double sum_d = 0.0;
      for (int y = 0; y < patch_px; ++y)
        for (int x = 0; x < patch_px; ++x) {
          const double on = centered[y * patch_px + x] * inv_s;
          const double dv = on - rn.at(py * patch_px + y, px * patch_px + x);
          diff[y * patch_px + x] = dv;
          patch_sum += dv * dv;
          dot_dc += dv * centered[y * patch_px + x];
          sum_d += dv;
        }
      total += patch_sum;
      if (per_patch) per_patch->at(py, px) = patch_sum / n_px;

      if (g_rendered) {
        // d(on_j)/d(v_i) = (delta_ij - 1/n)/(s+eps)
        //                - centered_j * centered_i / (n * s * (s+eps)^2)
        const double std_chain =
            sd > 1e-12 ? dot_dc * inv_s * inv_s / (n_px * sd) : 0.0;
        for (int y = 0; y < patch_px; ++y)
          for (int x = 0; x < patch_px; ++x) {
            const double gi = 2.0 / n_all *
                              ((diff[y * patch_px + x] - sum_d / n_px) * inv_s -
                               std_chain * centered[y * patch_px + x]);
            g_rendered->at(py * patch_px + y, px * patch_px + x) = gi;
          }
      }
    }
  }
  return total / n_all;
}

LossReport total_loss(const LossParts& parts, const LossWeights& weights,
                      int t, double omega, int depth_warmup) {
  LossReport r;
  r.l_color = parts.l_color;
  r.omega = omega;
  r.patch_losses = parts.patch_losses;
  if (t > depth_warmup) {
    r.l_g = parts.l_g;
    r.l_l = parts.l_l;
    r.l_depth = r.l_g + weights.lambda * r.l_l;
    r.l_rdg = parts.l_rdg;
  }
  r.total = r.l_color + r.l_depth + r.omega * r.l_rdg;
  return r;
}

Metrics compute_metrics(const ImageBuffer& rendered, const ImageBuffer& target,
                        const DepthMap& depth, const DepthMap& depth_gt) {
  Metrics m;
  if (!rendered.same_shape(target)) throw ShapeMismatch("metrics: image shape mismatch");
  double mse = 0.0;
  for (size_t i = 0; i < rendered.size(); ++i) {
    const double d = rendered.data()[i] - target.data()[i];
    mse += d * d;
  }
  mse /= static_cast<double>(rendered.size());
  m.psnr = mse < 1e-10 ? 99.0 : -10.0 * std::log10(mse);
  m.ssim = ssim(rendered, target);

  if (!depth.same_shape(depth_gt)) throw ShapeMismatch("metrics: depth shape mismatch");
  double se = 0.0;
  for (size_t i = 0; i < depth.size(); ++i) {
    const double d = depth.data()[i] - depth_gt.data()[i];
    se += d * d;
  }
  m.rmse = std::sqrt(se / static_cast<double>(depth.size()));
  return m;
}

double affine_aligned_rmse(const DepthMap& x, const DepthMap& y) {
  if (!x.same_shape(y)) throw ShapeMismatch("affine_aligned_rmse: shape mismatch");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x.data()[i];
    my += y.data()[i];
  }
  mx /= n;
  my /= n;
  double cov = 0.0, var = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    cov += (x.data()[i] - mx) * (y.data()[i] - my);
    var += (x.data()[i] - mx) * (x.data()[i] - mx);
  }
  const double a = var > 1e-12 ? cov / var : 0.0;
  const double b = my - a * mx;
  double se = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double d = a * x.data()[i] + b - y.data()[i];
    se += d * d;
  }
  return std::sqrt(se / n);
}

}  // namespace rdg

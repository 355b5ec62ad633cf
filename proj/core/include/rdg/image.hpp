// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cassert>
#include <cstddef>
#include <vector>

namespace rdg {

/// Dense single-channel float raster, row-major, origin at the top-left.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int height, int width, double fill = 0.0)
      : height_(height), width_(width),
        data_(static_cast<size_t>(height) * width, fill) {}

  int height() const { return height_; }
  int width() const { return width_; }
  bool empty() const { return data_.empty(); }
  size_t size() const { return data_.size(); }

  double& at(int y, int x) {
    assert(y >= 0 && y < height_ && x >= 0 && x < width_);
    return data_[static_cast<size_t>(y) * width_ + x];
  }
  double at(int y, int x) const {
    assert(y >= 0 && y < height_ && x >= 0 && x < width_);
    return data_[static_cast<size_t>(y) * width_ + x];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const DepthMap& o) const {
    return height_ == o.height_ && width_ == o.width_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

/// Dense 3-channel (RGB, interleaved) float raster, row-major.
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int height, int width, double fill = 0.0)
      : height_(height), width_(width),
        data_(static_cast<size_t>(height) * width * 3, fill) {}

  int height() const { return height_; }
  int width() const { return width_; }
  bool empty() const { return data_.empty(); }
  size_t size() const { return data_.size(); }

  double& at(int y, int x, int c) {
    assert(y >= 0 && y < height_ && x >= 0 && x < width_ && c >= 0 && c < 3);
    return data_[(static_cast<size_t>(y) * width_ + x) * 3 + c];
  }
  double at(int y, int x, int c) const {
    assert(y >= 0 && y < height_ && x >= 0 && x < width_ && c >= 0 && c < 3);
    return data_[(static_cast<size_t>(y) * width_ + x) * 3 + c];
  }

  Eigen::Vector3d pixel(int y, int x) const {
    return {at(y, x, 0), at(y, x, 1), at(y, x, 2)};
  }
  void set_pixel(int y, int x, const Eigen::Vector3d& v) {
    at(y, x, 0) = v.x();
    at(y, x, 1) = v.y();
    at(y, x, 2) = v.z();
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const ImageBuffer& o) const {
    return height_ == o.height_ && width_ == o.width_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

/// Rec.601 luma, optionally rescaled.
inline DepthMap luminance(const ImageBuffer& img, double scale = 1.0) {
  DepthMap y(img.height(), img.width());
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c)
      y.at(r, c) = scale * (kLumaR * img.at(r, c, 0) + kLumaG * img.at(r, c, 1) +
                            kLumaB * img.at(r, c, 2));
  return y;
}

/// Central-difference gradients with replicate-padded borders; outputs keep
/// the input shape. At a border the clamped neighbor coincides with the
/// pixel itself, so the stencil degenerates to a half-width one-sided diff.
inline void central_gradients(const DepthMap& m, DepthMap& gx, DepthMap& gy) {
  const int h = m.height(), w = m.width();
  gx = DepthMap(h, w);
  gy = DepthMap(h, w);
  for (int y = 0; y < h; ++y) {
    const int yn = y > 0 ? y - 1 : 0;
    const int ys = y < h - 1 ? y + 1 : h - 1;
    for (int x = 0; x < w; ++x) {
      const int xw = x > 0 ? x - 1 : 0;
      const int xe = x < w - 1 ? x + 1 : w - 1;
      gx.at(y, x) = 0.5 * (m.at(y, xe) - m.at(y, xw));
      gy.at(y, x) = 0.5 * (m.at(ys, x) - m.at(yn, x));
    }
  }
}

}  // namespace rdg

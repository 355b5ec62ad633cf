// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace rdgtest {

/// Central-difference gradient of a scalar function of a parameter vector.
inline std::vector<double> central_difference(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> params, double h) {
  std::vector<double> grad(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    const double orig = params[i];
    params[i] = orig + h;
    const double fp = f(params);
    params[i] = orig - h;
    const double fm = f(params);
    params[i] = orig;
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

inline double rel_error_l2(const std::vector<double>& analytic,
                           const std::vector<double>& reference) {
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < analytic.size(); ++i) {
    const double d = analytic[i] - reference[i];
    num += d * d;
    den += reference[i] * reference[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

}  // namespace rdgtest

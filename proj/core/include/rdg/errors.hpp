// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace rdg {

/// Raster or tensor arguments whose dimensions disagree.
class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A gradient tape replayed against a Gaussian set that was densified or
/// pruned after the corresponding forward pass.
class TapeMismatch : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A loss became NaN or infinite during training; carries the step at which
/// the run aborted.
class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(int step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_ = -1;
};

/// Filesystem failures (unreadable input, unwritable output, bad magic).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A JSON document missing required fields or holding values of the wrong
/// type; the message names the offending field.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input rasters to a command whose resolutions do not match.
class ResolutionMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rdg

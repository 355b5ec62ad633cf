// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <rdg/depth_refiner.hpp>
#include <vector>

namespace rdgtest {

struct BruteForceResult {
  double min_energy = 0.0;
  std::vector<int> labels;
  long long nodes_visited = 0;
};

/// Exact global minimum of the refinement energy by exhaustive search over
/// all label_count^pixels assignments (branch-and-bound with an admissible
/// bound; every energy term is non-negative). Only sensible for tiny grids.
BruteForceResult brute_force_min_energy(const rdg::EnergyModel& model);

}  // namespace rdgtest

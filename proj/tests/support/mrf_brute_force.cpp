// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#include "support/mrf_brute_force.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace rdgtest {

BruteForceResult brute_force_min_energy(const rdg::EnergyModel& model) {
  const int h = model.height(), w = model.width();
  const int npx = h * w;
  const int l = model.label_count();
  if (npx > 12) throw std::invalid_argument("brute force limited to <= 12 pixels");

  // Pixel i's term depends on the labels of i and its clamped 4-neighbors.
  std::vector<std::vector<int>> deps(npx);
  for (int i = 0; i < npx; ++i) {
    const int y = i / w, x = i % w;
    std::vector<int> d = {i,
                          y * w + std::min(w - 1, x + 1),
                          y * w + std::max(0, x - 1),
                          std::min(h - 1, y + 1) * w + x,
                          std::max(0, y - 1) * w + x};
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end()), d.end());
    deps[i] = d;
  }

  // Tabulate each pixel term over every combination of its dependencies.
  std::vector<std::vector<double>> tables(npx);
  std::vector<double> table_min(npx);
  {
    std::vector<int> scratch(npx, 0);
    for (int i = 0; i < npx; ++i) {
      const auto& d = deps[i];
      size_t size = 1;
      for (size_t k = 0; k < d.size(); ++k) size *= l;
      tables[i].resize(size);
      std::vector<int> combo(d.size(), 0);
      for (size_t idx = 0; idx < size; ++idx) {
        for (size_t k = 0; k < d.size(); ++k) scratch[d[k]] = combo[k];
        tables[i][idx] = model.pixel_term(i, scratch);
        for (size_t k = 0; k < d.size(); ++k) {
          if (++combo[k] < l) break;
          combo[k] = 0;
        }
      }
      table_min[i] = *std::min_element(tables[i].begin(), tables[i].end());
    }
  }

  struct Pair {
    int i, j;
    double weight;
  };
  std::vector<Pair> pairs;
  for (int i = 0; i < npx; ++i) {
    const int y = i / w, x = i % w;
    for (size_t o = 0; o < model.half_offsets().size(); ++o) {
      const double wgt = model.pair_weight(i, static_cast<int>(o));
      if (wgt == 0.0) continue;
      const auto [dy, dx] = model.half_offsets()[o];
      pairs.push_back({i, (y + dy) * w + (x + dx), wgt});
    }
  }

  // Assign pixels in raster order; a term enters the partial sum at the
  // depth where its last dependency gets a label.
  std::vector<std::vector<int>> pixel_terms_at(npx), pairs_at(npx);
  for (int i = 0; i < npx; ++i) pixel_terms_at[deps[i].back()].push_back(i);
  for (size_t p = 0; p < pairs.size(); ++p)
    pairs_at[std::max(pairs[p].i, pairs[p].j)].push_back(static_cast<int>(p));

  // Admissible bound on everything not yet counted (pairs are >= 0).
  std::vector<double> bound_after(npx + 1, 0.0);
  for (int k = npx - 1; k >= 0; --k) {
    bound_after[k] = bound_after[k + 1];
    for (int i : pixel_terms_at[k]) bound_after[k] += table_min[i];
  }
  // bound_after[k] covers terms entering at depths >= k.

  BruteForceResult result;
  // Seed the incumbent with coordinate descent from the coarse labeling.
  std::vector<int> labels(npx);
  for (int i = 0; i < npx; ++i) labels[i] = model.coarse_label(i);
  model.run_icm(labels, 100);
  result.min_energy = model.total_energy(labels);
  result.labels = labels;

  std::vector<int> assign(npx, 0);
  const std::function<void(int, double)> dfs = [&](int k, double partial) {
    ++result.nodes_visited;
    if (k == npx) {
      if (partial < result.min_energy) {
        result.min_energy = partial;
        result.labels = assign;
      }
      return;
    }
    for (int c = 0; c < l; ++c) {
      assign[k] = c;
      double added = 0.0;
      for (int i : pixel_terms_at[k]) {
        size_t idx = 0, stride = 1;
        for (int dep : deps[i]) {
          idx += static_cast<size_t>(assign[dep]) * stride;
          stride *= l;
        }
        added += tables[i][idx];
      }
      for (int p : pairs_at[k])
        added += pairs[p].weight * model.pair_depth_factor(assign[pairs[p].i],
                                                           assign[pairs[p].j]);
      const double e = partial + added;
      if (e + bound_after[k + 1] < result.min_energy) dfs(k + 1, e);
    }
  };
  dfs(0, 0.0);
  return result;
}

}  // namespace rdgtest

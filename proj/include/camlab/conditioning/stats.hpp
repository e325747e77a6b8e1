// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "camlab/instance/graph.hpp"

namespace camlab::cond {

inline constexpr std::size_t kStatsBaseDim = 7;

/// Graph-level geometric statistics in a fixed order:
/// [n / max_n, mean dist, std dist, feasible fraction, mean/min/max
/// feasibility degree / (n−1), edge density?, t/T?].
inline std::vector<double> stats_features(const Coords& coords, double d, std::size_t max_n,
                                          std::optional<double> edge_density = std::nullopt,
                                          std::optional<double> t_over_T = std::nullopt) {
  const std::size_t n = coords.size();
  if (n == 0) throw ValidationError("stats_features: empty coordinate set");
  std::vector<std::size_t> fdeg(n, 0);
  double sum = 0.0, sum_sq = 0.0;
  std::size_t pairs = 0, feasible = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double len = euclid(coords[i], coords[j]);
      sum += len;
      sum_sq += len * len;
      ++pairs;
      if (len <= d) {
        ++feasible;
        ++fdeg[i];
        ++fdeg[j];
      }
    }
  const double p = static_cast<double>(pairs);
  const double mean = pairs ? sum / p : 0.0;
  const double var = pairs ? std::max(0.0, sum_sq / p - mean * mean) : 0.0;
  const double norm = n > 1 ? static_cast<double>(n - 1) : 1.0;
  double dmean = 0.0;
  std::size_t dmin = fdeg[0], dmax = fdeg[0];
  for (auto v : fdeg) {
    dmean += static_cast<double>(v);
    dmin = std::min(dmin, v);
    dmax = std::max(dmax, v);
  }
  dmean /= static_cast<double>(n);

  std::vector<double> out{static_cast<double>(n) / static_cast<double>(std::max(max_n, n)),
                          mean,
                          std::sqrt(var),
                          pairs ? static_cast<double>(feasible) / p : 0.0,
                          dmean / norm,
                          static_cast<double>(dmin) / norm,
                          static_cast<double>(dmax) / norm};
  if (edge_density) out.push_back(*edge_density);
  if (t_over_T) out.push_back(*t_over_T);
  return out;
}

}  // namespace camlab::cond

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "camlab/instance/graph.hpp"

namespace camlab::cond {

struct LaplacianFeatures {
  std::vector<double> eigenvalues;  // p smallest, ascending
  std::vector<double> node_pe;      // n×p, row-major
};

/// Spectrum of D − A. Each eigenvector's sign is fixed so that its
/// largest-magnitude entry (first one on ties) is positive.
inline LaplacianFeatures laplacian_features(const Adjacency& adj, std::size_t p) {
  const std::size_t n = adj.size();
  if (p > n) throw ValidationError("laplacian_features: p = " + std::to_string(p) + " exceeds n = " + std::to_string(n));
  if (!adj.is_symmetric()) throw ValidationError("laplacian_features: adjacency is not symmetric");
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && adj(i, j)) {
        lap(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = -1.0;
        lap(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += 1.0;
      }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
  if (solver.info() != Eigen::Success) throw NumericError("laplacian_features: eigendecomposition failed");

  LaplacianFeatures out;
  out.eigenvalues.resize(p);
  out.node_pe.assign(n * p, 0.0);
  for (std::size_t c = 0; c < p; ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    out.eigenvalues[c] = solver.eigenvalues()(col);
    Eigen::Index arg = 0;
    for (Eigen::Index r = 1; r < static_cast<Eigen::Index>(n); ++r)
      if (std::abs(solver.eigenvectors()(r, col)) > std::abs(solver.eigenvectors()(arg, col)) + 1e-12) arg = r;
    const double sign = solver.eigenvectors()(arg, col) < 0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < n; ++r)
      out.node_pe[r * p + c] = sign * solver.eigenvectors()(static_cast<Eigen::Index>(r), col);
  }
  return out;
}

}  // namespace camlab::cond

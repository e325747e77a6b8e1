// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "camlab/autodiff/ops.hpp"
#include "camlab/instance/graph.hpp"

namespace camlab::models {

using ad::Tensor;

/// Flat indices i·n + j of the strict upper triangle, row-major.
inline std::vector<std::size_t> upper_indices(std::size_t n) {
  std::vector<std::size_t> idx;
  idx.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) idx.push_back(i * n + j);
  return idx;
}

inline Tensor upper_entries(const Tensor& m) { return ad::gather(m, upper_indices(m.rows())); }

inline Tensor upper_labels(const Adjacency& a) {
  const std::size_t n = a.size();
  std::vector<double> v;
  v.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) v.push_back(a(i, j) ? 1.0 : 0.0);
  const std::size_t len = v.size();
  return Tensor({len, 1}, std::move(v));
}

/// Mean BCE over the strict upper triangle. A single node has no pairs and
/// contributes a constant zero.
inline Tensor edge_bce(const Tensor& prob, const Adjacency& label) {
  if (prob.rows() < 2) return Tensor::scalar(0.0);
  return ad::bce_loss(upper_entries(prob), upper_labels(label));
}

/// mean(max(0, margin − |p − m|)) over the strict upper triangle.
inline Tensor mean_repulsive(const Tensor& prob, double mean, double margin) {
  if (prob.rows() < 2) return Tensor::scalar(0.0);
  auto dev = ad::add_scalar(upper_entries(prob), -mean);
  auto abs_dev = ad::add(ad::relu(dev), ad::relu(ad::scale(dev, -1.0)));
  return ad::mean(ad::relu(ad::add_scalar(ad::scale(abs_dev, -1.0), margin)));
}

/// KL(N(μ, diag(e^lv)) ‖ N(0, I)) = ½ Σ (μ² + e^lv − 1 − lv).
inline Tensor kl_divergence(const Tensor& mu, const Tensor& log_var) {
  auto terms = ad::sub(ad::add(ad::square(mu), ad::exp(log_var)), ad::add_scalar(log_var, 1.0));
  return ad::scale(ad::sum(terms), 0.5);
}

}  // namespace camlab::models

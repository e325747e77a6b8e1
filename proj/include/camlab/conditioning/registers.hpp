// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <numeric>
#include <vector>

#include "camlab/autodiff/ops.hpp"

namespace camlab::cond {

using ad::Tensor;

/// Appends register rows after the n node rows.
inline Tensor register_tokens(const Tensor& h, const Tensor& registers) { return ad::concat_rows({h, registers}); }

/// Keeps the first n rows.
inline Tensor strip_registers(const Tensor& h, std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return ad::gather_rows(h, std::move(idx));
}

/// Expands n² real edge rows to (n+r)² rows; any pair touching a register
/// takes the shared learned `register_edge` row.
inline Tensor register_edges(const Tensor& e, const Tensor& register_edge, std::size_t n, std::size_t r) {
  const std::size_t total = n + r;
  std::vector<std::size_t> idx(total * total);
  for (std::size_t i = 0; i < total; ++i)
    for (std::size_t j = 0; j < total; ++j) idx[i * total + j] = (i < n && j < n) ? i * n + j : n * n;
  return ad::gather_rows(ad::concat_rows({e, register_edge}), std::move(idx));
}

/// Inverse of register_edges on the real block.
inline Tensor strip_register_edges(const Tensor& e, std::size_t n, std::size_t r) {
  const std::size_t total = n + r;
  std::vector<std::size_t> idx;
  idx.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) idx.push_back(i * total + j);
  return ad::gather_rows(e, std::move(idx));
}

}  // namespace camlab::cond

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "camlab/autodiff/ops.hpp"
#include "camlab/autodiff/params.hpp"

namespace camlab::cond {

using ad::Tensor;

/// gamma/beta either as a single shared row (broadcast to every node) or with
/// one row per modulated item.
struct ModulationParams {
  Tensor gamma;
  Tensor beta;
};

/// Affine maps from a conditioning vector of width `in` to (gamma, beta) of
/// width `out`.
struct FilmHead {
  Tensor w_gamma, b_gamma, w_beta, b_beta;

  /// Identity initialization: W = 0, b_gamma = 1, b_beta = 0.
  static FilmHead create(ad::ParamStore& ps, const std::string& prefix, std::size_t in, std::size_t out) {
    return {ps.create(prefix + "/w_gamma", {in, out}, ad::Init::Zeros),
            ps.create(prefix + "/b_gamma", {out}, ad::Init::Ones),
            ps.create(prefix + "/w_beta", {in, out}, ad::Init::Zeros),
            ps.create(prefix + "/b_beta", {out}, ad::Init::Zeros)};
  }

  static FilmHead bind(const ad::ParamStore& ps, const std::string& prefix) {
    return {ps.get(prefix + "/w_gamma"), ps.get(prefix + "/b_gamma"), ps.get(prefix + "/w_beta"),
            ps.get(prefix + "/b_beta")};
  }
};

/// gamma = c·W_gamma + b_gamma, beta = c·W_beta + b_beta, row by row.
inline ModulationParams film_params(const Tensor& cond, const FilmHead& head) {
  return {ad::linear(cond, head.w_gamma, head.b_gamma), ad::linear(cond, head.w_beta, head.b_beta)};
}

/// gamma ⊙ h + beta.
inline Tensor film_apply(const Tensor& h, const ModulationParams& mod) {
  if (mod.gamma.rows() != mod.beta.rows() || mod.gamma.cols() != mod.beta.cols())
    throw DimensionError("film_apply: gamma " + ad::shape_str(mod.gamma.shape()) + " and beta " +
                         ad::shape_str(mod.beta.shape()) + " differ");
  if (mod.gamma.cols() != h.cols())
    throw DimensionError("film_apply: modulation width " + ad::shape_str(mod.gamma.shape()) + " does not fit " +
                         ad::shape_str(h.shape()));
  if (mod.gamma.rows() == 1 && h.rows() != 1) return ad::add_row(ad::mul_row(h, mod.gamma), mod.beta);
  if (mod.gamma.rows() != h.rows())
    throw DimensionError("film_apply: " + ad::shape_str(mod.gamma.shape()) + " rows do not match " +
                         ad::shape_str(h.shape()));
  return ad::add(ad::mul(h, mod.gamma), mod.beta);
}

}  // namespace camlab::cond

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "camlab/core/error.hpp"
#include "camlab/core/rng.hpp"
#include "camlab/instance/graph.hpp"

namespace camlab::diffusion {

/// 2×2 matrices over the edge states (absent = 0, present = 1).
using Kernel = std::array<std::array<double, 2>, 2>;
using StateDist = std::array<double, 2>;

struct DiffusionSchedule {
  int T = 200;
  double s = 0.008;
  std::vector<double> alpha_bar;  // ᾱ⁰..ᾱ^T
  double m = 0.5;

  double beta_bar(int t) const { return 1.0 - alpha_bar.at(static_cast<std::size_t>(t)); }
  /// Single-step retention α^t = ᾱ^t / ᾱ^{t−1}.
  double alpha(int t) const {
    return alpha_bar.at(static_cast<std::size_t>(t)) / alpha_bar.at(static_cast<std::size_t>(t - 1));
  }
};

/// ᾱ^t = cos(0.5π (t/T + s) / (1 + s))².
inline DiffusionSchedule build_schedule(int T, double s, double m) {
  if (T < 1) throw ValidationError("diffusion horizon T must be at least 1, got " + std::to_string(T));
  if (!(s > 0.0)) throw ValidationError("schedule offset s must be positive");
  if (!(m > 0.0 && m < 1.0)) throw ValidationError("edge marginal m must lie in (0, 1), got " + std::to_string(m));
  DiffusionSchedule out{T, s, {}, m};
  out.alpha_bar.resize(static_cast<std::size_t>(T) + 1);
  for (int t = 0; t <= T; ++t) {
    const double c = std::cos(0.5 * std::numbers::pi * (static_cast<double>(t) / T + s) / (1.0 + s));
    out.alpha_bar[static_cast<std::size_t>(t)] = c * c;
  }
  return out;
}

/// r·I + (1 − r)·M where every row of M is the marginal [1 − m, m].
inline Kernel mix_kernel(double r, double m) {
  return {{{r + (1.0 - r) * (1.0 - m), (1.0 - r) * m}, {(1.0 - r) * (1.0 - m), r + (1.0 - r) * m}}};
}

/// Cumulative kernel Q̄^t.
inline Kernel q_bar(const DiffusionSchedule& sc, int t) {
  if (t < 0 || t > sc.T) throw ContractError("q_bar step out of range");
  return mix_kernel(sc.alpha_bar[static_cast<std::size_t>(t)], sc.m);
}

/// Single-step kernel Q^t. M is idempotent and absorbs any stochastic matrix
/// from the left, so Q̄^{t−1}·Q^t = ᾱ^{t−1}α^t I + (1 − ᾱ^{t−1}α^t) M = Q̄^t.
inline Kernel q_step(const DiffusionSchedule& sc, int t) {
  if (t < 1 || t > sc.T) throw ContractError("q_step needs 1 ≤ t ≤ T");
  return mix_kernel(sc.alpha(t), sc.m);
}

/// q(e^{t−1} | e⁰, e^t) ∝ Q^t[e^{t−1}, e^t] · Q̄^{t−1}[e⁰, e^{t−1}].
inline StateDist posterior(int e_t, int e0, const DiffusionSchedule& sc, int t) {
  const Kernel step = q_step(sc, t);
  const Kernel cum = q_bar(sc, t - 1);
  StateDist p{step[0][e_t] * cum[e0][0], step[1][e_t] * cum[e0][1]};
  const double z = p[0] + p[1];
  if (!(z > 0.0) || !std::isfinite(z)) throw NumericError("posterior normalizer is zero at t = " + std::to_string(t));
  return {p[0] / z, p[1] / z};
}

/// Samples e^t ~ Cat(Q̄^t[e⁰]) per upper-triangle entry and mirrors it.
inline Adjacency forward_noise(const Adjacency& label, const DiffusionSchedule& sc, int t, Rng& rng) {
  const Kernel q = q_bar(sc, t);
  const std::size_t n = label.size();
  Adjacency out(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) out.set(i, j, rng.uniform() < q[label(i, j) ? 1 : 0][1]);
  return out;
}

}  // namespace camlab::diffusion

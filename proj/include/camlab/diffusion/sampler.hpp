// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <vector>

#include "camlab/diffusion/schedule.hpp"
#include "camlab/models/training.hpp"

namespace camlab::diffusion {

using models::Tensor;

/// Per-edge P(e⁰ = 1 | G^t) as a row-major n×n matrix.
using EdgePredictor = std::function<std::vector<double>(const Adjacency& e_t, int t)>;

/// Uniform draw for entry (i, j), i < j, of the state e^k being sampled.
/// Entries are visited in row-major upper-triangle order for each k.
using EntryNoise = std::function<double(int k, std::size_t i, std::size_t j)>;

inline EntryNoise sequential_noise(Rng& rng) {
  return [&rng](int, std::size_t, std::size_t) { return rng.uniform(); };
}

struct SamplerOptions {
  bool sample_final = false;  // sample e⁰ instead of thresholding its expectation at 0.5
};

inline models::GraphInput noisy_input(const Coords& coords, double d, const Adjacency& e_t, int t, int T) {
  return {coords, d, e_t, static_cast<double>(t) / T, {}};
}

/// Denoiser that runs a noisy-edge model on (coords, e^t, t/T).
inline EdgePredictor model_predictor(const models::LinkPredictor& model, const Coords& coords, double d, int T) {
  return [&model, &coords, d, T](const Adjacency& e_t, int t) {
    return model.forward(noisy_input(coords, d, e_t, t, T)).prob.values();
  };
}

/// Reverse chain: e^T ~ Bernoulli(m), then for t = T..1 each entry draws
/// e^{t−1} from Σ_{e⁰} q(e^{t−1} | e⁰, e^t) p̂(e⁰ | G^t).
inline Adjacency sample_reverse(std::size_t n, const EdgePredictor& predict, const DiffusionSchedule& sc,
                                const EntryNoise& noise, const SamplerOptions& opts = {}) {
  Adjacency e(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) e.set(i, j, noise(sc.T, i, j) < sc.m);
  for (int t = sc.T; t >= 1; --t) {
    const auto p0 = predict(e, t);
    if (p0.size() != n * n) throw DimensionError("denoiser returned a matrix of the wrong size");
    const StateDist from_absent[2] = {posterior(0, 0, sc, t), posterior(0, 1, sc, t)};
    const StateDist from_present[2] = {posterior(1, 0, sc, t), posterior(1, 1, sc, t)};
    Adjacency next(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const StateDist* post = e(i, j) ? from_present : from_absent;
        const double p1 = p0[i * n + j];
        const double on = (1.0 - p1) * post[0][1] + p1 * post[1][1];
        const bool bit = (t == 1 && !opts.sample_final) ? on > 0.5 : noise(t - 1, i, j) < on;
        next.set(i, j, bit);
      }
    e = std::move(next);
  }
  return e;
}

inline Adjacency sample_reverse(const models::LinkPredictor& model, const Coords& coords, double d,
                                const DiffusionSchedule& sc, Rng& rng, const SamplerOptions& opts = {}) {
  return sample_reverse(coords.size(), model_predictor(model, coords, d, sc.T), sc, sequential_noise(rng), opts);
}

/// CE between the predicted e⁰ and the label at a uniformly drawn t ∈ [1, T].
inline models::StepFn diffusion_step(const models::LinkPredictor& model, const DiffusionSchedule& sc) {
  if (!model.config().noisy_edges) throw ConfigError("diffusion training needs a noisy-edge model");
  return [&model, &sc](const Instance& inst, Rng& rng) {
    const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(sc.T)));
    const auto e_t = forward_noise(inst.label, sc, t, rng);
    auto pred = model.forward(noisy_input(inst.coords, inst.d, e_t, t, sc.T));
    return models::StepOutput{models::edge_bce(pred.prob, inst.label), pred.prob};
  };
}

/// One reverse sample per instance. Instance i uses derive_seed(seed, i), so
/// the result does not depend on the worker count.
inline std::vector<Adjacency> sample_dataset(const models::ModelConfig& cfg, const ad::ParamStore& trained,
                                             const std::vector<Instance>& data, const DiffusionSchedule& sc,
                                             std::uint64_t seed, int workers = 1, const SamplerOptions& opts = {}) {
  std::vector<Adjacency> out(data.size());
  models::with_replicas<models::LinkPredictor>(
      trained, data.size(), workers,
      [&](ad::ParamStore& ps) { return std::make_unique<models::LinkPredictor>(cfg, ps); },
      [&](const models::LinkPredictor& m, std::size_t i) {
        Rng rng(derive_seed(seed, i));
        out[i] = sample_reverse(m, data[i].coords, data[i].d, sc, rng, opts);
      });
  return out;
}

}  // namespace camlab::diffusion

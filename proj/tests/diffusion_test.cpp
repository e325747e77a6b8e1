// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <gtest/gtest.h>

#include "camlab/diffusion/sampler.hpp"
#include "support/models.hpp"
#include "support/perm.hpp"

using namespace camlab;
using namespace camlab::diffusion;
using camlab::testing::perturb_params;
using camlab::testing::random_perm;
using camlab::testing::tiny_config;

namespace {

std::vector<double> oracle_probs(const Adjacency& label) {
  const std::size_t n = label.size();
  std::vector<double> p(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) p[i * n + j] = label(i, j) ? 1.0 : 0.0;
  return p;
}

Kernel matmul2(const Kernel& a, const Kernel& b) {
  Kernel c{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
  return c;
}

/// Keyed noise: the draw for entry {i, j} of state k depends only on the
/// unordered pair and k.
double keyed_uniform(std::uint64_t seed, std::size_t n, int k, std::size_t i, std::size_t j) {
  const std::size_t a = std::min(i, j), b = std::max(i, j);
  Rng r(derive_seed(seed, static_cast<std::uint64_t>(k) * n * n + a * n + b));
  return r.uniform();
}

models::ModelConfig noisy_gt(cond::Mode mode) {
  auto cfg = tiny_config(models::Family::GraphTransformer, mode);
  cfg.noisy_edges = true;
  return cfg;
}

}  // namespace

TEST(Schedule, EndpointsAndMonotonicity) {
  auto sc = build_schedule(200, 0.008, 0.3);
  const long double c0 = std::cos(0.5L * 3.14159265358979323846L * 0.008L / 1.008L);
  EXPECT_NEAR(sc.alpha_bar[0], static_cast<double>(c0 * c0), 1e-15);
  EXPECT_NEAR(sc.alpha_bar[0], 0.99984, 1e-5);
  EXPECT_GE(sc.alpha_bar[0], 0.999);
  EXPECT_LE(sc.alpha_bar[200], 1e-12);
  auto big = build_schedule(1000, 0.008, 0.3);
  for (int t = 1; t <= 1000; ++t) ASSERT_LT(big.alpha_bar[t], big.alpha_bar[t - 1]) << t;
}

TEST(Schedule, RejectsInvalidRanges) {
  EXPECT_THROW(build_schedule(0, 0.008, 0.3), ValidationError);
  EXPECT_THROW(build_schedule(10, 0.0, 0.3), ValidationError);
  EXPECT_THROW(build_schedule(10, 0.008, 0.0), ValidationError);
  EXPECT_THROW(build_schedule(10, 0.008, 1.0), ValidationError);
}

TEST(Kernel, CumulativeRowsAndEndpoints) {
  const double m = 0.27;
  auto sc = build_schedule(200, 0.008, m);
  auto q0 = q_bar(sc, 0);
  EXPECT_NEAR(q0[0][0], 1.0, 2e-4);
  EXPECT_NEAR(q0[1][1], 1.0, 2e-4);
  auto qT = q_bar(sc, 200);
  for (int r = 0; r < 2; ++r) {
    EXPECT_NEAR(qT[r][0], 1.0 - m, 1e-12);
    EXPECT_NEAR(qT[r][1], m, 1e-12);
  }
  for (int t = 0; t <= 200; ++t) {
    auto q = q_bar(sc, t);
    for (int r = 0; r < 2; ++r) ASSERT_NEAR(q[r][0] + q[r][1], 1.0, 1e-12);
  }
}

TEST(Kernel, SingleStepComposesToCumulative) {
  auto sc = build_schedule(1000, 0.008, 0.18);
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const int t = 1 + static_cast<int>(rng.below(1000));
    auto composed = matmul2(q_bar(sc, t - 1), q_step(sc, t));
    auto direct = q_bar(sc, t);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) ASSERT_NEAR(composed[a][b], direct[a][b], 1e-10) << "t = " << t;
  }
}

TEST(Posterior, ConcentratesAtFirstStepAndNormalizes) {
  auto sc = build_schedule(1000, 0.008, 0.2);
  // A state e¹ ≠ e⁰ is itself a ~1e-4 event and its posterior is not
  // concentrated, so the check covers e¹ = e⁰ and the average over e¹.
  for (int e0 = 0; e0 < 2; ++e0) {
    EXPECT_GE(posterior(e0, e0, sc, 1)[e0], 0.999);
    const auto q1 = q_bar(sc, 1);
    const double kept = q1[e0][0] * posterior(0, e0, sc, 1)[e0] + q1[e0][1] * posterior(1, e0, sc, 1)[e0];
    EXPECT_GE(kept, 0.999);
  }
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const int t = 1 + static_cast<int>(rng.below(1000));
    auto p = posterior(static_cast<int>(rng.below(2)), static_cast<int>(rng.below(2)), sc, t);
    ASSERT_NEAR(p[0] + p[1], 1.0, 1e-12);
  }
}

TEST(Posterior, ZeroNormalizerIsNumericError) {
  auto sc = build_schedule(10, 0.008, 0.2);
  sc.m = 0.0;
  EXPECT_THROW(posterior(1, 0, sc, 3), NumericError);
}

TEST(ForwardNoise, NearIdentityAtZeroAndMarginalAtHorizon) {
  const double m = 0.23;
  auto sc = build_schedule(200, 0.008, m);
  Rng rng(3);
  const std::size_t n = 16;
  Adjacency empty(n), full(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) full.set(i, j);
  const auto q0 = q_bar(sc, 0);
  EXPECT_LE(q0[0][1], 2e-4);
  EXPECT_LE(q0[1][0], 2e-4);

  std::size_t flips = 0, entries = 0;
  for (int r = 0; r < 1000; ++r) {
    auto e = forward_noise(full, sc, 0, rng);
    ASSERT_TRUE(e.is_symmetric());
    ASSERT_FALSE(e.has_self_loops());
    flips += n * (n - 1) / 2 - e.edge_count();
    entries += n * (n - 1) / 2;
  }
  EXPECT_LE(static_cast<double>(flips) / entries, 4e-4);

  for (const auto* start : {&empty, &full}) {
    std::size_t on = 0, total = 0;
    while (total < 100000) {
      auto e = forward_noise(*start, sc, 200, rng);
      on += e.edge_count();
      total += n * (n - 1) / 2;
    }
    EXPECT_NEAR(static_cast<double>(on) / total, m, 0.02);
  }
}

TEST(Sampler, OracleRecoversLabels) {
  auto data = generate_instances(50, 8, 3, 0.45, 11);
  auto sc = build_schedule(200, 0.008, 0.25);
  std::size_t wrong = 0, total = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto probs = oracle_probs(data[i].label);
    Rng rng(derive_seed(5, i));
    auto e = sample_reverse(
        8, [&](const Adjacency&, int) { return probs; }, sc, sequential_noise(rng));
    for (std::size_t a = 0; a < 8; ++a)
      for (std::size_t b = a + 1; b < 8; ++b) {
        wrong += e(a, b) != data[i].label(a, b);
        ++total;
      }
  }
  EXPECT_LE(static_cast<double>(wrong) / total, 0.001);
}

TEST(Sampler, PermutationConsistentWithKeyedNoise) {
  auto data = generate_instances(20, 8, 3, 0.45, 12);
  auto sc = build_schedule(50, 0.008, 0.3);
  Rng rng(6);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& label = data[i].label;
    auto perm = random_perm(rng, 8);
    std::vector<std::size_t> inv(8);
    for (std::size_t a = 0; a < 8; ++a) inv[perm[a]] = a;
    const auto plabel = label.permuted(perm);
    // A denoiser that mixes the label with the current state, so every
    // intermediate draw matters.
    auto mixed = [](const Adjacency& lab) {
      return [&lab](const Adjacency& e, int) {
        const std::size_t n = lab.size();
        std::vector<double> p(n * n, 0.0);
        for (std::size_t a = 0; a < n; ++a)
          for (std::size_t b = 0; b < n; ++b)
            if (a != b) p[a * n + b] = 0.05 + 0.7 * lab(a, b) + 0.2 * e(a, b);
        return p;
      };
    };
    const std::uint64_t seed = 100 + i;
    SamplerOptions opts{true};
    auto base = sample_reverse(
        8, mixed(label), sc, [&](int k, std::size_t a, std::size_t b) { return keyed_uniform(seed, 8, k, a, b); },
        opts);
    auto moved = sample_reverse(
        8, mixed(plabel), sc,
        [&](int k, std::size_t a, std::size_t b) { return keyed_uniform(seed, 8, k, inv[a], inv[b]); }, opts);
    ASSERT_TRUE(base.permuted(perm) == moved) << "instance " << i;
  }
}

TEST(Sampler, ModelSamplesAreDeterministicAndValid) {
  auto cfg = noisy_gt(cond::Mode::Cam);
  ad::ParamStore ps(3);
  models::LinkPredictor model(cfg, ps);
  perturb_params(ps, "film", 2);
  auto sc = build_schedule(20, 0.008, 0.3);
  auto data = generate_instances(4, 7, 3, 0.45, 13);
  auto serial = sample_dataset(cfg, ps, data, sc, 9, 1);
  EXPECT_EQ(serial, sample_dataset(cfg, ps, data, sc, 9, 3));
  for (const auto& e : serial) {
    EXPECT_TRUE(e.is_symmetric());
    EXPECT_FALSE(e.has_self_loops());
  }
  Rng r1(4), r2(4);
  EXPECT_EQ(sample_reverse(model, data[0].coords, 0.45, sc, r1), sample_reverse(model, data[0].coords, 0.45, sc, r2));
}

TEST(Objective, ConstantPredictorGivesBinaryEntropy) {
  auto data = generate_instances(30, 8, 3, 0.45, 14);
  for (const auto& inst : data) {
    const double pairs = 28.0;
    const double r = static_cast<double>(inst.label.edge_count()) / pairs;
    const double h = -(r * std::log(r) + (1.0 - r) * std::log(1.0 - r));
    auto ce = models::edge_bce(ad::Tensor::full({8, 8}, r), inst.label).item();
    EXPECT_NEAR(ce, h, 1e-12);
  }
}

TEST(Objective, TimeReachesTheBareBaselineThroughFilm) {
  auto cfg = noisy_gt(cond::Mode::None);
  ad::ParamStore ps(4);
  models::LinkPredictor model(cfg, ps);
  EXPECT_TRUE(model.conditioner().has_film());
  EXPECT_EQ(model.conditioner().film_input_dim(), 1u);
  perturb_params(ps, "film", 3);
  auto inst = generate_instances(1, 6, 3, 0.45, 15)[0];
  auto a = model.forward(noisy_input(inst.coords, inst.d, inst.label, 5, 20)).prob.values();
  auto b = model.forward(noisy_input(inst.coords, inst.d, inst.label, 15, 20)).prob.values();
  EXPECT_NE(a, b);
}

TEST(Objective, TrainingLossDecreases) {
  auto data = generate_instances(500, 8, 3, 0.45, 16);
  auto cfg = noisy_gt(cond::Mode::None);
  cfg.d_model = 16;
  cfg.d_k = 8;
  ad::ParamStore ps(5);
  models::LinkPredictor model(cfg, ps);
  auto sc = build_schedule(200, 0.008, 0.25);
  models::TrainOptions opts;
  opts.batch_size = 16;
  opts.adamw.lr = 3e-3;
  opts.seed = 7;
  models::Trainer trainer(ps, opts);
  std::vector<double> losses;
  for (int e = 0; e < 5; ++e) losses.push_back(trainer.run_epoch(data, diffusion_step(model, sc)).loss);
  EXPECT_LT(losses.back(), losses.front());
  ad::ParamStore plain_ps(5);
  models::LinkPredictor plain(tiny_config(models::Family::GraphTransformer, cond::Mode::None), plain_ps);
  EXPECT_THROW(diffusion_step(plain, sc), ConfigError);
}

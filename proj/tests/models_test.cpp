// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "camlab/models/training.hpp"
#include "camlab/models/vae.hpp"
#include "support/gradcheck.hpp"
#include "support/models.hpp"
#include "support/perm.hpp"

using namespace camlab;
using namespace camlab::models;
using ad::Tensor;
using camlab::testing::gradcheck;
using camlab::testing::max_abs_diff;
using camlab::testing::permute_edge_rows;
using camlab::testing::permute_matrix;
using camlab::testing::permute_rows;
using camlab::testing::perturb_params;
using camlab::testing::random_perm;
using camlab::testing::random_projection;
using camlab::testing::random_tensor;
using camlab::testing::tiny_config;

namespace {

constexpr std::size_t D = 8, M = 2, DK = 4;

const cond::Mode kAllModes[] = {cond::Mode::None,      cond::Mode::Cam,   cond::Mode::Cam2,    cond::Mode::Stats,
                                cond::Mode::Registers, cond::Mode::Eigen, cond::Mode::CamStats};

GraphInput input(const Coords& c, double d = 0.45) { return {c, d, std::nullopt, std::nullopt, {}}; }

std::vector<Instance> small_dataset(std::size_t count, std::size_t n, std::uint64_t seed) {
  return generate_instances(count, n, 3, 0.45, seed);
}

}  // namespace

TEST(AttentionLayer, SingletonIsValueProjectionThroughOutput) {
  ad::ParamStore ps(1);
  auto b = AttentionBlock::create(ps, "a", D, M, DK);
  Rng rng(1);
  auto h = random_tensor(rng, {1, D});
  auto out = multi_head_attention(h, b.attn);
  EXPECT_EQ(out.values(), ad::matmul(ad::matmul(h, b.attn.proj.wv), b.attn.wo).values());
}

TEST(AttentionLayer, PermutationEquivariantAndGradientChecked) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    ad::ParamStore ps(static_cast<std::uint64_t>(trial));
    auto b = AttentionBlock::create(ps, "a", D, M, DK);
    const std::size_t n = 1 + rng.below(8);
    auto h = random_tensor(rng, {n, D});
    auto perm = random_perm(rng, n);
    auto a = attention_layer(h, b);
    auto p = attention_layer(permute_rows(h, perm), b);
    ASSERT_LT(max_abs_diff(permute_rows(a, perm).values(), p.values()), 1e-10);
  }
  ad::ParamStore ps(9);
  auto b = AttentionBlock::create(ps, "a", D, M, DK);
  auto h = random_tensor(rng, {4, D});
  std::vector<Tensor> leaves{h};
  for (const auto& [_, t] : ps.all()) leaves.push_back(t);
  EXPECT_LT(gradcheck(leaves, [&] { return random_projection(attention_layer(h, b), 5); }), 1e-4);
}

TEST(AttentionScoreHead, UniformForIdenticalNodesAndRowsSumToOne) {
  ad::ParamStore ps(3);
  auto one = HeadProjections::create(ps, "h1", D, 1, DK, false);
  Rng rng(3);
  auto row = random_tensor(rng, {1, D});
  auto s = attention_score_head(ad::repeat_rows(row, 5), one);
  for (double v : s.values()) EXPECT_NEAR(v, 0.2, 1e-15);

  auto multi = HeadProjections::create(ps, "h2", D, M, DK, false);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.below(10);
    auto e = attention_score_head(random_tensor(rng, {n, D}), multi);
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) sum += e.at(i, j);
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(AttentionScoreHead, PermutationConsistent) {
  ad::ParamStore ps(4);
  auto proj = HeadProjections::create(ps, "h", D, M, DK, false);
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(8);
    auto h = random_tensor(rng, {n, D});
    auto perm = random_perm(rng, n);
    auto a = attention_score_head(h, proj).values();
    auto b = attention_score_head(permute_rows(h, perm), proj).values();
    ASSERT_LT(max_abs_diff(permute_matrix(a, perm), b), 1e-12);
  }
}

TEST(GraphTransformerLayer, NeutralEdgeGateReducesToPlainAttention) {
  ad::ParamStore ps(5);
  auto b = GraphTransformerBlock::create(ps, "g", D, M, DK);
  for (auto& x : Tensor(b.we).mutable_data()) x = 0.0;
  Rng rng(5);
  auto h = random_tensor(rng, {6, D});
  auto e = random_tensor(rng, {36, D});
  auto gt = graph_transformer_attention(h, e, b).h;
  auto plain = ad::add_row(multi_head_attention(h, {b.proj, b.wo_h}), b.bo_h);
  EXPECT_EQ(gt.values(), plain.values());
}

TEST(GraphTransformerLayer, JointPermutationEquivariance) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    ad::ParamStore ps(static_cast<std::uint64_t>(100 + trial));
    auto b = GraphTransformerBlock::create(ps, "g", D, M, DK);
    const std::size_t n = 1 + rng.below(7);
    auto h = random_tensor(rng, {n, D});
    auto e = random_tensor(rng, {n * n, D});
    auto perm = random_perm(rng, n);
    auto a = graph_transformer_layer(h, e, b);
    auto p = graph_transformer_layer(permute_rows(h, perm), permute_edge_rows(e, perm), b);
    ASSERT_LT(max_abs_diff(permute_rows(a.h, perm).values(), p.h.values()), 1e-10);
    ASSERT_LT(max_abs_diff(permute_edge_rows(a.e, perm).values(), p.e.values()), 1e-10);
  }
}

TEST(GraphTransformerLayer, GradientCheckThroughOneBlock) {
  ad::ParamStore ps(7);
  auto b = GraphTransformerBlock::create(ps, "g", D, M, DK);
  Rng rng(7);
  auto h = random_tensor(rng, {3, D});
  auto e = random_tensor(rng, {9, D});
  std::vector<Tensor> leaves{h, e};
  for (const auto& [_, t] : ps.all()) leaves.push_back(t);
  auto loss = [&] {
    auto out = graph_transformer_layer(h, e, b);
    return ad::add(random_projection(out.h, 1), random_projection(out.e, 2));
  };
  EXPECT_LT(gradcheck(leaves, loss), 1e-4);
}

TEST(GtEdgeReadout, ConstantSymmetricAndInRange) {
  auto zero = gt_edge_readout(Tensor::full({9, D}, 0.7), Tensor::zeros({D, 1}), Tensor::row({0.3}), 3);
  for (double v : zero.values()) EXPECT_EQ(v, 1.0 / (1.0 + std::exp(-0.3)));

  Rng rng(8);
  auto e = random_tensor(rng, {16, D});
  std::vector<double> v(16 * D);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t c = 0; c < D; ++c) v[(i * 4 + j) * D + c] = e.at(std::min(i, j) * 4 + std::max(i, j), c);
  auto out = gt_edge_readout(Tensor({16, D}, v), random_tensor(rng, {D, 1}), random_tensor(rng, {1}), 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_EQ(out.at(i, j), out.at(j, i));
      EXPECT_GT(out.at(i, j), 0.0);
      EXPECT_LT(out.at(i, j), 1.0);
    }
}

TEST(LinkPredictor, EquivariantForEveryFamilyAndConditioner) {
  Rng rng(9);
  for (auto family : {Family::AttentionScore, Family::GraphTransformer})
    for (auto mode : kAllModes) {
      auto cfg = tiny_config(family, mode);
      ad::ParamStore ps(11);
      LinkPredictor model(cfg, ps);
      perturb_params(ps, "film", 3);
      for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 3 + rng.below(6);
        auto c = sample_coords(n, rng.below(1u << 30));
        auto perm = random_perm(rng, n);
        auto a = model.forward(input(c)).prob.values();
        auto b = model.forward(input(permute_coords(c, perm))).prob.values();
        ASSERT_LT(max_abs_diff(permute_matrix(a, perm), b), 1e-8)
            << family_name(family) << " " << cond::mode_name(mode) << " trial " << trial;
      }
    }
}

TEST(LinkPredictor, PredictionInvariants) {
  for (auto family : {Family::AttentionScore, Family::GraphTransformer}) {
    ad::ParamStore ps(12);
    LinkPredictor model(tiny_config(family, cond::Mode::Registers), ps);
    auto c = sample_coords(7, 1);
    auto out = model.forward(input(c));
    ASSERT_EQ(out.prob.rows(), 7u);
    ASSERT_EQ(out.prob.cols(), 7u);
    for (std::size_t i = 0; i < 7; ++i) {
      EXPECT_EQ(out.prob.at(i, i), 0.0);
      for (std::size_t j = 0; j < 7; ++j) {
        EXPECT_EQ(out.prob.at(i, j), out.prob.at(j, i));
        EXPECT_GE(out.prob.at(i, j), 0.0);
        EXPECT_LE(out.prob.at(i, j), 1.0);
      }
    }
  }
}

TEST(LinkPredictor, CamAtIdentityEqualsBaselineBitwise) {
  for (auto family : {Family::AttentionScore, Family::GraphTransformer}) {
    ad::ParamStore base_ps(21);
    LinkPredictor base(tiny_config(family, cond::Mode::None), base_ps);
    for (auto mode : {cond::Mode::Cam, cond::Mode::Cam2, cond::Mode::CamStats, cond::Mode::Stats}) {
      ad::ParamStore ps(21);
      LinkPredictor cam(tiny_config(family, mode), ps);
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto c = sample_coords(8, seed);
        EXPECT_EQ(base.forward(input(c)).prob.values(), cam.forward(input(c)).prob.values())
            << family_name(family) << " " << cond::mode_name(mode);
      }
    }
  }
}

TEST(LinkPredictor, FullModelGradientCheck) {
  for (auto family : {Family::AttentionScore, Family::GraphTransformer})
    for (auto mode : {cond::Mode::None, cond::Mode::Cam, cond::Mode::Cam2, cond::Mode::Registers}) {
      auto cfg = tiny_config(family, mode, family == Family::AttentionScore ? 2 : 1);
      ad::ParamStore ps(31);
      LinkPredictor model(cfg, ps);
      perturb_params(ps, "film", 4);
      auto inst = small_dataset(1, 4, 77)[0];
      std::vector<Tensor> leaves;
      for (const auto& [_, t] : ps.all()) leaves.push_back(t);
      auto loss = [&] { return edge_bce(model.forward(input_of(inst)).prob, inst.label); };
      EXPECT_LT(gradcheck(leaves, loss), 1e-4) << family_name(family) << " " << cond::mode_name(mode);
    }
}

TEST(LinkPredictor, TooManyNodesIsValidationError) {
  ad::ParamStore ps(1);
  auto cfg = tiny_config(Family::AttentionScore, cond::Mode::None);
  cfg.max_n = 5;
  LinkPredictor model(cfg, ps);
  EXPECT_THROW(model.forward(input(sample_coords(6, 1))), ValidationError);
}

TEST(ModelConfig, RejectsIndivisibleHeadsAndUnknownFamily) {
  auto cfg = tiny_config(Family::AttentionScore, cond::Mode::None);
  cfg.heads = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(parse_family("mlp"), ConfigError);
}

TEST(Losses, PerfectPredictionAndRepulsiveTerm) {
  Adjacency a(3);
  a.set(0, 1);
  auto perfect = Tensor::matrix(3, 3, {0, 1, 0, 1, 0, 0, 0, 0, 0});
  EXPECT_LT(edge_bce(perfect, a).item(), 1e-6);
  // Entries 1, 0, 0 against m = 0.2 with margin 0.3: |p − m| = 0.8, 0.2, 0.2.
  EXPECT_NEAR(mean_repulsive(perfect, 0.2, 0.3).item(), (0.0 + 0.1 + 0.1) / 3.0, 1e-15);
}

TEST(Vae, KlClosedFormAndGradient) {
  EXPECT_EQ(kl_divergence(Tensor::zeros({1, 4}), Tensor::zeros({1, 4})).item(), 0.0);
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    auto mu = random_tensor(rng, {1, 4}, true, -2, 2);
    auto lv = random_tensor(rng, {1, 4}, true, -2, 2);
    ASSERT_GE(kl_divergence(mu, lv).item(), 0.0);
  }
  auto mu = random_tensor(rng, {1, 4});
  auto lv = random_tensor(rng, {1, 4});
  EXPECT_LT(gradcheck({mu, lv}, [&] { return kl_divergence(mu, lv); }), 1e-6);
}

TEST(Vae, EncoderPermutationInvariantAndSamplingDeterministic) {
  ad::ParamStore ps(14);
  Vae vae(tiny_config(Family::GraphTransformer, cond::Mode::Cam), 3, 2, ps);
  auto data = small_dataset(10, 7, 5);
  Rng rng(14);
  for (const auto& inst : data) {
    auto perm = random_perm(rng, inst.n());
    auto a = vae.encode(inst.coords, inst.d, inst.label);
    auto b = vae.encode(permute_coords(inst.coords, perm), inst.d, inst.label.permuted(perm));
    ASSERT_EQ(a.mu.size(), 3u);
    ASSERT_EQ(a.log_var.size(), 3u);
    EXPECT_LT(max_abs_diff(a.mu.values(), b.mu.values()), 1e-10);
    EXPECT_LT(max_abs_diff(a.log_var.values(), b.log_var.values()), 1e-10);
    EXPECT_EQ(a.mu.values(), vae.encode(inst.coords, inst.d, inst.label).mu.values());
  }
  const auto& c = data[0].coords;
  auto z = Tensor::row({0.1, -0.4, 0.7});
  EXPECT_EQ(vae.decode(c, 0.45, z).prob.values(), vae.decode(c, 0.45, z).prob.values());
  Rng r1(5), r2(5);
  auto s = vae.sample(c, 0.45, r1).prob;
  EXPECT_EQ(s.values(), vae.sample(c, 0.45, r2).prob.values());
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(s.at(i, i), 0.0);
    for (std::size_t j = 0; j < c.size(); ++j) EXPECT_EQ(s.at(i, j), s.at(j, i));
  }
}

TEST(Vae, TrainingStepReachesEveryParameter) {
  ad::ParamStore ps(15);
  Vae vae(tiny_config(Family::AttentionScore, cond::Mode::None), 3, 1, ps);
  auto data = small_dataset(4, 6, 6);
  Trainer trainer(ps, {1, 4, {}, 1});
  auto log = trainer.run_epoch(data, [&](const Instance& inst, Rng& rng) {
    auto out = vae.loss(inst, rng, 1.0);
    return StepOutput{out.loss, out.pred.prob};
  });
  EXPECT_TRUE(std::isfinite(log.loss));
  for (const auto& [name, t] : ps.all()) EXPECT_TRUE(t.has_grad()) << name;
}

TEST(Training, LossDecreasesOverFirstEpochs) {
  auto data = small_dataset(500, 8, 40);
  ad::ParamStore ps(1);
  auto cfg = tiny_config(Family::AttentionScore, cond::Mode::None);
  cfg.d_model = 16;
  cfg.d_k = 8;
  LinkPredictor model(cfg, ps);
  TrainOptions opts;
  opts.batch_size = 16;
  opts.adamw.lr = 3e-3;
  opts.seed = 2;
  Trainer trainer(ps, opts);
  double prev = INFINITY;
  for (int e = 0; e < 5; ++e) {
    auto log = trainer.run_epoch(data, supervised_step(model));
    EXPECT_LT(log.loss, prev) << "epoch " << log.epoch;
    EXPECT_GE(log.variance, 0.0);
    prev = log.loss;
  }
}

TEST(Training, SeededRunsAndResumeAreIdentical) {
  auto data = small_dataset(60, 7, 41);
  auto cfg = tiny_config(Family::GraphTransformer, cond::Mode::Cam, 2);
  TrainOptions opts;
  opts.batch_size = 8;
  opts.seed = 3;
  auto run = [&](std::size_t epochs) {
    ad::ParamStore ps(5);
    LinkPredictor model(cfg, ps);
    Trainer t(ps, opts);
    std::vector<double> losses;
    for (std::size_t e = 0; e < epochs; ++e) losses.push_back(t.run_epoch(data, supervised_step(model)).loss);
    return std::make_pair(losses, t.checkpoint());
  };
  auto [full, full_ck] = run(4);
  EXPECT_EQ(full, run(4).first);

  auto [half, half_ck] = run(2);
  std::stringstream buf;
  ad::write_checkpoint(buf, half_ck);
  ad::ParamStore ps(999);
  LinkPredictor model(cfg, ps);
  Trainer resumed(ps, opts);
  resumed.restore(ad::read_checkpoint(buf));
  EXPECT_EQ(resumed.epochs_done(), 2u);
  for (std::size_t e = 2; e < 4; ++e) EXPECT_EQ(resumed.run_epoch(data, supervised_step(model)).loss, full[e]);
  for (const auto& [name, t] : full_ck) EXPECT_EQ(resumed.checkpoint().at(name).values(), t.values()) << name;
}

TEST(Training, RegisterEmbeddingsReceiveGradient) {
  auto data = small_dataset(8, 6, 42);
  for (auto family : {Family::AttentionScore, Family::GraphTransformer}) {
    ad::ParamStore ps(6);
    LinkPredictor model(tiny_config(family, cond::Mode::Registers), ps);
    Trainer t(ps, {1, 8, {}, 1});
    const auto before = ps.get("cond/registers").values();
    t.run_epoch(data, supervised_step(model));
    double norm = 0.0;
    for (double g : ps.get("cond/registers").grad()) norm += g * g;
    EXPECT_GT(norm, 0.0);
    EXPECT_NE(before, ps.get("cond/registers").values());
  }
}

TEST(Prediction, ParallelMatchesSerialAndThresholdIsTuned) {
  auto data = small_dataset(12, 8, 43);
  auto cfg = tiny_config(Family::GraphTransformer, cond::Mode::Stats);
  ad::ParamStore ps(7);
  LinkPredictor model(cfg, ps);
  perturb_params(ps, "film", 1);
  auto serial = predict_probs(cfg, ps, data, 1);
  auto parallel = predict_probs(cfg, ps, data, 3);
  EXPECT_EQ(serial, parallel);
  EXPECT_EQ(serial[0], model.forward(input_of(data[0])).prob.values());
  const double t = tune_threshold(serial, data);
  EXPECT_GE(pooled_accuracy(serial, data, t), pooled_accuracy(serial, data, 0.5));
  EXPECT_GT(zero_baseline_accuracy(data), 0.0);
}

TEST(LinkPredictor, EveryParameterReceivesGradient) {
  auto inst = small_dataset(1, 6, 44)[0];
  for (auto family : {Family::AttentionScore, Family::GraphTransformer})
    for (auto mode : kAllModes) {
      ad::ParamStore ps(8);
      LinkPredictor model(tiny_config(family, mode), ps);
      ad::backward(edge_bce(model.forward(input_of(inst)).prob, inst.label));
      for (const auto& [name, t] : ps.all())
        EXPECT_TRUE(t.has_grad()) << family_name(family) << " " << cond::mode_name(mode) << " " << name;
    }
}

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "camlab/instance/dataset.hpp"
#include "camlab/models/link_predictor.hpp"
#include "camlab/models/loss.hpp"

namespace camlab::models {

struct VaeState {
  Tensor mu, log_var, z;  // each [1×d_z]
};

struct VaeLoss {
  Tensor loss, bce, kl;
  Prediction pred;
};

/// Node-conditioned VAE: a Graph Transformer encoder over the labeled graph,
/// mean pooling of node and edge embeddings, and a decoder of either family
/// that receives z next to every node's coordinates.
class Vae {
 public:
  Vae(const ModelConfig& decoder, std::size_t latent_dim, std::size_t encoder_layers, ad::ParamStore& ps)
      : latent_(latent_dim), decoder_(with_latent(decoder, latent_dim), ps, ""),
        encoder_(encoder_config(decoder, encoder_layers), ps, "encoder/") {
    if (latent_dim == 0) throw ConfigError("vae.latent_dim must be positive");
    const std::size_t pooled = 2 * decoder.d_model;
    mu_w_ = ps.create("vae/mu/w", {pooled, latent_dim}, ad::Init::Glorot);
    mu_b_ = ps.create("vae/mu/b", {latent_dim}, ad::Init::Zeros);
    lv_w_ = ps.create("vae/log_var/w", {pooled, latent_dim}, ad::Init::Glorot);
    lv_b_ = ps.create("vae/log_var/b", {latent_dim}, ad::Init::Zeros);
  }

  std::size_t latent_dim() const { return latent_; }
  const LinkPredictor& decoder() const { return decoder_; }

  /// (μ, log σ²) from the labeled graph.
  VaeState encode(const Coords& coords, double d, const Adjacency& label) const {
    GraphInput in{coords, d, label, std::nullopt, {}};
    auto out = encoder_.forward(in);
    auto pooled = ad::concat_cols({ad::mean_rows(out.nodes), ad::mean_rows(out.edges)});
    return {ad::linear(pooled, mu_w_, mu_b_), ad::linear(pooled, lv_w_, lv_b_), {}};
  }

  Prediction decode(const Coords& coords, double d, const Tensor& z) const {
    return decoder_.forward({coords, d, std::nullopt, std::nullopt, z});
  }

  /// −ELBO with z = μ + σ⊙ε: BCE(decoder, label) + kl_weight·KL.
  VaeLoss loss(const Instance& inst, Rng& rng, double kl_weight = 1.0) const {
    auto st = encode(inst.coords, inst.d, inst.label);
    std::vector<double> eps(latent_);
    for (auto& v : eps) v = rng.normal();
    auto sigma = ad::exp(ad::scale(st.log_var, 0.5));
    auto z = ad::add(st.mu, ad::mul(sigma, Tensor({1, latent_}, std::move(eps))));
    auto pred = decode(inst.coords, inst.d, z);
    auto bce = edge_bce(pred.prob, inst.label);
    auto kl = kl_divergence(st.mu, st.log_var);
    return {ad::add(bce, ad::scale(kl, kl_weight)), bce, kl, pred};
  }

  /// Decodes with z ~ N(0, I).
  Prediction sample(const Coords& coords, double d, Rng& rng) const {
    std::vector<double> z(latent_);
    for (auto& v : z) v = rng.normal();
    return decode(coords, d, Tensor({1, latent_}, std::move(z)));
  }

 private:
  static ModelConfig with_latent(ModelConfig c, std::size_t dz) {
    c.latent_dim = dz;
    return c;
  }

  static ModelConfig encoder_config(const ModelConfig& decoder, std::size_t layers) {
    ModelConfig c = decoder;
    c.family = Family::GraphTransformer;
    c.layers = layers;
    c.conditioner = {};
    c.laplacian_pe = false;
    c.latent_dim = 0;
    c.noisy_edges = false;
    c.label_edges = true;
    c.readout = false;
    return c;
  }

  std::size_t latent_;
  LinkPredictor decoder_;
  LinkPredictor encoder_;
  Tensor mu_w_, mu_b_, lv_w_, lv_b_;
};

}  // namespace camlab::models

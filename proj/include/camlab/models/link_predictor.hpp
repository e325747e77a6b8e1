// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "camlab/models/config.hpp"
#include "camlab/models/layers.hpp"

namespace camlab::models {

/// Everything a forward pass reads about one graph.
struct GraphInput {
  Coords coords;
  double d = 0.4;
  std::optional<Adjacency> edges;  // e^t (noisy_edges) or the label (label_edges)
  std::optional<double> t_over_T;  // diffusion time
  Tensor z;                        // [1×latent_dim] when latent_dim > 0
};

struct Prediction {
  Tensor raw;    // n×n before symmetrization
  Tensor prob;   // symmetric, zero diagonal
  Tensor nodes;  // final node embeddings, registers stripped
  Tensor edges;  // final edge embeddings (GT only)
};

/// Attention-score model or Graph Transformer with an optional conditioner.
class LinkPredictor {
 public:
  LinkPredictor(const ModelConfig& cfg, ad::ParamStore& ps, const std::string& prefix = "")
      : cfg_(cfg), prefix_(prefix) {
    cfg.validate();
    const std::size_t D = cfg.d_model;
    in_w_ = ps.create(prefix + "in/node/w", {cfg.node_input_dim(), D}, ad::Init::Glorot);
    in_b_ = ps.create(prefix + "in/node/b", {D}, ad::Init::Zeros);
    const bool gt = cfg.family == Family::GraphTransformer;
    if (gt) {
      edge_w_ = ps.create(prefix + "in/edge/w", {cfg.edge_input_dim(), D}, ad::Init::Glorot);
      edge_b_ = ps.create(prefix + "in/edge/b", {D}, ad::Init::Zeros);
    }
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      const std::string p = prefix + (gt ? "gt/l" : "att/l") + std::to_string(l);
      if (gt)
        gt_blocks_.push_back(
            GraphTransformerBlock::create(ps, p, D, cfg.heads, cfg.d_k, l + 1 < cfg.layers || last_nodes()));
      else
        att_blocks_.push_back(AttentionBlock::create(ps, p, D, cfg.heads, cfg.d_k));
    }
    if (cfg.readout) {
      if (gt) {
        readout_w_ = ps.create(prefix + "gt/readout/w", {D, 1}, ad::Init::Glorot);
        readout_b_ = ps.create(prefix + "gt/readout/b", {1}, ad::Init::Zeros);
      } else {
        score_ = HeadProjections::create(ps, prefix + "att/head", D, cfg.heads, cfg.d_k, false);
      }
    }
    if (cfg.conditioner.mode != cond::Mode::None || cfg.side_dim() > 0)
      cond_ = cond::Conditioner(cfg.conditioner, {D, cfg.d_k, cfg.layers, gt, cfg.side_dim(), last_nodes()}, ps,
                                prefix + "cond");
  }

  const ModelConfig& config() const { return cfg_; }

  /// Whether the last layer's node embeddings feed anything. A GT with an
  /// edge readout only reads the last layer's edges.
  bool last_nodes() const { return cfg_.family != Family::GraphTransformer || !cfg_.readout; }
  const cond::Conditioner& conditioner() const { return cond_; }

  Prediction forward(const GraphInput& in) const {
    const std::size_t n = in.coords.size();
    if (n == 0) throw ValidationError("cannot run a model on an empty graph");
    if (n > cfg_.max_n)
      throw ValidationError("graph has " + std::to_string(n) + " nodes, model.max_n is " + std::to_string(cfg_.max_n));
    const bool gt = cfg_.family == Family::GraphTransformer;
    if ((cfg_.noisy_edges || cfg_.label_edges) && (!in.edges || in.edges->size() != n))
      throw ValidationError("model expects an n×n edge input");
    if (cfg_.noisy_edges && !in.t_over_T) throw ValidationError("model expects a diffusion time");

    auto h = ad::linear(node_features(in), in_w_, in_b_);
    cond::SideInputs side_in;
    if (cfg_.noisy_edges) {
      side_in.t_over_T = in.t_over_T;
      if (cfg_.conditioner.has_stats()) side_in.edge_density = density(*in.edges);
    }
    std::vector<double> side;
    if (cfg_.side_dim() > 0) side = cond::side_features(cfg_.conditioner, in.coords, in.d, cfg_.max_n, side_in);
    cond::CondState st = cond_.start(side);
    const std::size_t r = cond_.num_registers();
    if (r) h = cond::register_tokens(h, cond_.register_nodes());

    Prediction out;
    if (!gt) {
      for (std::size_t l = 0; l < cfg_.layers; ++l) {
        cond_.update(l, st, h, nullptr);
        h = cond_.modulate_nodes(l, st, attention_layer(h, att_blocks_[l]));
      }
      out.nodes = r ? cond::strip_registers(h, n) : h;
      if (cfg_.readout) out.raw = attention_score_head(out.nodes, score_, !cfg_.unnormalized_scores);
    } else {
      auto e = ad::linear(edge_features(in), edge_w_, edge_b_);
      if (r) e = cond::register_edges(e, cond_.register_edge(), n, r);
      const Tensor h0 = h;
      for (std::size_t l = 0; l < cfg_.layers; ++l) {
        cond_.update(l, st, h, &e);
        auto next = graph_transformer_layer(h, e, gt_blocks_[l]);
        if (gt_blocks_[l].node_stream) {
          if (cfg_.long_residuals) next.h = ad::add(next.h, h0);
          h = cond_.modulate_nodes(l, st, next.h);
        }
        e = cond_.modulate_edges(l, st, next.e);
      }
      out.nodes = r ? cond::strip_registers(h, n) : h;
      out.edges = r ? cond::strip_register_edges(e, n, r) : e;
      if (cfg_.readout) out.raw = gt_edge_readout(out.edges, readout_w_, readout_b_, n);
    }
    if (cfg_.readout) out.prob = symmetrize(out.raw);
    return out;
  }

 private:
  static double density(const Adjacency& a) {
    const std::size_t n = a.size();
    return n > 1 ? static_cast<double>(a.edge_count()) / static_cast<double>(n * (n - 1) / 2) : 0.0;
  }

  Tensor node_features(const GraphInput& in) const {
    const std::size_t n = in.coords.size(), w = cfg_.node_input_dim();
    std::vector<double> x(n * w, 0.0);
    std::optional<cond::LaplacianFeatures> pe;
    const std::size_t p = cfg_.conditioner.num_eigen;
    if (cfg_.laplacian_pe) {
      if (p > n) throw ValidationError("laplacian PE needs at least num_eigen nodes");
      pe = cond::laplacian_features(feasibility_adjacency(in.coords, in.d), p);
    }
    if (cfg_.latent_dim) {
      if (!in.z.defined() || in.z.size() != cfg_.latent_dim)
        throw DimensionError("model expects a latent vector of size " + std::to_string(cfg_.latent_dim));
    }
    for (std::size_t i = 0; i < n; ++i) {
      double* row = &x[i * w];
      row[0] = in.coords[i].x;
      row[1] = in.coords[i].y;
      std::size_t c = 2;
      if (pe)
        for (std::size_t j = 0; j < p; ++j) row[c++] = pe->node_pe[i * p + j];
      for (std::size_t j = 0; j < cfg_.latent_dim; ++j) row[c++] = in.z[j];
    }
    Tensor base({n, w}, std::move(x));
    if (!cfg_.latent_dim || !in.z.requires_grad()) return base;
    // Route z through the tape so the encoder receives gradients.
    auto fixed = ad::slice_cols(base, 0, w - cfg_.latent_dim);
    return ad::concat_cols({fixed, ad::repeat_rows(ad::reshape(in.z, {1, cfg_.latent_dim}), n)});
  }

  Tensor edge_features(const GraphInput& in) const {
    const std::size_t n = in.coords.size(), w = cfg_.edge_input_dim();
    std::vector<double> x(n * n * w, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double* row = &x[(i * n + j) * w];
        const double len = euclid(in.coords[i], in.coords[j]);
        row[0] = len;
        row[1] = (i != j && len <= in.d) ? 1.0 : 0.0;
        std::size_t c = 2;
        if (cfg_.noisy_edges || cfg_.label_edges) row[c++] = (*in.edges)(i, j) ? 1.0 : 0.0;
      }
    return Tensor({n * n, w}, std::move(x));
  }

  ModelConfig cfg_;
  std::string prefix_;
  Tensor in_w_, in_b_, edge_w_, edge_b_, readout_w_, readout_b_;
  std::vector<AttentionBlock> att_blocks_;
  std::vector<GraphTransformerBlock> gt_blocks_;
  HeadProjections score_;
  cond::Conditioner cond_;
};

}  // namespace camlab::models

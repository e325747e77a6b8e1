// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "camlab/autodiff/ops.hpp"
#include "camlab/autodiff/params.hpp"

namespace camlab::models {

using ad::Tensor;

struct LayerNormWeights {
  Tensor gain, bias;

  static LayerNormWeights create(ad::ParamStore& ps, const std::string& p, std::size_t d) {
    return {ps.create(p + "/gain", {d}, ad::Init::Ones), ps.create(p + "/bias", {d}, ad::Init::Zeros)};
  }
  Tensor operator()(const Tensor& x) const { return ad::layer_norm(x, gain, bias); }
};

/// Two affine layers with a ReLU in between, hidden width 2·d.
struct FeedForward {
  Tensor w1, b1, w2, b2;

  static FeedForward create(ad::ParamStore& ps, const std::string& p, std::size_t d) {
    return {ps.create(p + "/w1", {d, 2 * d}, ad::Init::Glorot), ps.create(p + "/b1", {2 * d}, ad::Init::Zeros),
            ps.create(p + "/w2", {2 * d, d}, ad::Init::Glorot), ps.create(p + "/b2", {d}, ad::Init::Zeros)};
  }
  Tensor operator()(const Tensor& x) const { return ad::linear(ad::relu(ad::linear(x, w1, b1)), w2, b2); }
};

/// Q/K/V projections for M heads packed column-wise (head i owns columns
/// [i·d_k, (i+1)·d_k)).
struct HeadProjections {
  Tensor wq, wk, wv;
  std::size_t heads = 1, d_k = 1;

  static HeadProjections create(ad::ParamStore& ps, const std::string& p, std::size_t d_model, std::size_t heads,
                                std::size_t d_k, bool values = true) {
    HeadProjections h;
    h.heads = heads;
    h.d_k = d_k;
    h.wq = ps.create(p + "/wq", {d_model, heads * d_k}, ad::Init::Glorot);
    h.wk = ps.create(p + "/wk", {d_model, heads * d_k}, ad::Init::Glorot);
    if (values) h.wv = ps.create(p + "/wv", {d_model, heads * d_k}, ad::Init::Glorot);
    return h;
  }

  /// Per-head Q_i·K_iᵀ/√d_k.
  std::vector<Tensor> scores(const Tensor& h) const {
    auto q = ad::matmul(h, wq);
    auto k = ad::matmul(h, wk);
    const double inv = 1.0 / std::sqrt(static_cast<double>(d_k));
    std::vector<Tensor> out;
    out.reserve(heads);
    for (std::size_t i = 0; i < heads; ++i) {
      auto qi = ad::slice_cols(q, i * d_k, (i + 1) * d_k);
      auto ki = ad::slice_cols(k, i * d_k, (i + 1) * d_k);
      out.push_back(ad::scale(ad::matmul(qi, ad::transpose(ki)), inv));
    }
    return out;
  }
};

/// Multi-head self-attention: Concat_i(softmax(Q_i K_iᵀ/√d_k)·V_i)·W^O.
struct AttentionWeights {
  HeadProjections proj;
  Tensor wo;  // M·d_k × d_model
};

inline Tensor multi_head_attention(const Tensor& h, const AttentionWeights& w) {
  auto scores = w.proj.scores(h);
  auto v = ad::matmul(h, w.proj.wv);
  std::vector<Tensor> heads;
  heads.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    heads.push_back(ad::matmul(ad::softmax_rows(scores[i]), ad::slice_cols(v, i * w.proj.d_k, (i + 1) * w.proj.d_k)));
  return ad::matmul(ad::concat_cols(heads), w.wo);
}

struct AttentionBlock {
  AttentionWeights attn;
  LayerNormWeights ln1, ln2;
  FeedForward ffn;

  static AttentionBlock create(ad::ParamStore& ps, const std::string& p, std::size_t d_model, std::size_t heads,
                               std::size_t d_k) {
    return {{HeadProjections::create(ps, p, d_model, heads, d_k), ps.create(p + "/wo", {heads * d_k, d_model},
                                                                              ad::Init::Glorot)},
            LayerNormWeights::create(ps, p + "/ln1", d_model),
            LayerNormWeights::create(ps, p + "/ln2", d_model),
            FeedForward::create(ps, p + "/ffn", d_model)};
  }
};

/// One attention layer with residuals: H ← LN(H + MHA(H)), H ← LN(H + FFN(H)).
inline Tensor attention_layer(const Tensor& h, const AttentionBlock& b) {
  auto x = b.ln1(ad::add(h, multi_head_attention(h, b.attn)));
  return b.ln2(ad::add(x, b.ffn(x)));
}

/// Mean over heads of the per-head attention score matrices. With
/// `normalized` false the scores pass through a sigmoid instead of a row
/// softmax.
inline Tensor attention_score_head(const Tensor& h, const HeadProjections& proj, bool normalized = true) {
  auto scores = proj.scores(h);
  Tensor acc;
  for (const auto& s : scores) {
    auto p = normalized ? ad::softmax_rows(s) : ad::sigmoid(s);
    acc = acc.defined() ? ad::add(acc, p) : p;
  }
  return ad::scale(acc, 1.0 / static_cast<double>(scores.size()));
}

struct GraphTransformerBlock {
  HeadProjections proj;
  Tensor we, be;      // edge gate: d_model × M, M
  Tensor wo_h, bo_h;  // node output
  Tensor wo_e, bo_e;  // edge output: M × d_model
  LayerNormWeights ln_h1, ln_h2, ln_e1, ln_e2;
  FeedForward ffn_h, ffn_e;

  bool node_stream = true;

  /// A block without a node stream only produces the edge update; the last
  /// block of a model that reads out edges has no consumer for node outputs.
  static GraphTransformerBlock create(ad::ParamStore& ps, const std::string& p, std::size_t d_model,
                                      std::size_t heads, std::size_t d_k, bool node_stream = true) {
    GraphTransformerBlock b;
    b.node_stream = node_stream;
    b.proj = HeadProjections::create(ps, p, d_model, heads, d_k, node_stream);
    b.we = ps.create(p + "/we", {d_model, heads}, ad::Init::Glorot);
    b.be = ps.create(p + "/be", {heads}, ad::Init::Ones);
    b.wo_e = ps.create(p + "/wo_e", {heads, d_model}, ad::Init::Glorot);
    b.bo_e = ps.create(p + "/bo_e", {d_model}, ad::Init::Zeros);
    b.ln_e1 = LayerNormWeights::create(ps, p + "/ln_e1", d_model);
    b.ln_e2 = LayerNormWeights::create(ps, p + "/ln_e2", d_model);
    b.ffn_e = FeedForward::create(ps, p + "/ffn_e", d_model);
    if (node_stream) {
      b.wo_h = ps.create(p + "/wo_h", {heads * d_k, d_model}, ad::Init::Glorot);
      b.bo_h = ps.create(p + "/bo_h", {d_model}, ad::Init::Zeros);
      b.ln_h1 = LayerNormWeights::create(ps, p + "/ln_h1", d_model);
      b.ln_h2 = LayerNormWeights::create(ps, p + "/ln_h2", d_model);
      b.ffn_h = FeedForward::create(ps, p + "/ffn_h", d_model);
    }
    return b;
  }
};

struct NodesEdges {
  Tensor h;  // N × d_model
  Tensor e;  // N² × d_model, row i·N + j
};

/// Attention sublayer of a Graph Transformer block. Head i's logits are the
/// scaled dot products multiplied elementwise by s_i(E) = E·W^E_i + b^E_i.
/// Returns the node update and the edge update before residuals; the node
/// update is left undefined for a block without a node stream.
inline NodesEdges graph_transformer_attention(const Tensor& h, const Tensor& e, const GraphTransformerBlock& b) {
  const std::size_t n = h.rows();
  if (e.rows() != n * n)
    throw DimensionError("edge embeddings " + ad::shape_str(e.shape()) + " do not match " + std::to_string(n) +
                         " nodes");
  auto scores = b.proj.scores(h);
  auto gate = ad::linear(e, b.we, b.be);
  Tensor v = b.node_stream ? ad::matmul(h, b.proj.wv) : Tensor();
  std::vector<Tensor> node_heads, edge_heads;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    auto logits = ad::mul(scores[i], ad::reshape(ad::slice_cols(gate, i, i + 1), {n, n}));
    if (b.node_stream)
      node_heads.push_back(
          ad::matmul(ad::softmax_rows(logits), ad::slice_cols(v, i * b.proj.d_k, (i + 1) * b.proj.d_k)));
    edge_heads.push_back(ad::reshape(logits, {n * n, 1}));
  }
  NodesEdges out;
  if (b.node_stream) out.h = ad::linear(ad::concat_cols(node_heads), b.wo_h, b.bo_h);
  out.e = ad::linear(ad::concat_cols(edge_heads), b.wo_e, b.bo_e);
  return out;
}

/// Full block: attention, then residual + LN and FFN + LN on both streams.
/// Without a node stream H passes through unchanged.
inline NodesEdges graph_transformer_layer(const Tensor& h, const Tensor& e, const GraphTransformerBlock& b) {
  auto upd = graph_transformer_attention(h, e, b);
  Tensor x = h;
  if (b.node_stream) {
    x = b.ln_h1(ad::add(h, upd.h));
    x = b.ln_h2(ad::add(x, b.ffn_h(x)));
  }
  auto y = b.ln_e1(ad::add(e, upd.e));
  y = b.ln_e2(ad::add(y, b.ffn_e(y)));
  return {x, y};
}

/// Per-edge affine map to a logit followed by a sigmoid, as an n×n matrix.
inline Tensor gt_edge_readout(const Tensor& e, const Tensor& w, const Tensor& b, std::size_t n) {
  return ad::reshape(ad::sigmoid(ad::linear(e, w, b)), {n, n});
}

/// (P + Pᵀ)/2 with a zero diagonal.
inline Tensor symmetrize(const Tensor& p) {
  const std::size_t n = p.rows();
  std::vector<double> mask(n * n, 1.0);
  for (std::size_t i = 0; i < n; ++i) mask[i * n + i] = 0.0;
  return ad::mul(ad::scale(ad::add(p, ad::transpose(p)), 0.5), Tensor({n, n}, std::move(mask)));
}

}  // namespace camlab::models

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "camlab/conditioning/film.hpp"

namespace camlab::cond {

/// Single-head cross-attention from one query row onto a set of rows.
struct CrossAttention {
  Tensor wq;  // d_model × d_k, applied to the token
  Tensor wk;  // d_model × d_k, applied to the attended rows
  Tensor wv;  // d_model × d_model

  static CrossAttention create(ad::ParamStore& ps, const std::string& prefix, std::size_t d_model, std::size_t d_k) {
    return {ps.create(prefix + "/wq", {d_model, d_k}, ad::Init::Glorot),
            ps.create(prefix + "/wk", {d_model, d_k}, ad::Init::Glorot),
            ps.create(prefix + "/wv", {d_model, d_model}, ad::Init::Glorot)};
  }
};

/// Attention readout of `rows` by `query` ([1×d_model]); the weights are a
/// softmax over rows of q·kᵀ/√d_k, or the raw scaled scores when
/// `normalize` is false.
inline Tensor cross_attend(const Tensor& query, const Tensor& rows, const CrossAttention& w, bool normalize = true) {
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(w.wq.cols()));
  auto q = ad::matmul(query, w.wq);
  auto k = ad::matmul(rows, w.wk);
  auto v = ad::matmul(rows, w.wv);
  auto scores = ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt_dk);
  return ad::matmul(normalize ? ad::softmax_rows(scores) : scores, v);
}

/// Learnable initial token value ω₀.
inline Tensor cam_init(const Tensor& omega0) { return omega0; }

struct CamNodeUpdate {
  CrossAttention nodes;
  Tensor ln_gain, ln_bias;
};

/// token' = LayerNorm(CrossAttention(token, H) + token).
inline Tensor cam_update(const Tensor& token, const Tensor& nodes, const CamNodeUpdate& w, bool normalize = true) {
  return ad::layer_norm(ad::add(cross_attend(token, nodes, w.nodes, normalize), token), w.ln_gain, w.ln_bias);
}

struct CamFusedUpdate {
  CrossAttention nodes;
  CrossAttention edges;
  Tensor ffn_w;  // 2·d_model × d_model
  Tensor ffn_b;
  Tensor ln_gain, ln_bias;
};

/// token' = LayerNorm(FFN([readout(nodes), readout(edges)]) + token) where the
/// FFN is one affine layer over the concatenated readouts.
inline Tensor cam_update_fused(const Tensor& token, const Tensor& nodes, const Tensor& edges, const CamFusedUpdate& w,
                               bool normalize = true) {
  auto rn = cross_attend(token, nodes, w.nodes, normalize);
  auto re = cross_attend(token, edges, w.edges, normalize);
  auto mixed = ad::linear(ad::concat_cols({rn, re}), w.ffn_w, w.ffn_b);
  return ad::layer_norm(ad::add(mixed, token), w.ln_gain, w.ln_bias);
}

struct SecondOrderWeights {
  Tensor w_items;  // d_model × d_p
  Tensor w_cam;    // d_model × d_p
};

/// Scalar affinity per item: a_i = (x_i·W_items)·(token·W_cam)ᵀ, as [R×1].
inline Tensor second_order_affinity(const Tensor& token, const Tensor& items, const SecondOrderWeights& w) {
  return ad::matmul(ad::matmul(items, w.w_items), ad::transpose(ad::matmul(token, w.w_cam)));
}

/// Per-item modulation: each item's affinity (optionally followed by shared
/// side features) goes through the FiLM head, so gamma_i = W_gamma·a_i + b_gamma.
inline ModulationParams second_order_params(const Tensor& token, const Tensor& items, const SecondOrderWeights& w,
                                            const FilmHead& head, const std::optional<Tensor>& side = std::nullopt) {
  auto a = second_order_affinity(token, items, w);
  if (side && side->defined()) a = ad::concat_cols({a, ad::repeat_rows(*side, items.rows())});
  return film_params(a, head);
}

}  // namespace camlab::cond

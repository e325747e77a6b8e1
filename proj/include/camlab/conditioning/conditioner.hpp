// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "camlab/conditioning/cam.hpp"
#include "camlab/conditioning/laplacian.hpp"
#include "camlab/conditioning/registers.hpp"
#include "camlab/conditioning/stats.hpp"
#include "camlab/core/config.hpp"

namespace camlab::cond {

enum class Mode { None, Cam, Cam2, Stats, Registers, Eigen, CamStats };

inline Mode parse_mode(const std::string& s) {
  if (s == "none") return Mode::None;
  if (s == "cam") return Mode::Cam;
  if (s == "cam2") return Mode::Cam2;
  if (s == "stats") return Mode::Stats;
  if (s == "registers") return Mode::Registers;
  if (s == "eigen") return Mode::Eigen;
  if (s == "cam_stats" || s == "cam+stats") return Mode::CamStats;
  throw ConfigError("unknown conditioner mode '" + s + "'");
}

inline std::string mode_name(Mode m) {
  switch (m) {
    case Mode::None: return "none";
    case Mode::Cam: return "cam";
    case Mode::Cam2: return "cam2";
    case Mode::Stats: return "stats";
    case Mode::Registers: return "registers";
    case Mode::Eigen: return "eigen";
    case Mode::CamStats: return "cam_stats";
  }
  return "none";
}

struct ConditionerConfig {
  Mode mode = Mode::None;
  bool attend_edges = true;
  std::size_t num_registers = 4;
  std::size_t num_eigen = 4;
  std::size_t d_p = 8;
  bool normalize = true;  // softmax in the token's cross-attention

  bool has_token() const { return mode == Mode::Cam || mode == Mode::Cam2 || mode == Mode::CamStats; }
  bool has_stats() const { return mode == Mode::Stats || mode == Mode::CamStats; }

  static ConditionerConfig from(const Config& c) {
    ConditionerConfig out;
    out.mode = parse_mode(c.str("conditioner.mode"));
    out.attend_edges = c.boolean("conditioner.attend_edges");
    out.num_registers = static_cast<std::size_t>(c.integer("conditioner.num_registers"));
    out.num_eigen = static_cast<std::size_t>(c.integer("conditioner.num_eigen"));
    out.d_p = static_cast<std::size_t>(c.integer("conditioner.d_p"));
    out.normalize = c.boolean("conditioner.normalize");
    if (out.mode == Mode::Registers && out.num_registers == 0)
      throw ConfigError("conditioner.num_registers must be at least 1");
    if (out.mode == Mode::Eigen && out.num_eigen == 0) throw ConfigError("conditioner.num_eigen must be at least 1");
    if (out.mode == Mode::Cam2 && out.d_p == 0) throw ConfigError("conditioner.d_p must be at least 1");
    return out;
  }
};

/// Optional per-graph inputs that become the shared side vector.
struct SideInputs {
  std::optional<double> edge_density;
  std::optional<double> t_over_T;
};

/// Width of the side vector (stats, eigenvalues and time) for a given setup.
inline std::size_t side_dim(const ConditionerConfig& cfg, bool with_density, bool with_time) {
  std::size_t s = 0;
  if (cfg.has_stats()) s += kStatsBaseDim + (with_density ? 1 : 0);
  if (cfg.mode == Mode::Eigen) s += cfg.num_eigen;
  if (with_time) s += 1;
  return s;
}

/// Side vector in the order [stats, eigenvalues, t/T]. Stats carry t/T
/// themselves, so it is not repeated.
inline std::vector<double> side_features(const ConditionerConfig& cfg, const Coords& coords, double d,
                                         std::size_t max_n, const SideInputs& in) {
  std::vector<double> out;
  if (cfg.has_stats()) {
    out = stats_features(coords, d, max_n, in.edge_density, in.t_over_T);
    return out;
  }
  if (cfg.mode == Mode::Eigen) {
    auto lap = laplacian_features(feasibility_adjacency(coords, d), cfg.num_eigen);
    out = lap.eigenvalues;
  }
  if (in.t_over_T) out.push_back(*in.t_over_T);
  return out;
}

struct ConditionerDims {
  std::size_t d_model = 0;
  std::size_t d_k = 0;
  std::size_t layers = 0;
  bool edges = false;  // the host model carries edge embeddings
  std::size_t side = 0;
  bool last_nodes = true;  // the host reads the last layer's node embeddings
};

/// Conditioning state carried through one forward pass.
struct CondState {
  Tensor token;  // [1×d_model] when a token is configured
  Tensor side;   // [1×side] when side features exist
};

/// Owns the conditioner parameters of one model and applies the token
/// update and FiLM modulation per block.
class Conditioner {
 public:
  Conditioner() = default;

  Conditioner(const ConditionerConfig& cfg, const ConditionerDims& dims, ad::ParamStore& ps,
              const std::string& prefix = "cond")
      : cfg_(cfg), dims_(dims) {
    if (dims.d_model == 0 || dims.d_k == 0 || dims.layers == 0)
      throw ContractError("conditioner dimensions must be positive");
    const std::size_t D = dims.d_model;
    if (cfg.has_token()) omega0_ = ps.create(prefix + "/omega0", {1, D}, ad::Init::Normal02);
    if (cfg.mode == Mode::Registers) {
      registers_ = ps.create(prefix + "/registers", {cfg.num_registers, D}, ad::Init::Normal02);
      if (dims.edges) register_edge_ = ps.create(prefix + "/register_edge", {1, D}, ad::Init::Normal02);
    }
    film_in_ = dims.side;
    if (cfg.mode == Mode::Cam || cfg.mode == Mode::CamStats) film_in_ += D;
    if (cfg.mode == Mode::Cam2) film_in_ += 1;
    layers_.resize(dims.layers);
    for (std::size_t l = 0; l < dims.layers; ++l) {
      const std::string p = prefix + "/l" + std::to_string(l);
      auto& L = layers_[l];
      if (cfg.has_token()) {
        L.node_attn = CrossAttention::create(ps, p + "/node_attn", D, dims.d_k);
        if (fused()) {
          L.edge_attn = CrossAttention::create(ps, p + "/edge_attn", D, dims.d_k);
          L.ffn_w = ps.create(p + "/ffn/w", {2 * D, D}, ad::Init::Glorot);
          L.ffn_b = ps.create(p + "/ffn/b", {D}, ad::Init::Zeros);
        }
        L.ln_gain = ps.create(p + "/ln/gain", {D}, ad::Init::Ones);
        L.ln_bias = ps.create(p + "/ln/bias", {D}, ad::Init::Zeros);
      }
      const bool nodes = l + 1 < dims.layers || dims.last_nodes;
      if (cfg.mode == Mode::Cam2) {
        if (nodes)
          L.second_nodes = {ps.create(p + "/second/w_nodes", {D, cfg.d_p}, ad::Init::Glorot),
                          ps.create(p + "/second/w_cam", {D, cfg.d_p}, ad::Init::Glorot)};
        if (dims.edges)
          L.second_edges = {ps.create(p + "/second/w_edges", {D, cfg.d_p}, ad::Init::Glorot),
                            ps.create(p + "/second/w_cam_edges", {D, cfg.d_p}, ad::Init::Glorot)};
      }
      if (film_in_ > 0) {
        if (nodes) L.film_nodes = FilmHead::create(ps, p + "/film_nodes", film_in_, D);
        if (dims.edges) L.film_edges = FilmHead::create(ps, p + "/film_edges", film_in_, D);
      }
    }
  }

  const ConditionerConfig& config() const { return cfg_; }
  bool has_film() const { return film_in_ > 0; }
  std::size_t film_input_dim() const { return film_in_; }
  std::size_t num_registers() const { return cfg_.mode == Mode::Registers ? cfg_.num_registers : 0; }
  const Tensor& register_nodes() const { return registers_; }
  const Tensor& register_edge() const { return register_edge_; }

  CondState start(const std::vector<double>& side) const {
    if (side.size() != dims_.side)
      throw DimensionError("conditioner expects " + std::to_string(dims_.side) + " side features, got " +
                           std::to_string(side.size()));
    CondState s;
    if (cfg_.has_token()) s.token = cam_init(omega0_);
    if (!side.empty()) s.side = Tensor({1, side.size()}, side);
    return s;
  }

  /// Token update from the block's input embeddings.
  void update(std::size_t layer, CondState& s, const Tensor& h, const Tensor* e) const {
    if (!cfg_.has_token()) return;
    if (h.cols() != dims_.d_model)
      throw DimensionError("conditioner built for d_model " + std::to_string(dims_.d_model) + ", got " +
                           ad::shape_str(h.shape()));
    const auto& L = layers_.at(layer);
    if (fused() && e)
      s.token = cam_update_fused(s.token, h, *e, {L.node_attn, L.edge_attn, L.ffn_w, L.ffn_b, L.ln_gain, L.ln_bias},
                                 cfg_.normalize);
    else
      s.token = cam_update(s.token, h, {L.node_attn, L.ln_gain, L.ln_bias}, cfg_.normalize);
  }

  Tensor modulate_nodes(std::size_t layer, const CondState& s, const Tensor& h) const {
    if (!has_film()) return h;
    const auto& L = layers_.at(layer);
    if (!L.film_nodes.w_gamma.defined()) throw ContractError("layer " + std::to_string(layer) + " has no node modulation");
    if (cfg_.mode == Mode::Cam2) return film_apply(h, second_order_params(s.token, h, L.second_nodes, L.film_nodes, side(s)));
    return film_apply(h, film_params(shared_condition(s), L.film_nodes));
  }

  Tensor modulate_edges(std::size_t layer, const CondState& s, const Tensor& e) const {
    if (!has_film() || !dims_.edges) return e;
    const auto& L = layers_.at(layer);
    if (cfg_.mode == Mode::Cam2) return film_apply(e, second_order_params(s.token, e, L.second_edges, L.film_edges, side(s)));
    return film_apply(e, film_params(shared_condition(s), L.film_edges));
  }

 private:
  struct Layer {
    CrossAttention node_attn, edge_attn;
    Tensor ffn_w, ffn_b, ln_gain, ln_bias;
    SecondOrderWeights second_nodes, second_edges;
    FilmHead film_nodes, film_edges;
  };

  bool fused() const { return dims_.edges && cfg_.attend_edges; }

  static std::optional<Tensor> side(const CondState& s) {
    return s.side.defined() ? std::optional<Tensor>(s.side) : std::nullopt;
  }

  Tensor shared_condition(const CondState& s) const {
    if (s.token.defined() && s.side.defined()) return ad::concat_cols({s.token, s.side});
    if (s.token.defined()) return s.token;
    return s.side;
  }

  ConditionerConfig cfg_;
  ConditionerDims dims_;
  std::size_t film_in_ = 0;
  Tensor omega0_, registers_, register_edge_;
  std::vector<Layer> layers_;
};

}  // namespace camlab::cond

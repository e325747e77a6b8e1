// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "camlab/conditioning/conditioner.hpp"

namespace camlab::models {

enum class Family { AttentionScore, GraphTransformer };

inline Family parse_family(const std::string& s) {
  if (s == "attention_score" || s == "att") return Family::AttentionScore;
  if (s == "graph_transformer" || s == "gt") return Family::GraphTransformer;
  throw ConfigError("unknown model family '" + s + "'");
}

inline std::string family_name(Family f) {
  return f == Family::AttentionScore ? "attention_score" : "graph_transformer";
}

struct ModelConfig {
  Family family = Family::AttentionScore;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t d_model = 32;
  std::size_t d_k = 8;  // per head
  cond::ConditionerConfig conditioner;
  bool long_residuals = true;
  bool laplacian_pe = false;
  bool unnormalized_scores = false;
  std::size_t max_n = 16;

  // Input plumbing, set by the owner rather than read from config.
  std::size_t latent_dim = 0;  // z concatenated to every node
  bool noisy_edges = false;    // edge input carries e^t, side input carries t/T
  bool label_edges = false;    // edge input carries the label (encoder)
  bool readout = true;         // build the prediction head

  void validate() const {
    if (layers < 1) throw ConfigError("model.layers must be at least 1");
    if (heads < 1 || d_model < 1 || d_k < 1) throw ConfigError("model sizes must be positive");
    if (d_model % heads != 0)
      throw ConfigError("model.d_model = " + std::to_string(d_model) + " is not divisible by model.heads = " +
                        std::to_string(heads));
    if (family == Family::AttentionScore && (noisy_edges || label_edges))
      throw ConfigError("edge inputs need the graph_transformer family");
    if (laplacian_pe && conditioner.num_eigen == 0) throw ConfigError("laplacian PE needs conditioner.num_eigen > 0");
  }

  std::size_t node_input_dim() const { return 2 + (laplacian_pe ? conditioner.num_eigen : 0) + latent_dim; }
  std::size_t edge_input_dim() const { return 2 + (noisy_edges ? 1 : 0) + (label_edges ? 1 : 0); }
  std::size_t side_dim() const {
    return cond::side_dim(conditioner, noisy_edges && conditioner.has_stats(), noisy_edges);
  }

  /// Reads `model.*` and `conditioner.*`; model.layers = 0 and model.d_k = 0
  /// pick the family defaults.
  static ModelConfig from(const Config& c) {
    ModelConfig m;
    m.family = parse_family(c.str("model.family"));
    const auto layers = c.integer("model.layers");
    m.layers = layers > 0 ? static_cast<std::size_t>(layers) : (m.family == Family::AttentionScore ? 2 : 6);
    m.heads = static_cast<std::size_t>(c.integer("model.heads"));
    m.d_model = static_cast<std::size_t>(c.integer("model.d_model"));
    const auto dk = c.integer("model.d_k");
    m.d_k = dk > 0 ? static_cast<std::size_t>(dk) : (m.heads ? m.d_model / m.heads : 0);
    m.long_residuals = c.boolean("model.long_residuals");
    m.laplacian_pe = c.boolean("model.laplacian_pe");
    m.unnormalized_scores = c.boolean("model.unnormalized_scores");
    m.max_n = static_cast<std::size_t>(c.integer("model.max_n"));
    m.conditioner = cond::ConditionerConfig::from(c);
    if (c.integer("model.layers") < 0 || c.integer("model.d_k") < 0) throw ConfigError("negative model size");
    m.validate();
    return m;
  }
};

}  // namespace camlab::models

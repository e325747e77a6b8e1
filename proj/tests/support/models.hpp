// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "camlab/models/link_predictor.hpp"
#include "camlab/core/rng.hpp"

namespace camlab::testing {

inline models::ModelConfig tiny_config(models::Family family, cond::Mode mode, std::size_t layers = 2) {
  models::ModelConfig c;
  c.family = family;
  c.layers = layers;
  c.heads = 2;
  c.d_model = 8;
  c.d_k = 4;
  c.conditioner.mode = mode;
  c.conditioner.num_registers = 2;
  c.conditioner.num_eigen = 3;
  c.conditioner.d_p = 4;
  return c;
}

/// Moves every parameter whose name contains `needle` away from its
/// initialization, so identity-initialized FiLM heads start to matter.
inline void perturb_params(const ad::ParamStore& ps, const std::string& needle, std::uint64_t seed,
                           double scale = 0.3) {
  Rng rng(seed);
  for (const auto& [name, t] : ps.all())
    if (name.find(needle) != std::string::npos) {
      ad::Tensor handle = t;
      for (auto& x : handle.mutable_data()) x += rng.uniform(-scale, scale);
    }
}

}  // namespace camlab::testing

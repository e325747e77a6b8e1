// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "camlab/autodiff/tensor.hpp"
#include "camlab/core/rng.hpp"

namespace camlab::ad {

enum class Init { Zeros, Ones, Glorot, Normal02 };

/// Named trainable leaves, ordered by path. Each parameter's initial values
/// come from an RNG keyed by (seed, path), so adding a parameter never shifts
/// the initialization of the others.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  const Tensor& create(const std::string& path, Shape shape, Init init) {
    if (params_.count(path)) throw ContractError("parameter '" + path + "' created twice");
    const std::size_t n = numel(shape);
    std::vector<double> v(n, 0.0);
    Rng rng(derive_seed(seed_, hash_name(path)));
    switch (init) {
      case Init::Zeros:
        break;
      case Init::Ones:
        std::fill(v.begin(), v.end(), 1.0);
        break;
      case Init::Glorot: {
        const double fan_in = static_cast<double>(shape.size() > 1 ? shape[0] : 1);
        const double fan_out = static_cast<double>(shape.back());
        const double a = std::sqrt(6.0 / (fan_in + fan_out));
        for (auto& x : v) x = rng.uniform(-a, a);
        break;
      }
      case Init::Normal02:
        for (auto& x : v) x = 0.2 * rng.normal();
        break;
    }
    return params_.emplace(path, Tensor(std::move(shape), std::move(v), true)).first->second;
  }

  const Tensor& get(const std::string& path) const {
    auto it = params_.find(path);
    if (it == params_.end()) throw ContractError("no parameter named '" + path + "'");
    return it->second;
  }

  bool contains(const std::string& path) const { return params_.count(path) != 0; }

  const std::map<std::string, Tensor>& all() const { return params_; }

  void zero_grad() {
    for (auto& [_, t] : params_) t.zero_grad();
  }

  /// Overwrites values in place (shapes must match); unknown names are an error.
  void load(const std::map<std::string, Tensor>& values, bool allow_missing = false) {
    for (auto& [name, t] : params_) {
      auto it = values.find(name);
      if (it == values.end()) {
        if (allow_missing) continue;
        throw ValidationError("checkpoint is missing parameter '" + name + "'");
      }
      if (it->second.shape() != t.shape())
        throw DimensionError("parameter '" + name + "' has shape " + shape_str(t.shape()) + ", checkpoint has " +
                             shape_str(it->second.shape()));
      auto dst = t.mutable_data();
      std::copy(it->second.data().begin(), it->second.data().end(), dst.begin());
    }
  }

  std::size_t count_values() const {
    std::size_t n = 0;
    for (const auto& [_, t] : params_) n += t.size();
    return n;
  }

 private:
  std::uint64_t seed_;
  std::map<std::string, Tensor> params_;
};

}  // namespace camlab::ad

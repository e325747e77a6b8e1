// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "camlab/autodiff/params.hpp"

namespace camlab::ad {

struct AdamWOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// AdamW with bias-corrected moments and decoupled weight decay.
class AdamW {
 public:
  explicit AdamW(AdamWOptions opts = {}) : opts_(opts) {}

  AdamWOptions& options() { return opts_; }
  long long steps() const { return t_; }

  void step(ParamStore& params) {
    for (const auto& [name, p] : params.all())
      if (!p.has_grad()) throw ContractError("AdamW: parameter '" + name + "' has no gradient");
    ++t_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (const auto& [name, p] : params.all()) {
      auto& m = m_[name];
      auto& v = v_[name];
      m.resize(p.size(), 0.0);
      v.resize(p.size(), 0.0);
      Tensor handle = p;
      auto w = handle.mutable_data();
      const auto g = p.grad();
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * g[i];
        v[i] = opts_.beta2 * v[i] + (1.0 - opts_.beta2) * g[i] * g[i];
        w[i] -= opts_.lr * opts_.weight_decay * w[i];
        w[i] -= opts_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + opts_.eps);
      }
    }
  }

  /// Moments and step count as named tensors, for checkpointing.
  std::map<std::string, Tensor> state() const {
    std::map<std::string, Tensor> out;
    out.emplace("adamw/step", Tensor::scalar(static_cast<double>(t_)));
    for (const auto& [name, m] : m_)
      if (!m.empty()) out.emplace("adamw/m/" + name, Tensor({m.size()}, m));
    for (const auto& [name, v] : v_)
      if (!v.empty()) out.emplace("adamw/v/" + name, Tensor({v.size()}, v));
    return out;
  }

  void load_state(const std::map<std::string, Tensor>& state) {
    m_.clear();
    v_.clear();
    t_ = 0;
    for (const auto& [key, t] : state) {
      if (key == "adamw/step") {
        t_ = static_cast<long long>(t.item());
      } else if (key.rfind("adamw/m/", 0) == 0) {
        m_[key.substr(8)] = t.values();
      } else if (key.rfind("adamw/v/", 0) == 0) {
        v_[key.substr(8)] = t.values();
      }
    }
  }

 private:
  AdamWOptions opts_;
  long long t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

}  // namespace camlab::ad

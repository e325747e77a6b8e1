// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "camlab/autodiff/checkpoint.hpp"
#include "camlab/autodiff/optim.hpp"
#include "camlab/core/parallel.hpp"
#include "camlab/instance/dataset.hpp"
#include "camlab/metrics/metrics.hpp"
#include "camlab/models/link_predictor.hpp"
#include "camlab/models/loss.hpp"

namespace camlab::models {

struct TrainOptions {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  ad::AdamWOptions adamw;
  std::uint64_t seed = 0;
};

/// Loss for one instance plus its n×n prediction (used for the log).
struct StepOutput {
  Tensor loss;
  Tensor prob;
};

using StepFn = std::function<StepOutput(const Instance&, Rng&)>;

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  double variance = 0.0;
};

inline std::string epoch_log_json(const EpochLog& e) {
  return "{\"epoch\":" + std::to_string(e.epoch) + ",\"loss\":" + format_exact(e.loss) +
         ",\"accuracy\":" + format_exact(e.accuracy) + ",\"variance\":" + format_exact(e.variance) + "}";
}

inline metrics::ProbMatrix to_probs(const Tensor& prob) { return prob.values(); }

/// Mini-batch AdamW loop. Epoch e draws all its randomness (shuffle order
/// and any per-step noise) from derive_seed(seed, e), so a run resumed from
/// a checkpoint continues exactly like an uninterrupted one.
class Trainer {
 public:
  Trainer(ad::ParamStore& params, const TrainOptions& opts) : params_(params), opts_(opts), optim_(opts.adamw) {
    if (opts.batch_size == 0) throw ConfigError("train.batch_size must be positive");
  }

  std::size_t epochs_done() const { return epoch_; }

  EpochLog run_epoch(const std::vector<Instance>& data, const StepFn& step) {
    if (data.empty()) throw ValidationError("training set is empty");
    Rng rng(derive_seed(opts_.seed, epoch_));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order.begin(), order.end());

    double total = 0.0;
    metrics::Tally acc;
    std::vector<metrics::ProbMatrix> probs;
    probs.reserve(data.size());
    for (std::size_t start = 0; start < order.size(); start += opts_.batch_size) {
      const std::size_t end = std::min(order.size(), start + opts_.batch_size);
      params_.zero_grad();
      Tensor batch_loss;
      for (std::size_t b = start; b < end; ++b) {
        const auto& inst = data[order[b]];
        auto out = step(inst, rng);
        total += out.loss.item();
        batch_loss = batch_loss.defined() ? ad::add(batch_loss, out.loss) : out.loss;
        auto p = to_probs(out.prob);
        const auto t = metrics::accuracy_tally(p, inst.label, 0.5);
        acc.hits += t.hits;
        acc.total += t.total;
        probs.push_back(std::move(p));
      }
      ad::backward(ad::scale(batch_loss, 1.0 / static_cast<double>(end - start)));
      optim_.step(params_);
    }
    ++epoch_;
    return {epoch_, total / static_cast<double>(data.size()), acc.rate(), metrics::prediction_variance(probs)};
  }

  /// Parameters, optimizer moments and the epoch counter.
  std::map<std::string, Tensor> checkpoint() const {
    auto out = optim_.state();
    for (const auto& [name, t] : params_.all()) out.emplace(name, t.detach());
    out.emplace("trainer/epoch", Tensor::scalar(static_cast<double>(epoch_)));
    return out;
  }

  void restore(const std::map<std::string, Tensor>& ck) {
    params_.load(ck);
    optim_.load_state(ck);
    auto it = ck.find("trainer/epoch");
    if (it == ck.end()) throw ValidationError("checkpoint has no epoch counter");
    epoch_ = static_cast<std::size_t>(it->second.item());
  }

 private:
  ad::ParamStore& params_;
  TrainOptions opts_;
  ad::AdamW optim_;
  std::size_t epoch_ = 0;
};

struct SupervisedLoss {
  double repulsive_weight = 0.0;
  double repulsive_margin = 0.1;
  double edge_marginal = 0.0;
};

inline GraphInput input_of(const Instance& inst) { return {inst.coords, inst.d, std::nullopt, std::nullopt, {}}; }

/// BCE on the strict upper triangle plus the optional mean-repulsive term.
inline StepFn supervised_step(const LinkPredictor& model, const SupervisedLoss& opts = {}) {
  return [&model, opts](const Instance& inst, Rng&) {
    auto pred = model.forward(input_of(inst));
    auto loss = edge_bce(pred.prob, inst.label);
    if (opts.repulsive_weight > 0.0)
      loss = ad::add(loss, ad::scale(mean_repulsive(pred.prob, opts.edge_marginal, opts.repulsive_margin),
                                     opts.repulsive_weight));
    return StepOutput{loss, pred.prob};
  };
}

inline void check_sizes(const std::vector<Instance>& data, std::size_t max_n) {
  for (const auto& inst : data)
    if (inst.n() > max_n)
      throw ValidationError("instance with n = " + std::to_string(inst.n()) + " exceeds model.max_n = " +
                            std::to_string(max_n));
}

/// A model replica with its own parameter copy, for read-only parallel use.
template <class Model>
struct Replica {
  ad::ParamStore params;
  std::unique_ptr<Model> model;
};

/// Runs fn(replica, i) for every i with one cloned replica per worker.
/// `build` constructs a model into a fresh ParamStore.
template <class Model, class Build, class Fn>
void with_replicas(const ad::ParamStore& trained, std::size_t count, int workers, Build&& build, Fn&& fn) {
  const std::size_t w = std::clamp<std::size_t>(workers < 1 ? 1 : workers, 1, std::max<std::size_t>(count, 1));
  std::vector<Replica<Model>> reps(w);
  for (auto& r : reps) {
    r.model = build(r.params);
    r.params.load(trained.all());
  }
  parallel_for(w, static_cast<int>(w), [&](std::size_t t) {
    for (std::size_t i = t; i < count; i += w) fn(*reps[t].model, i);
  });
}

/// One-shot probabilities for every instance.
inline std::vector<metrics::ProbMatrix> predict_probs(const ModelConfig& cfg, const ad::ParamStore& trained,
                                                      const std::vector<Instance>& data, int workers = 1) {
  std::vector<metrics::ProbMatrix> out(data.size());
  with_replicas<LinkPredictor>(
      trained, data.size(), workers, [&](ad::ParamStore& ps) { return std::make_unique<LinkPredictor>(cfg, ps); },
      [&](const LinkPredictor& m, std::size_t i) { out[i] = to_probs(m.forward(input_of(data[i])).prob); });
  return out;
}

/// Threshold in {0.05, 0.10, ..., 0.95} maximizing pooled accuracy; ties go
/// to the value closest to 0.5.
inline double tune_threshold(const std::vector<metrics::ProbMatrix>& probs, const std::vector<Instance>& data) {
  double best_t = 0.5, best_acc = -1.0;
  for (int s = 1; s < 20; ++s) {
    const double t = 0.05 * s;
    metrics::Tally acc;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto a = metrics::accuracy_tally(probs[i], data[i].label, t);
      acc.hits += a.hits;
      acc.total += a.total;
    }
    const double r = acc.rate();
    if (r > best_acc || (r == best_acc && std::abs(t - 0.5) < std::abs(best_t - 0.5))) {
      best_acc = r;
      best_t = t;
    }
  }
  return best_t;
}

/// Fraction of zero label entries: the accuracy of predicting no edges.
inline double zero_baseline_accuracy(const std::vector<Instance>& data) {
  metrics::Tally acc;
  for (const auto& inst : data) {
    const std::size_t n = inst.n();
    acc.total += n * (n - 1) / 2;
    acc.hits += n * (n - 1) / 2 - inst.label.edge_count();
  }
  return acc.rate();
}

inline double pooled_accuracy(const std::vector<metrics::ProbMatrix>& probs, const std::vector<Instance>& data,
                              double t) {
  metrics::Tally acc;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto a = metrics::accuracy_tally(probs[i], data[i].label, t);
    acc.hits += a.hits;
    acc.total += a.total;
  }
  return acc.rate();
}

}  // namespace camlab::models

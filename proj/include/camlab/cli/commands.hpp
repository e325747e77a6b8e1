// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "camlab/core/config.hpp"
#include "camlab/diffusion/sampler.hpp"
#include "camlab/models/vae.hpp"

namespace camlab::cli {

namespace fs = std::filesystem;

/// Every key a run may set. Keys outside this table are rejected.
inline Config default_config() {
  return Config({
      {"seed", "0"},
      {"data.dir", "data"},
      {"data.n", "16"},
      {"data.k", "3"},
      {"data.d", "0.4"},
      {"data.count", "6000"},
      {"data.split", "10,1,1"},
      {"model.family", "gt"},
      {"model.layers", "0"},
      {"model.heads", "4"},
      {"model.d_model", "32"},
      {"model.d_k", "0"},
      {"model.long_residuals", "true"},
      {"model.laplacian_pe", "false"},
      {"model.unnormalized_scores", "false"},
      {"model.max_n", "16"},
      {"conditioner.mode", "none"},
      {"conditioner.attend_edges", "true"},
      {"conditioner.num_registers", "4"},
      {"conditioner.num_eigen", "4"},
      {"conditioner.d_p", "8"},
      {"conditioner.normalize", "true"},
      {"train.mode", "supervised"},
      {"train.data", "data/train.jsonl"},
      {"train.out", "runs/default"},
      {"train.epochs", "10"},
      {"train.batch_size", "32"},
      {"train.lr", "0.001"},
      {"train.weight_decay", "0.01"},
      {"train.repulsive_weight", "0"},
      {"train.repulsive_margin", "0.1"},
      {"vae.latent_dim", "8"},
      {"vae.encoder_layers", "2"},
      {"vae.kl_weight", "1"},
      {"diffusion.T", "200"},
      {"diffusion.s", "0.008"},
      {"diffusion.sample_final", "false"},
      {"sample.run", "runs/default"},
      {"sample.input", "data/test.jsonl"},
      {"sample.out", "runs/default/samples/predictions.jsonl"},
      {"sample.threshold", "0.5"},
      {"eval.split", "data/test.jsonl"},
      {"eval.predictions", ""},
      {"eval.run", ""},
      {"eval.out", "runs/default/eval"},
      {"eval.threshold", "0.5"},
  });
}

/// Defaults, then the config file (if any), then `key=value` overrides.
inline Config load_config(const std::string& path, const std::vector<std::string>& overrides) {
  auto cfg = default_config();
  if (!path.empty()) cfg.merge_file(path);
  for (const auto& o : overrides) cfg.apply_override(o);
  return cfg;
}

struct Options {
  int workers = 1;
  bool resume = false;
};

inline void ensure_dir(const fs::path& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("error while writing '" + path.string() + "'");
}

inline std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

/// `<command>.resolved.cfg` inside `dir`.
inline fs::path snapshot_path(const fs::path& dir, const std::string& command) {
  return dir / (command + ".resolved.cfg");
}

inline void write_snapshot(const fs::path& dir, const std::string& command, const Config& cfg) {
  write_text(snapshot_path(dir, command), cfg.to_text());
}

inline std::uint64_t seed_of(const Config& cfg) {
  const auto s = cfg.integer("seed");
  if (s < 0) throw ConfigError("seed must be non-negative");
  return static_cast<std::uint64_t>(s);
}

inline std::size_t positive(const Config& cfg, const std::string& key) {
  const auto v = cfg.integer(key);
  if (v < 1) throw ConfigError(key + " must be at least 1");
  return static_cast<std::size_t>(v);
}

// ---------------------------------------------------------------- generate

struct SplitCounts {
  std::size_t train = 0, val = 0, test = 0;
};

/// Splits `count` by the weights "a,b,c"; rounding remainders go to train.
inline SplitCounts split_counts(std::size_t count, const std::string& weights) {
  std::vector<double> w;
  std::stringstream ss(weights);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t pos = 0;
      w.push_back(std::stod(part, &pos));
      if (pos != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ConfigError("data.split expects three numbers, got '" + weights + "'");
    }
  }
  if (w.size() != 3 || w[0] < 0 || w[1] < 0 || w[2] < 0 || w[0] + w[1] + w[2] <= 0)
    throw ConfigError("data.split expects three non-negative weights, got '" + weights + "'");
  const double total = w[0] + w[1] + w[2];
  SplitCounts c;
  c.val = static_cast<std::size_t>(static_cast<double>(count) * w[1] / total);
  c.test = static_cast<std::size_t>(static_cast<double>(count) * w[2] / total);
  c.train = count - c.val - c.test;
  return c;
}

inline const char* const kSplitNames[] = {"train", "val", "test"};

/// Seed of split s; each split draws from its own stream.
inline std::uint64_t split_seed(std::uint64_t seed, std::size_t s) { return derive_seed(seed, 1000 + s); }

inline void cmd_generate(const Config& cfg, const Options& opts, std::ostream& log) {
  const auto n = positive(cfg, "data.n");
  const int k = static_cast<int>(positive(cfg, "data.k"));
  const double d = cfg.real("data.d");
  if (!(d > 0.0)) throw ConfigError("data.d must be positive");
  const auto counts = split_counts(static_cast<std::size_t>(std::max(0LL, cfg.integer("data.count"))),
                                   cfg.str("data.split"));
  const fs::path dir = cfg.str("data.dir");
  ensure_dir(dir);
  const std::size_t sizes[] = {counts.train, counts.val, counts.test};
  const auto seed = seed_of(cfg);
  for (std::size_t s = 0; s < 3; ++s) {
    const auto path = dir / (std::string(kSplitNames[s]) + ".jsonl");
    auto m = generate_dataset(sizes[s], n, k, d, split_seed(seed, s), path.string(), opts.workers);
    log << kSplitNames[s] << ": " << m.count << " instances, edge marginal " << format_short(m.edge_marginal)
        << " -> " << path.string() << "\n";
  }
  write_snapshot(dir, "generate", cfg);
}

// ---------------------------------------------------------------- train

enum class TrainMode { Supervised, Vae, Diffusion };

inline TrainMode parse_train_mode(const std::string& s) {
  if (s == "supervised") return TrainMode::Supervised;
  if (s == "vae") return TrainMode::Vae;
  if (s == "diffusion") return TrainMode::Diffusion;
  throw ConfigError("unknown train.mode '" + s + "'");
}

inline models::ModelConfig model_config(const Config& cfg, TrainMode mode) {
  auto m = models::ModelConfig::from(cfg);
  if (mode == TrainMode::Diffusion) {
    m.noisy_edges = true;
    m.validate();
  }
  return m;
}

inline diffusion::DiffusionSchedule schedule_of(const Config& cfg, double m) {
  return diffusion::build_schedule(static_cast<int>(cfg.integer("diffusion.T")), cfg.real("diffusion.s"), m);
}

/// Edge marginal from the dataset manifest, or from the records when the
/// manifest is missing.
inline double edge_marginal_of(const std::string& data_path, const std::vector<Instance>& data) {
  if (fs::exists(manifest_path(data_path))) return read_manifest(manifest_path(data_path)).edge_marginal;
  const std::size_t n = data.empty() ? 0 : data.front().n();
  return summarize(data, n, 0, 0.0, 0).edge_marginal;
}

/// A model of any training mode, built into its own parameter store.
struct ModelBundle {
  TrainMode mode = TrainMode::Supervised;
  models::ModelConfig cfg;
  std::unique_ptr<models::LinkPredictor> predictor;  // supervised and diffusion
  std::unique_ptr<models::Vae> vae;

  static ModelBundle build(const Config& run, ad::ParamStore& ps) {
    ModelBundle b;
    b.mode = parse_train_mode(run.str("train.mode"));
    b.cfg = model_config(run, b.mode);
    if (b.mode == TrainMode::Vae)
      b.vae = std::make_unique<models::Vae>(b.cfg, positive(run, "vae.latent_dim"), positive(run, "vae.encoder_layers"),
                                            ps);
    else
      b.predictor = std::make_unique<models::LinkPredictor>(b.cfg, ps);
    return b;
  }
};

inline constexpr char kMarginalKey[] = "meta/edge_marginal";

inline void save_atomic(const fs::path& path, const std::map<std::string, ad::Tensor>& ck) {
  const auto tmp = path.string() + ".tmp";
  ad::save_checkpoint(tmp, ck);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + ec.message());
}

inline void cmd_train(const Config& cfg, const Options& opts, std::ostream& log) {
  const std::string data_path = cfg.str("train.data");
  auto data = instances_of(read_records(data_path));
  if (data.empty()) throw ValidationError("training set '" + data_path + "' is empty");
  const double m = edge_marginal_of(data_path, data);

  ad::ParamStore ps(seed_of(cfg));
  auto bundle = ModelBundle::build(cfg, ps);
  models::check_sizes(data, bundle.cfg.max_n);

  models::TrainOptions topts;
  topts.epochs = static_cast<std::size_t>(std::max(0LL, cfg.integer("train.epochs")));
  topts.batch_size = positive(cfg, "train.batch_size");
  topts.adamw.lr = cfg.real("train.lr");
  topts.adamw.weight_decay = cfg.real("train.weight_decay");
  topts.seed = seed_of(cfg);

  models::StepFn step;
  std::optional<diffusion::DiffusionSchedule> schedule;
  switch (bundle.mode) {
    case TrainMode::Supervised:
      step = models::supervised_step(
          *bundle.predictor, {cfg.real("train.repulsive_weight"), cfg.real("train.repulsive_margin"), m});
      break;
    case TrainMode::Diffusion:
      schedule = schedule_of(cfg, m);
      step = diffusion::diffusion_step(*bundle.predictor, *schedule);
      break;
    case TrainMode::Vae: {
      const double kl = cfg.real("vae.kl_weight");
      const auto* vae = bundle.vae.get();
      step = [vae, kl](const Instance& inst, Rng& rng) {
        auto out = vae->loss(inst, rng, kl);
        return models::StepOutput{out.loss, out.pred.prob};
      };
      break;
    }
  }

  const fs::path out = cfg.str("train.out");
  ensure_dir(out);
  write_snapshot(out, "train", cfg);
  const auto ck_path = out / "model.ckpt";
  const auto log_path = out / "train_log.jsonl";
  models::Trainer trainer(ps, topts);
  std::vector<std::string> lines;
  if (opts.resume && fs::exists(ck_path)) {
    trainer.restore(ad::load_checkpoint(ck_path.string()));
    lines = read_lines(log_path);
    if (lines.size() < trainer.epochs_done())
      throw ValidationError("train_log.jsonl has fewer lines than the checkpoint's epoch count");
    lines.resize(trainer.epochs_done());
    log << "resuming after epoch " << trainer.epochs_done() << "\n";
  }
  while (trainer.epochs_done() < topts.epochs) {
    const auto e = trainer.run_epoch(data, step);
    lines.push_back(models::epoch_log_json(e));
    auto ck = trainer.checkpoint();
    ck.emplace(kMarginalKey, ad::Tensor::scalar(m));
    save_atomic(ck_path, ck);
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    write_text(log_path, text);
    log << "epoch " << e.epoch << " loss " << format_short(e.loss) << " accuracy " << format_short(e.accuracy)
        << "\n";
  }
}

// ---------------------------------------------------------------- sample

/// A trained run: its resolved config and a parameter store holding the
/// checkpoint.
struct LoadedRun {
  Config cfg;
  ad::ParamStore params;
  ModelBundle bundle;
  double edge_marginal = 0.0;
};

inline std::unique_ptr<LoadedRun> load_run(const fs::path& dir) {
  auto run = std::make_unique<LoadedRun>();
  run->cfg = default_config();
  run->cfg.merge_file(snapshot_path(dir, "train").string());
  run->bundle = ModelBundle::build(run->cfg, run->params);
  const auto ck = ad::load_checkpoint((dir / "model.ckpt").string());
  run->params.load(ck);
  auto it = ck.find(kMarginalKey);
  if (it == ck.end()) throw ValidationError("checkpoint has no edge marginal");
  run->edge_marginal = it->second.item();
  return run;
}

inline std::string upper_probs_json(const metrics::ProbMatrix& p) {
  const std::size_t n = metrics::side_of(p);
  std::string s = "[";
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (s.size() > 1) s += ',';
      s += format_exact(p[i * n + j]);
    }
  return s + "]";
}

inline metrics::ProbMatrix probs_from_upper(std::size_t n, const std::vector<double>& upper) {
  if (upper.size() != n * (n - 1) / 2) throw ValidationError("prob field has the wrong length");
  metrics::ProbMatrix p(n * n, 0.0);
  std::size_t c = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) p[i * n + j] = p[j * n + i] = upper[c++];
  return p;
}

/// One-shot probabilities from a supervised run.
inline std::vector<metrics::ProbMatrix> oneshot_probs(const LoadedRun& run, const std::vector<Instance>& data,
                                                      int workers) {
  if (run.bundle.mode != TrainMode::Supervised)
    throw ConfigError("one-shot prediction needs a supervised run; sample the run first");
  models::check_sizes(data, run.bundle.cfg.max_n);
  return models::predict_probs(run.bundle.cfg, run.params, data, workers);
}

inline void cmd_sample(const Config& cfg, const Options& opts, std::ostream& log) {
  auto run = load_run(cfg.str("sample.run"));
  const auto input = read_records(cfg.str("sample.input"));
  const auto data = instances_of(input);
  const auto seed = seed_of(cfg);
  const double thresh = cfg.real("sample.threshold");
  std::vector<Record> out(input.size());
  const std::string seed_json = std::to_string(seed);

  switch (run->bundle.mode) {
    case TrainMode::Supervised: {
      const auto probs = oneshot_probs(*run, data, opts.workers);
      for (std::size_t i = 0; i < data.size(); ++i) {
        out[i] = {input[i].index, data[i], {{"source", "\"oneshot\""}, {"seed", seed_json}, {"prob", upper_probs_json(probs[i])}}};
        out[i].instance.label = metrics::threshold(probs[i], thresh);
      }
      break;
    }
    case TrainMode::Vae: {
      models::check_sizes(data, run->bundle.cfg.max_n);
      std::vector<metrics::ProbMatrix> probs(data.size());
      const std::size_t latent = positive(run->cfg, "vae.latent_dim"), enc = positive(run->cfg, "vae.encoder_layers");
      models::with_replicas<models::Vae>(
          run->params, data.size(), opts.workers,
          [&](ad::ParamStore& ps) { return std::make_unique<models::Vae>(run->bundle.cfg, latent, enc, ps); },
          [&](const models::Vae& vae, std::size_t i) {
            Rng rng(derive_seed(seed, i));
            probs[i] = vae.sample(data[i].coords, data[i].d, rng).prob.values();
          });
      for (std::size_t i = 0; i < data.size(); ++i) {
        out[i] = {input[i].index, data[i], {{"source", "\"vae\""}, {"seed", seed_json}, {"prob", upper_probs_json(probs[i])}}};
        out[i].instance.label = metrics::threshold(probs[i], thresh);
      }
      break;
    }
    case TrainMode::Diffusion: {
      models::check_sizes(data, run->bundle.cfg.max_n);
      const auto sc = schedule_of(run->cfg, run->edge_marginal);
      diffusion::SamplerOptions sopts{cfg.boolean("diffusion.sample_final")};
      const auto samples = diffusion::sample_dataset(run->bundle.cfg, run->params, data, sc, seed, opts.workers, sopts);
      for (std::size_t i = 0; i < data.size(); ++i) {
        out[i] = {input[i].index, data[i], {{"source", "\"ddpm\""}, {"T", std::to_string(sc.T)}, {"seed", seed_json}}};
        out[i].instance.label = samples[i];
      }
      break;
    }
  }
  for (const auto& r : out)
    if (!r.instance.label.is_symmetric() || r.instance.label.has_self_loops())
      throw ContractError("sampled graph " + std::to_string(r.index) + " is not a valid undirected graph");

  const fs::path out_path = cfg.str("sample.out");
  ensure_dir(out_path.parent_path());
  write_records(out_path.string(), out);
  write_snapshot(out_path.parent_path().empty() ? fs::path(".") : out_path.parent_path(), "sample", cfg);
  log << out.size() << " predictions -> " << out_path.string() << "\n";
}

// ---------------------------------------------------------------- eval

/// Probabilities stored in a prediction file: the `prob` field when
/// present, otherwise the binary prediction itself.
inline std::vector<metrics::ProbMatrix> prediction_probs(const std::vector<Record>& preds,
                                                         const std::vector<Record>& split) {
  if (preds.size() != split.size())
    throw ValidationError("prediction file has " + std::to_string(preds.size()) + " records, split has " +
                          std::to_string(split.size()));
  std::vector<metrics::ProbMatrix> out(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i];
    if (p.index != split[i].index || p.instance.n() != split[i].instance.n())
      throw ValidationError("prediction " + std::to_string(i) + " does not match split record " +
                            std::to_string(split[i].index));
    out[i] = metrics::as_probs(p.instance.label);
    for (const auto& [key, value] : p.extra)
      if (key == "prob") {
        try {
          out[i] = probs_from_upper(p.instance.n(), nlohmann::json::parse(value).get<std::vector<double>>());
        } catch (const nlohmann::json::exception& e) {
          throw ValidationError(std::string("malformed prob field: ") + e.what());
        }
      }
  }
  return out;
}

inline metrics::Evaluation cmd_eval(const Config& cfg, const Options& opts, std::ostream& log) {
  const auto split = read_records(cfg.str("eval.split"));
  const auto data = instances_of(split);
  const std::string pred_path = cfg.str("eval.predictions"), run_dir = cfg.str("eval.run");
  if (pred_path.empty() == run_dir.empty()) throw ConfigError("set exactly one of eval.predictions and eval.run");
  std::vector<metrics::ProbMatrix> probs;
  if (!pred_path.empty()) {
    probs = prediction_probs(read_records(pred_path), split);
  } else {
    probs = oneshot_probs(*load_run(run_dir), data, opts.workers);
  }
  std::vector<Coords> coords;
  std::vector<double> ds;
  std::vector<int> ks;
  std::vector<Adjacency> labels;
  for (const auto& inst : data) {
    coords.push_back(inst.coords);
    ds.push_back(inst.d);
    ks.push_back(inst.k);
    labels.push_back(inst.label);
  }
  auto ev = metrics::evaluate(coords, ds, ks, probs, labels, cfg.real("eval.threshold"));

  const fs::path out = cfg.str("eval.out");
  ensure_dir(out);
  write_text(out / "report.txt", metrics::report_text(ev.report));
  std::string breakdown;
  for (std::size_t i = 0; i < ev.per_instance.size(); ++i)
    breakdown += metrics::instance_metrics_json(split[i].index, ev.per_instance[i]) + "\n";
  write_text(out / "breakdown.jsonl", breakdown);
  write_snapshot(out, "eval", cfg);
  log << metrics::report_text(ev.report);
  return ev;
}

}  // namespace camlab::cli

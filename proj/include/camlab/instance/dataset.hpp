// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "camlab/core/format.hpp"
#include "camlab/core/parallel.hpp"
#include "camlab/instance/solver.hpp"

namespace camlab {

inline constexpr int kDatasetFormatVersion = 1;

struct Instance {
  Coords coords;
  int k = 3;
  double d = 0.4;
  Adjacency label;

  std::size_t n() const { return coords.size(); }
};

/// Throws ValidationError naming the first violated label invariant.
inline void validate_label(const Instance& inst) {
  const auto& a = inst.label;
  const std::size_t n = inst.n();
  if (a.size() != n) throw ValidationError("label size does not match node count");
  if (!a.is_symmetric()) throw ValidationError("label is not symmetric");
  if (a.has_self_loops()) throw ValidationError("label has a self loop");
  for (std::size_t i = 0; i < n; ++i) {
    if (a.degree(i) > static_cast<std::size_t>(inst.k))
      throw ValidationError("node " + std::to_string(i) + " exceeds degree cap");
    for (std::size_t j = i + 1; j < n; ++j)
      if (a(i, j) && euclid(inst.coords[i], inst.coords[j]) > inst.d)
        throw ValidationError("edge (" + std::to_string(i) + "," + std::to_string(j) + ") is longer than d");
  }
  if (a.edge_count() != n - connected_components(a).count) throw ValidationError("label is not a forest");
}

/// One line of a dataset or prediction file. `extra` holds additional
/// already-serialized JSON members, written after the fixed fields.
struct Record {
  std::size_t index = 0;
  Instance instance;
  std::vector<std::pair<std::string, std::string>> extra;
};

inline std::string serialize_record(const Record& r) {
  const auto& in = r.instance;
  std::string s = "{\"index\":" + std::to_string(r.index) + ",\"n\":" + std::to_string(in.n()) +
                  ",\"k\":" + std::to_string(in.k) + ",\"d\":" + format_exact(in.d) + ",\"coords\":[";
  for (std::size_t i = 0; i < in.coords.size(); ++i) {
    if (i) s += ',';
    s += format_exact(in.coords[i].x) + ',' + format_exact(in.coords[i].y);
  }
  s += "],\"label\":\"" + in.label.upper_bits() + "\"";
  for (const auto& [key, value] : r.extra) s += ",\"" + key + "\":" + value;
  return s + "}";
}

inline Record parse_record(const std::string& line) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(line);
  } catch (const nlohmann::ordered_json::exception& e) {
    throw ValidationError(std::string("malformed record: ") + e.what());
  }
  try {
    Record r;
    r.index = j.at("index").get<std::size_t>();
    const auto n = j.at("n").get<std::size_t>();
    r.instance.k = j.at("k").get<int>();
    r.instance.d = j.at("d").get<double>();
    const auto& c = j.at("coords");
    if (c.size() != 2 * n) throw ValidationError("record " + std::to_string(r.index) + ": expected 2n coordinates");
    r.instance.coords.resize(n);
    for (std::size_t i = 0; i < n; ++i) r.instance.coords[i] = {c[2 * i].get<double>(), c[2 * i + 1].get<double>()};
    r.instance.label = Adjacency::from_upper_bits(n, j.at("label").get<std::string>());
    for (auto it = j.begin(); it != j.end(); ++it) {
      static const char* fixed[] = {"index", "n", "k", "d", "coords", "label"};
      if (std::find(std::begin(fixed), std::end(fixed), it.key()) != std::end(fixed)) continue;
      r.extra.emplace_back(it.key(), it.value().dump());
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("record is missing a field: ") + e.what());
  }
}

inline void write_records(const std::string& path, const std::vector<Record>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (const auto& r : records) out << serialize_record(r) << '\n';
  if (!out) throw IoError("error while writing '" + path + "'");
}

inline std::vector<Record> read_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::vector<Record> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(parse_record(line));
  return out;
}

inline std::vector<Instance> instances_of(const std::vector<Record>& records) {
  std::vector<Instance> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.instance);
  return out;
}

struct Manifest {
  std::size_t count = 0;
  std::size_t n = 0;
  int k = 0;
  double d = 0.0;
  std::uint64_t seed = 0;
  double edge_marginal = 0.0;  // mean label density; the diffusion marginal m
  double mean_components = 0.0;
  int format_version = kDatasetFormatVersion;
};

inline std::string manifest_path(const std::string& dataset_path) { return dataset_path + ".manifest.json"; }

inline void write_manifest(const std::string& path, const Manifest& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "{\"count\":" << m.count << ",\"n\":" << m.n << ",\"k\":" << m.k << ",\"d\":" << format_exact(m.d)
      << ",\"seed\":" << m.seed << ",\"edge_marginal\":" << format_exact(m.edge_marginal)
      << ",\"mean_components\":" << format_exact(m.mean_components) << ",\"format_version\":" << m.format_version
      << "}\n";
}

inline Manifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read manifest '" + path + "'");
  try {
    auto j = nlohmann::json::parse(in);
    Manifest m;
    m.count = j.at("count").get<std::size_t>();
    m.n = j.at("n").get<std::size_t>();
    m.k = j.at("k").get<int>();
    m.d = j.at("d").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.edge_marginal = j.at("edge_marginal").get<double>();
    m.mean_components = j.at("mean_components").get<double>();
    m.format_version = j.at("format_version").get<int>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed manifest '" + path + "': " + e.what());
  }
}

/// Samples and solves `count` instances; instance i uses seed derive_seed(seed, i).
inline std::vector<Instance> generate_instances(std::size_t count, std::size_t n, int k, double d, std::uint64_t seed,
                                                int workers = 1) {
  if (n > kMaxExactNodes)
    throw CapacityError("n = " + std::to_string(n) + " exceeds the exactness limit of " +
                        std::to_string(kMaxExactNodes));
  std::vector<Instance> out(count);
  parallel_for(count, workers, [&](std::size_t i) {
    Instance inst;
    inst.coords = sample_coords(n, derive_seed(seed, i));
    inst.k = k;
    inst.d = d;
    inst.label = solve_exact(inst.coords, k, d).adjacency;
    out[i] = std::move(inst);
  });
  return out;
}

inline Manifest summarize(const std::vector<Instance>& instances, std::size_t n, int k, double d, std::uint64_t seed) {
  Manifest m;
  m.count = instances.size();
  m.n = n;
  m.k = k;
  m.d = d;
  m.seed = seed;
  const double pairs = static_cast<double>(n * (n - 1) / 2);
  double density = 0.0, comps = 0.0;
  for (const auto& inst : instances) {
    if (pairs > 0) density += static_cast<double>(inst.label.edge_count()) / pairs;
    comps += static_cast<double>(connected_components(inst.label).count);
  }
  if (!instances.empty()) {
    m.edge_marginal = density / static_cast<double>(instances.size());
    m.mean_components = comps / static_cast<double>(instances.size());
  }
  return m;
}

/// Writes `out_path` plus its manifest sidecar and returns the manifest.
inline Manifest generate_dataset(std::size_t count, std::size_t n, int k, double d, std::uint64_t seed,
                                 const std::string& out_path, int workers = 1) {
  auto instances = generate_instances(count, n, k, d, seed, workers);
  std::vector<Record> records(count);
  for (std::size_t i = 0; i < count; ++i) records[i] = {i, std::move(instances[i]), {}};
  write_records(out_path, records);
  std::vector<Instance> view;
  view.reserve(count);
  for (const auto& r : records) view.push_back(r.instance);
  auto m = summarize(view, n, k, d, seed);
  write_manifest(manifest_path(out_path), m);
  return m;
}

}  // namespace camlab

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "camlab/core/format.hpp"
#include "camlab/instance/graph.hpp"

namespace camlab::metrics {

/// Row-major n×n edge probabilities.
using ProbMatrix = std::vector<double>;

inline std::size_t side_of(const ProbMatrix& p) {
  const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(p.size()))));
  if (n * n != p.size()) throw DimensionError("probability matrix of size " + std::to_string(p.size()) + " is not square");
  return n;
}

inline Adjacency threshold(const ProbMatrix& p, double t) {
  const std::size_t n = side_of(p);
  Adjacency a(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a.set(i, j, p[i * n + j] >= t);
  return a;
}

inline ProbMatrix as_probs(const Adjacency& a) {
  const std::size_t n = a.size();
  ProbMatrix p(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) p[i * n + j] = a(i, j) ? 1.0 : 0.0;
  return p;
}

/// Matching entries of the strict upper triangle, and how many there are.
struct Tally {
  std::size_t hits = 0, total = 0;
  double rate() const { return total ? static_cast<double>(hits) / static_cast<double>(total) : 1.0; }
};

inline Tally accuracy_tally(const ProbMatrix& pred, const Adjacency& label, double t) {
  const std::size_t n = label.size();
  if (side_of(pred) != n) throw DimensionError("prediction and label sizes differ");
  Tally out;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      out.hits += (pred[i * n + j] >= t) == label(i, j);
      ++out.total;
    }
  return out;
}

inline double accuracy(const ProbMatrix& pred, const Adjacency& label, double t = 0.5) {
  return accuracy_tally(pred, label, t).rate();
}

/// Population variance of all strict-upper-triangle probabilities, pooled.
/// Values are summed in sorted order so node relabeling cannot change the
/// result.
inline double prediction_variance(const std::vector<ProbMatrix>& batch) {
  std::vector<double> v;
  for (const auto& p : batch) {
    const std::size_t n = side_of(p);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) v.push_back(p[i * n + j]);
  }
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  // Two-pass form keeps constant inputs at exactly zero.
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return acc / static_cast<double>(v.size());
}

/// Connected components among nodes of degree ≥ 1.
inline std::size_t cc_excluding_isolated(const Adjacency& a) {
  const auto cc = connected_components(a);
  std::size_t isolated = 0;
  for (std::size_t i = 0; i < a.size(); ++i) isolated += a.degree(i) == 0;
  return cc.count - isolated;
}

inline double isolated_fraction(const Adjacency& a) {
  if (a.size() == 0) return 0.0;
  std::size_t c = 0;
  for (std::size_t i = 0; i < a.size(); ++i) c += a.degree(i) == 0;
  return static_cast<double>(c) / static_cast<double>(a.size());
}

inline double saturated_fraction(const Adjacency& a, int k) {
  if (a.size() == 0) return 0.0;
  std::size_t c = 0;
  for (std::size_t i = 0; i < a.size(); ++i) c += a.degree(i) > static_cast<std::size_t>(k);
  return static_cast<double>(c) / static_cast<double>(a.size());
}

/// Predicted edges of length ≤ d, and how many edges there are.
inline Tally link_validity_tally(const Adjacency& a, const Coords& coords, double d) {
  Tally t;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j)
      if (a(i, j)) {
        ++t.total;
        t.hits += euclid(coords[i], coords[j]) <= d;
      }
  return t;
}

/// Fraction of predicted edges within range; 1.0 when nothing is predicted.
inline double link_validity(const Adjacency& a, const Coords& coords, double d) {
  return link_validity_tally(a, coords, d).rate();
}

/// Mean predicted edge count over mean label edge count.
inline double link_count_ratio(const std::vector<Adjacency>& pred, const std::vector<Adjacency>& label) {
  double p = 0.0, l = 0.0;
  for (const auto& a : pred) p += static_cast<double>(a.edge_count());
  for (const auto& a : label) l += static_cast<double>(a.edge_count());
  if (l == 0.0) return p == 0.0 ? 1.0 : INFINITY;
  return (p / static_cast<double>(pred.size())) / (l / static_cast<double>(label.size()));
}

struct MetricsReport {
  double accuracy = 0.0;
  double variance = 0.0;
  double cc = 0.0;
  double isolated_pct = 0.0;
  double saturated_pct = 0.0;
  double link_validity_pct = 0.0;
  double link_count_ratio = 0.0;
};

inline const std::vector<std::string>& report_keys() {
  static const std::vector<std::string> keys{"accuracy",      "variance",          "cc",
                                             "isolated_pct",  "saturated_pct",     "link_validity_pct",
                                             "link_count_ratio"};
  return keys;
}

/// Flat `key = value` text, one field per line.
inline std::string report_text(const MetricsReport& r) {
  const double v[] = {r.accuracy,      r.variance,          r.cc,
                      r.isolated_pct,  r.saturated_pct,     r.link_validity_pct,
                      r.link_count_ratio};
  std::string out;
  for (std::size_t i = 0; i < report_keys().size(); ++i) out += report_keys()[i] + " = " + format_exact(v[i]) + "\n";
  return out;
}

/// Signed percentage deviation of a link count ratio, e.g. 1.07 → "+7%".
inline std::string ratio_as_percent(double ratio) {
  const double pct = (ratio - 1.0) * 100.0;
  return (pct >= 0 ? "+" : "") + format_short(pct) + "%";
}

struct InstanceMetrics {
  double accuracy = 0.0;
  std::size_t cc = 0;
  double isolated = 0.0;
  double saturated = 0.0;
  double link_validity = 1.0;
  std::size_t pred_edges = 0;
  std::size_t label_edges = 0;
};

struct Evaluation {
  MetricsReport report;
  std::vector<InstanceMetrics> per_instance;
};

/// Aggregates every metric over a split. Accuracy and link validity are
/// pooled over entries and edges; cc, isolated and saturated are averaged
/// per graph.
inline Evaluation evaluate(const std::vector<Coords>& coords, const std::vector<double>& ds, const std::vector<int>& ks,
                           const std::vector<ProbMatrix>& probs, const std::vector<Adjacency>& labels,
                           double thresh = 0.5) {
  const std::size_t count = probs.size();
  if (coords.size() != count || labels.size() != count || ds.size() != count || ks.size() != count)
    throw ValidationError("evaluate: input lengths differ");
  Evaluation ev;
  ev.per_instance.resize(count);
  std::vector<Adjacency> preds(count);
  Tally acc, valid;
  double cc = 0.0, iso = 0.0, sat = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    preds[i] = threshold(probs[i], thresh);
    const auto a = accuracy_tally(probs[i], labels[i], thresh);
    const auto v = link_validity_tally(preds[i], coords[i], ds[i]);
    auto& m = ev.per_instance[i];
    m.accuracy = a.rate();
    m.cc = cc_excluding_isolated(preds[i]);
    m.isolated = isolated_fraction(preds[i]);
    m.saturated = saturated_fraction(preds[i], ks[i]);
    m.link_validity = v.rate();
    m.pred_edges = preds[i].edge_count();
    m.label_edges = labels[i].edge_count();
    acc.hits += a.hits;
    acc.total += a.total;
    valid.hits += v.hits;
    valid.total += v.total;
    cc += static_cast<double>(m.cc);
    iso += m.isolated;
    sat += m.saturated;
  }
  auto& r = ev.report;
  const double denom = count ? static_cast<double>(count) : 1.0;
  r.accuracy = acc.rate();
  r.variance = prediction_variance(probs);
  r.cc = cc / denom;
  r.isolated_pct = iso / denom;
  r.saturated_pct = sat / denom;
  r.link_validity_pct = valid.rate();
  r.link_count_ratio = count ? link_count_ratio(preds, labels) : 1.0;
  return ev;
}

inline std::string instance_metrics_json(std::size_t index, const InstanceMetrics& m) {
  return "{\"index\":" + std::to_string(index) + ",\"accuracy\":" + format_exact(m.accuracy) +
         ",\"cc\":" + std::to_string(m.cc) + ",\"isolated\":" + format_exact(m.isolated) +
         ",\"saturated\":" + format_exact(m.saturated) + ",\"link_validity\":" + format_exact(m.link_validity) +
         ",\"pred_edges\":" + std::to_string(m.pred_edges) + ",\"label_edges\":" + std::to_string(m.label_edges) + "}";
}

}  // namespace camlab::metrics

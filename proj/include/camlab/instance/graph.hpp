// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "camlab/core/error.hpp"
#include "camlab/core/rng.hpp"

namespace camlab {

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

using Coords = std::vector<Point>;

inline double euclid(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Dense symmetric 0/1 adjacency over n nodes.
class Adjacency {
 public:
  Adjacency() = default;
  explicit Adjacency(std::size_t n) : n_(n), bits_(n * n, 0) {}

  std::size_t size() const { return n_; }
  bool operator()(std::size_t i, std::size_t j) const { return bits_[i * n_ + j] != 0; }

  void set(std::size_t i, std::size_t j, bool on = true) {
    bits_[i * n_ + j] = on;
    bits_[j * n_ + i] = on;
  }

  /// Writes a single directed entry; used only to build/test asymmetric inputs.
  void set_directed(std::size_t i, std::size_t j, bool on) { bits_[i * n_ + j] = on; }

  std::size_t degree(std::size_t i) const {
    std::size_t d = 0;
    for (std::size_t j = 0; j < n_; ++j) d += bits_[i * n_ + j];
    return d;
  }

  std::size_t edge_count() const {
    std::size_t e = 0;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j) e += bits_[i * n_ + j];
    return e;
  }

  bool is_symmetric() const {
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j)
        if (bits_[i * n_ + j] != bits_[j * n_ + i]) return false;
    return true;
  }

  bool has_self_loops() const {
    for (std::size_t i = 0; i < n_; ++i)
      if (bits_[i * n_ + i]) return true;
    return false;
  }

  /// Strict upper triangle in row-major order, '0'/'1'.
  std::string upper_bits() const {
    std::string s;
    s.reserve(n_ * (n_ - (n_ ? 1 : 0)) / 2);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j) s += bits_[i * n_ + j] ? '1' : '0';
    return s;
  }

  static Adjacency from_upper_bits(std::size_t n, const std::string& s) {
    if (s.size() != n * (n - (n ? 1 : 0)) / 2)
      throw ValidationError("label bit string has length " + std::to_string(s.size()) + ", expected " +
                            std::to_string(n * (n - 1) / 2));
    Adjacency a(n);
    std::size_t p = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j, ++p) {
        if (s[p] != '0' && s[p] != '1') throw ValidationError("label bit string contains '" + std::string(1, s[p]) + "'");
        a.set(i, j, s[p] == '1');
      }
    return a;
  }

  /// Relabels nodes: result(perm[i], perm[j]) = this(i, j).
  Adjacency permuted(const std::vector<std::size_t>& perm) const {
    Adjacency a(n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) a.bits_[perm[i] * n_ + perm[j]] = bits_[i * n_ + j];
    return a;
  }

  bool operator==(const Adjacency&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Index pairs (i<j) of the strict upper triangle, row-major.
inline std::vector<std::pair<std::size_t, std::size_t>> upper_pairs(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(n * (n > 0 ? n - 1 : 0) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) out.emplace_back(i, j);
  return out;
}

/// n i.i.d. uniform points in the unit square.
inline Coords sample_coords(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ValidationError("sample_coords: need at least one node");
  Rng rng(seed);
  Coords c(n);
  for (auto& p : c) {
    p.x = rng.uniform();
    p.y = rng.uniform();
  }
  return c;
}

inline Coords permute_coords(const Coords& c, const std::vector<std::size_t>& perm) {
  Coords out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) out[perm[i]] = c[i];
  return out;
}

struct FeasibleEdge {
  std::size_t u = 0;
  std::size_t v = 0;
  double length = 0.0;
  bool operator==(const FeasibleEdge&) const = default;
};

/// Every pair within range (length <= d, closed), ordered by length and then
/// by (u, v).
inline std::vector<FeasibleEdge> feasibility_graph(const Coords& coords, double d) {
  if (!(d > 0.0)) throw ValidationError("feasibility_graph: range d must be positive");
  std::vector<FeasibleEdge> edges;
  for (std::size_t i = 0; i < coords.size(); ++i)
    for (std::size_t j = i + 1; j < coords.size(); ++j) {
      const double len = euclid(coords[i], coords[j]);
      if (len <= d) edges.push_back({i, j, len});
    }
  std::stable_sort(edges.begin(), edges.end(), [](const FeasibleEdge& a, const FeasibleEdge& b) {
    if (a.length != b.length) return a.length < b.length;
    return a.u != b.u ? a.u < b.u : a.v < b.v;
  });
  return edges;
}

inline Adjacency feasibility_adjacency(const Coords& coords, double d) {
  Adjacency a(coords.size());
  for (const auto& e : feasibility_graph(coords, d)) a.set(e.u, e.v);
  return a;
}

/// Disjoint-set forest with path halving and union by size.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1), sets_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    --sets_;
    return true;
  }

  std::size_t sets() const { return sets_; }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
  std::size_t sets_;
};

struct Components {
  std::size_t count = 0;
  std::vector<std::size_t> labels;  // dense ids in order of first appearance
};

/// Component labeling; isolated nodes count as their own component.
inline Components connected_components(const Adjacency& adj) {
  if (!adj.is_symmetric()) throw ValidationError("connected_components: adjacency is not symmetric");
  const std::size_t n = adj.size();
  UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (adj(i, j)) uf.unite(i, j);
  Components out;
  out.labels.assign(n, 0);
  std::vector<std::size_t> root_id(n, SIZE_MAX);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = uf.find(i);
    if (root_id[r] == SIZE_MAX) root_id[r] = out.count++;
    out.labels[i] = root_id[r];
  }
  return out;
}

}  // namespace camlab

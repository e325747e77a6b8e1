// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "camlab/instance/graph.hpp"

namespace camlab {

// Objective: among subgraphs of the feasibility graph with max degree <= k,
// minimize (components, edges) lexicographically.
//
// Forest lemma: if an optimal subgraph has a cycle, dropping any cycle edge
// keeps the component count and lowers the edge count, so every optimum is a
// forest and edges = n - components. The search therefore only ever adds
// edges that join two different components.
//
// With k = 2 and d large enough the problem contains Hamiltonian path, so it
// is NP-hard; the exact search is limited to kMaxExactNodes.

inline constexpr std::size_t kMaxExactNodes = 24;
inline constexpr std::size_t kMaxOracleEdges = 21;

struct SolveResult {
  Adjacency adjacency;
  std::size_t components = 0;
  std::size_t edge_count = 0;
  std::vector<std::size_t> degrees;
};

namespace detail {

inline SolveResult make_result(std::size_t n, const std::vector<FeasibleEdge>& edges, const std::vector<bool>& chosen) {
  SolveResult r;
  r.adjacency = Adjacency(n);
  for (std::size_t e = 0; e < edges.size(); ++e)
    if (chosen[e]) r.adjacency.set(edges[e].u, edges[e].v);
  r.components = connected_components(r.adjacency).count;
  r.edge_count = r.adjacency.edge_count();
  r.degrees.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.degrees[i] = r.adjacency.degree(i);
  return r;
}

inline void check_solver_args(const Coords& coords, int k, double d) {
  if (coords.empty()) throw ValidationError("solver: instance has no nodes");
  if (k < 1) throw ValidationError("solver: degree cap k must be >= 1");
  if (!(d > 0.0)) throw ValidationError("solver: range d must be positive");
}

/// Include-first depth-first branch and bound over the ordered feasible edges.
class BranchAndBound {
 public:
  BranchAndBound(std::size_t n, std::vector<FeasibleEdge> edges, int k)
      : n_(n), k_(static_cast<std::size_t>(k)), edges_(std::move(edges)), chosen_(edges_.size(), false),
        best_chosen_(edges_.size(), false), best_c_(n + 1) {}

  void run() {
    State s{std::vector<std::size_t>(n_), std::vector<std::size_t>(n_, 0), n_};
    for (std::size_t i = 0; i < n_; ++i) s.comp[i] = i;
    search(0, s);
  }

  const std::vector<bool>& best() const { return best_chosen_; }
  std::uint64_t nodes_visited() const { return visited_; }

 private:
  // Component ids are relabelled eagerly on merge; n <= 24 keeps that cheap
  // and makes the state trivially copyable for backtracking.
  struct State {
    std::vector<std::size_t> comp;
    std::vector<std::size_t> degree;
    std::size_t components;
  };

  // Optimistic component count for any completion of `s` using edges [e, E).
  // Two relaxations are combined per component C of (chosen + undecided):
  // connectivity alone gives >= 1, and each further merge consumes a unit of
  // remaining degree capacity at two endpoints, so
  //   comps(C) >= max(1, current_comps(C) - floor(sum_v min(cap_v, avail_v) / 2)).
  std::size_t lower_bound(std::size_t e, const State& s) const {
    UnionFind uf(n_);
    for (std::size_t i = 0; i < n_; ++i) uf.unite(i, s.comp[i]);
    std::vector<std::size_t> avail(n_, 0);
    for (std::size_t j = e; j < edges_.size(); ++j) {
      const auto& ed = edges_[j];
      if (s.comp[ed.u] == s.comp[ed.v]) continue;
      if (s.degree[ed.u] >= k_ || s.degree[ed.v] >= k_) continue;
      uf.unite(ed.u, ed.v);
      ++avail[ed.u];
      ++avail[ed.v];
    }
    std::vector<std::size_t> cur(n_, 0), cap(n_, 0);
    std::vector<bool> seen_comp(n_, false);
    for (std::size_t i = 0; i < n_; ++i) {
      const auto r = uf.find(i);
      if (!seen_comp[s.comp[i]]) {
        seen_comp[s.comp[i]] = true;
        ++cur[r];
      }
      cap[r] += std::min(k_ - std::min(k_, s.degree[i]), avail[i]);
    }
    std::size_t bound = 0;
    for (std::size_t r = 0; r < n_; ++r) {
      if (cur[r] == 0) continue;
      const std::size_t merges = cap[r] / 2;
      bound += cur[r] > merges ? std::max<std::size_t>(1, cur[r] - merges) : 1;
    }
    return bound;
  }

  void search(std::size_t e, State& s) {
    ++visited_;
    if (lower_bound(e, s) >= best_c_) return;
    if (e == edges_.size()) {
      best_c_ = s.components;
      best_chosen_ = chosen_;
      return;
    }
    const auto& ed = edges_[e];
    const std::size_t cu = s.comp[ed.u], cv = s.comp[ed.v];
    if (cu != cv && s.degree[ed.u] < k_ && s.degree[ed.v] < k_) {
      State next = s;
      for (auto& c : next.comp)
        if (c == cv) c = cu;
      ++next.degree[ed.u];
      ++next.degree[ed.v];
      --next.components;
      chosen_[e] = true;
      search(e + 1, next);
      chosen_[e] = false;
    }
    search(e + 1, s);
  }

  std::size_t n_;
  std::size_t k_;
  std::vector<FeasibleEdge> edges_;
  std::vector<bool> chosen_;
  std::vector<bool> best_chosen_;
  std::size_t best_c_;
  std::uint64_t visited_ = 0;
};

}  // namespace detail

/// Exact solver. Among optimal adjacencies it returns the first one reached by
/// the include-first search over the `feasibility_graph` edge order.
inline SolveResult solve_exact(const Coords& coords, int k, double d) {
  detail::check_solver_args(coords, k, d);
  if (coords.size() > kMaxExactNodes)
    throw CapacityError("solve_exact: n = " + std::to_string(coords.size()) + " exceeds the exactness limit of " +
                        std::to_string(kMaxExactNodes) + " nodes; lower n");
  auto edges = feasibility_graph(coords, d);
  detail::BranchAndBound bb(coords.size(), edges, k);
  bb.run();
  return detail::make_result(coords.size(), edges, bb.best());
}

/// Exhaustive enumeration of all 2^|E| feasible-edge subsets, visited in the
/// same order as the include-first search. Verification only.
inline SolveResult brute_force_oracle(const Coords& coords, int k, double d) {
  detail::check_solver_args(coords, k, d);
  const auto edges = feasibility_graph(coords, d);
  const std::size_t m = edges.size();
  if (m > kMaxOracleEdges)
    throw CapacityError("brute_force_oracle: " + std::to_string(m) + " feasible edges exceeds the limit of " +
                        std::to_string(kMaxOracleEdges));
  const std::size_t n = coords.size();
  const auto ku = static_cast<std::size_t>(k);
  std::size_t best_c = n + 1, best_e = 0;
  std::uint64_t best_mask = 0;
  // Bit (m-1-i) stands for edge i, so counting down is include-first order.
  for (std::uint64_t mask = (std::uint64_t{1} << m);;) {
    if (mask-- == 0) break;
    std::vector<std::size_t> deg(n, 0);
    bool ok = true;
    UnionFind uf(n);
    for (std::size_t i = 0; i < m && ok; ++i) {
      if (!((mask >> (m - 1 - i)) & 1)) continue;
      ok = ++deg[edges[i].u] <= ku && ++deg[edges[i].v] <= ku;
      uf.unite(edges[i].u, edges[i].v);
    }
    if (!ok) continue;
    const std::size_t c = uf.sets();
    const auto ecount = static_cast<std::size_t>(std::popcount(mask));
    if (c < best_c || (c == best_c && ecount < best_e)) {
      best_c = c;
      best_e = ecount;
      best_mask = mask;
    }
  }
  std::vector<bool> chosen(m, false);
  for (std::size_t i = 0; i < m; ++i) chosen[i] = (best_mask >> (m - 1 - i)) & 1;
  return detail::make_result(n, edges, chosen);
}

}  // namespace camlab

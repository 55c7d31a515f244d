#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <mutex>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "gclpr/error.hpp"

namespace gclpr::graphs {

inline constexpr int kUnreachable = -1;

/// Undirected graph with string node ids, positive edge weights, no
/// self-loops and no duplicate edges. Node indices follow insertion order,
/// adjacency lists are kept sorted by neighbor index, so all traversals are
/// deterministic.
class Graph {
 public:
  int add_node(const std::string& id) {
    auto it = index_.find(id);
    if (it != index_.end()) return it->second;
    const int idx = static_cast<int>(ids_.size());
    ids_.push_back(id);
    index_.emplace(id, idx);
    adj_.emplace_back();
    return idx;
  }

  /// Adds an undirected edge, creating missing nodes. Throws on self-loops,
  /// duplicate edges, and non-positive or non-finite weights.
  void add_edge(const std::string& a, const std::string& b, double weight = 1.0) {
    if (a == b) throw Error("Graph::add_edge: self-loop on '" + a + "'");
    if (!std::isfinite(weight)) throw NonFiniteError("Graph::add_edge: non-finite weight");
    if (weight <= 0.0) throw Error("Graph::add_edge: weight must be positive");
    const int ia = add_node(a);
    const int ib = add_node(b);
    if (find_slot(ia, ib) >= 0) {
      throw DataError("Graph::add_edge: duplicate edge '" + a + "'-'" + b + "'");
    }
    insert_sorted(ia, ib, weight);
    insert_sorted(ib, ia, weight);
    ++edge_count_;
  }

  static Graph from_edges(const std::vector<std::tuple<std::string, std::string, double>>& edges) {
    Graph g;
    for (const auto& [a, b, w] : edges) g.add_edge(a, b, w);
    return g;
  }

  std::size_t node_count() const { return ids_.size(); }
  std::size_t edge_count() const { return edge_count_; }

  int index_of(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? -1 : it->second;
  }

  int require_index(const std::string& id) const {
    const int idx = index_of(id);
    if (idx < 0) throw UnknownNodeError("unknown graph node '" + id + "'");
    return idx;
  }

  const std::string& id_of(std::size_t idx) const { return ids_[idx]; }
  const std::vector<std::string>& ids() const { return ids_; }

  std::span<const std::pair<int, double>> neighbors(std::size_t v) const {
    return adj_[v];
  }

  std::size_t degree(std::size_t v) const { return adj_[v].size(); }

  double edge_weight(int a, int b) const {
    const int slot = find_slot(a, b);
    return slot < 0 ? 0.0 : adj_[static_cast<std::size_t>(a)][static_cast<std::size_t>(slot)].second;
  }

 private:
  int find_slot(int a, int b) const {
    const auto& row = adj_[static_cast<std::size_t>(a)];
    auto it = std::lower_bound(row.begin(), row.end(), b,
                               [](const std::pair<int, double>& e, int key) { return e.first < key; });
    if (it != row.end() && it->first == b) return static_cast<int>(it - row.begin());
    return -1;
  }

  void insert_sorted(int a, int b, double w) {
    auto& row = adj_[static_cast<std::size_t>(a)];
    auto it = std::lower_bound(row.begin(), row.end(), b,
                               [](const std::pair<int, double>& e, int key) { return e.first < key; });
    row.insert(it, {b, w});
  }

  std::vector<std::string> ids_;
  std::unordered_map<std::string, int> index_;
  std::vector<std::vector<std::pair<int, double>>> adj_;
  std::size_t edge_count_ = 0;
};

/// Hop counts (unweighted shortest path lengths) from one source to all
/// nodes; kUnreachable marks disconnected targets.
inline std::vector<int> bfs_from(const Graph& g, int source) {
  const std::size_t n = g.node_count();
  if (source < 0 || static_cast<std::size_t>(source) >= n)
    throw UnknownNodeError("bfs_from: source index out of range");
  std::vector<int> hops(n, kUnreachable);
  std::deque<int> queue{source};
  hops[static_cast<std::size_t>(source)] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (const auto& [v, w] : g.neighbors(static_cast<std::size_t>(u))) {
      if (hops[static_cast<std::size_t>(v)] == kUnreachable) {
        hops[static_cast<std::size_t>(v)] = hops[static_cast<std::size_t>(u)] + 1;
        queue.push_back(v);
      }
    }
  }
  return hops;
}

/// Precomputed hop rows for a fixed set of source nodes.
class HopDistanceTable {
 public:
  HopDistanceTable(const Graph& g, std::span<const std::string> sources) : g_(&g) {
    for (const std::string& s : sources) {
      const int idx = g.require_index(s);
      if (!rows_.count(idx)) rows_.emplace(idx, bfs_from(g, idx));
    }
  }

  /// Hops from a precomputed source to any node; kUnreachable if unreachable.
  int hops(const std::string& from, const std::string& to) const {
    const int f = g_->require_index(from);
    const int t = g_->require_index(to);
    auto it = rows_.find(f);
    if (it == rows_.end()) throw UnknownNodeError("HopDistanceTable: '" + from + "' is not a source");
    return it->second[static_cast<std::size_t>(t)];
  }

 private:
  const Graph* g_;
  std::unordered_map<int, std::vector<int>> rows_;
};

/// Lazily memoized hop lookups, safe for concurrent readers. Each BFS row is
/// computed at most once per source.
class HopCache {
 public:
  explicit HopCache(const Graph& g) : g_(&g) {}

  const Graph& graph() const { return *g_; }

  int hops(int from, int to) const {
    const std::size_t n = g_->node_count();
    if (from < 0 || to < 0 || static_cast<std::size_t>(from) >= n ||
        static_cast<std::size_t>(to) >= n)
      throw UnknownNodeError("HopCache::hops: node index out of range");
    std::lock_guard<std::mutex> lock(mu_);
    auto it = rows_.find(from);
    if (it == rows_.end()) it = rows_.emplace(from, bfs_from(*g_, from)).first;
    return it->second[static_cast<std::size_t>(to)];
  }

 private:
  const Graph* g_;
  mutable std::mutex mu_;
  mutable std::unordered_map<int, std::vector<int>> rows_;
};

struct PageRankResult {
  std::vector<double> scores;
  bool converged = false;
  int iterations = 0;
};

/// Weighted PageRank with uniform teleport. Mass from isolated (dangling)
/// nodes is redistributed uniformly. Stops when the L1 change drops below
/// tol; otherwise returns the last iterate with converged = false.
inline PageRankResult pagerank(const Graph& g, double damping = 0.85, double tol = 1e-10,
                               int max_iter = 200) {
  const std::size_t n = g.node_count();
  PageRankResult out;
  if (n == 0) return out;
  if (!(damping >= 0.0 && damping < 1.0)) throw Error("pagerank: damping must be in [0,1)");
  std::vector<double> out_weight(n, 0.0);
  for (std::size_t u = 0; u < n; ++u)
    for (const auto& [v, w] : g.neighbors(u)) out_weight[u] += w;
  std::vector<double> pr(n, 1.0 / static_cast<double>(n));
  std::vector<double> next(n, 0.0);
  const double teleport = (1.0 - damping) / static_cast<double>(n);
  for (int iter = 1; iter <= max_iter; ++iter) {
    double dangling = 0.0;
    for (std::size_t u = 0; u < n; ++u)
      if (out_weight[u] == 0.0) dangling += pr[u];
    const double base = teleport + damping * dangling / static_cast<double>(n);
    std::fill(next.begin(), next.end(), base);
    for (std::size_t u = 0; u < n; ++u) {
      if (out_weight[u] == 0.0) continue;
      const double mass = damping * pr[u] / out_weight[u];
      for (const auto& [v, w] : g.neighbors(u)) next[static_cast<std::size_t>(v)] += mass * w;
    }
    double l1 = 0.0;
    for (std::size_t v = 0; v < n; ++v) l1 += std::abs(next[v] - pr[v]);
    pr.swap(next);
    out.iterations = iter;
    if (l1 < tol) {
      out.converged = true;
      break;
    }
  }
  out.scores = std::move(pr);
  return out;
}

/// Betweenness centrality on unweighted shortest paths (Brandes). Each
/// unordered pair is counted once and endpoints are excluded, so the
/// undirected accumulation is halved.
inline std::vector<double> betweenness(const Graph& g) {
  const std::size_t n = g.node_count();
  std::vector<double> bc(n, 0.0);
  std::vector<int> dist(n), stack_order;
  std::vector<double> sigma(n), delta(n);
  std::vector<std::vector<int>> preds(n);
  stack_order.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), -1);
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(delta.begin(), delta.end(), 0.0);
    for (auto& p : preds) p.clear();
    stack_order.clear();
    dist[s] = 0;
    sigma[s] = 1.0;
    std::deque<int> queue{static_cast<int>(s)};
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      stack_order.push_back(u);
      for (const auto& [v, w] : g.neighbors(static_cast<std::size_t>(u))) {
        const std::size_t vi = static_cast<std::size_t>(v);
        if (dist[vi] < 0) {
          dist[vi] = dist[static_cast<std::size_t>(u)] + 1;
          queue.push_back(v);
        }
        if (dist[vi] == dist[static_cast<std::size_t>(u)] + 1) {
          sigma[vi] += sigma[static_cast<std::size_t>(u)];
          preds[vi].push_back(u);
        }
      }
    }
    for (std::size_t k = stack_order.size(); k > 0; --k) {
      const int w = stack_order[k - 1];
      const std::size_t wi = static_cast<std::size_t>(w);
      for (int p : preds[wi]) {
        const std::size_t pi = static_cast<std::size_t>(p);
        delta[pi] += sigma[pi] / sigma[wi] * (1.0 + delta[wi]);
      }
      if (wi != s) bc[wi] += delta[wi];
    }
  }
  for (double& v : bc) v *= 0.5;
  return bc;
}

/// Iterates y_{k+1}(v) = retain*base(v) + mix*(row-normalized weighted
/// average of y_k over neighbors of v); isolated nodes pass their own value
/// through the mixing term. retain + mix must equal 1.
inline std::vector<double> diffuse(const Graph& g, std::span<const double> base,
                                   double retain = 0.7, double mix = 0.3, int steps = 7) {
  const std::size_t n = g.node_count();
  if (base.size() != n) throw DimensionError("diffuse: base size must match node count");
  if (std::abs(retain + mix - 1.0) > 1e-12) throw Error("diffuse: retain + mix must be 1");
  if (steps < 0) throw Error("diffuse: steps must be non-negative");
  std::vector<double> row_sum(n, 0.0);
  for (std::size_t v = 0; v < n; ++v)
    for (const auto& [u, w] : g.neighbors(v)) row_sum[v] += w;
  std::vector<double> cur(base.begin(), base.end());
  std::vector<double> next(n, 0.0);
  for (int k = 0; k < steps; ++k) {
    for (std::size_t v = 0; v < n; ++v) {
      double avg = cur[v];
      if (row_sum[v] > 0.0) {
        avg = 0.0;
        for (const auto& [u, w] : g.neighbors(v)) avg += w * cur[static_cast<std::size_t>(u)];
        avg /= row_sum[v];
      }
      next[v] = retain * base[v] + mix * avg;
    }
    cur.swap(next);
  }
  return cur;
}

}  // namespace gclpr::graphs

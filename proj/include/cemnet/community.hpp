#pragma once
// Louvain community detection, pairwise community F1 and block-density
// estimation.

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cemnet/graph.hpp"

namespace cemnet {

/// One community label per user, dense integers 0..G-1.
using GroupAssignment = std::vector<int>;

/// Undirected weighted graph. Each edge i != j is listed in both adjacency
/// lists; a self-loop is listed once and carries A_ii.
struct WeightedGraph {
  std::vector<std::vector<std::pair<std::size_t, double>>> adj;

  explicit WeightedGraph(std::size_t n = 0) : adj(n) {}
  std::size_t size() const { return adj.size(); }

  void add_edge(std::size_t a, std::size_t b, double w = 1.0) {
    adj[a].emplace_back(b, w);
    if (a != b) adj[b].emplace_back(a, w);
  }
};

/// Union of both directions, weight 1 per connected pair.
inline WeightedGraph symmetrize(const InferredGraph& graph) {
  WeightedGraph out(graph.num_nodes());
  for (const auto& e : graph.sorted_edges()) {
    if (e.src < e.dst || !graph.has_edge(e.dst, e.src)) {
      out.add_edge(static_cast<std::size_t>(e.src), static_cast<std::size_t>(e.dst));
    }
  }
  return out;
}

/// Relabels to 0..G-1 in order of first appearance.
inline GroupAssignment densify(const std::vector<int>& labels) {
  std::unordered_map<int, int> remap;
  GroupAssignment out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = remap.try_emplace(labels[i], static_cast<int>(remap.size()));
    out[i] = it->second;
  }
  return out;
}

inline int num_groups(const GroupAssignment& labels) {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

inline double modularity(const WeightedGraph& g, const std::vector<int>& community) {
  double m2 = 0.0;
  std::unordered_map<int, double> tot, in;
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (auto [j, w] : g.adj[i]) {
      m2 += w;
      tot[community[i]] += w;
      if (community[i] == community[j]) in[community[i]] += w;
    }
  }
  if (m2 <= 0.0) return 0.0;
  double q = 0.0;
  for (auto& [c, t] : tot) q += in[c] / m2 - (t / m2) * (t / m2);
  return q;
}

struct CommunityResult {
  GroupAssignment labels;
  double modularity = 0.0;
  /// Modularity of the original graph after each aggregation level.
  std::vector<double> level_modularity;
};

namespace detail {

/// One local-moving phase. Returns true when any node changed community.
inline bool louvain_move_nodes(const WeightedGraph& g, std::vector<int>& community, std::mt19937_64& rng,
                               double resolution) {
  const std::size_t n = g.size();
  std::vector<double> degree(n, 0.0), tot(n, 0.0);
  double m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto [j, w] : g.adj[i]) degree[i] += w;
    m2 += degree[i];
    tot[static_cast<std::size_t>(community[i])] += degree[i];
  }
  if (m2 <= 0.0) return false;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<double> link(n, 0.0);
  std::vector<std::size_t> touched;
  bool any_move = false;
  for (bool moved = true; moved;) {
    moved = false;
    for (std::size_t i : order) {
      const auto current = static_cast<std::size_t>(community[i]);
      touched.clear();
      for (auto [j, w] : g.adj[i]) {
        if (j == i) continue;
        const auto c = static_cast<std::size_t>(community[j]);
        if (link[c] == 0.0) touched.push_back(c);
        link[c] += w;
      }
      tot[current] -= degree[i];
      std::size_t best = current;
      double best_gain = link[current] - resolution * tot[current] * degree[i] / m2;
      std::sort(touched.begin(), touched.end());
      for (std::size_t c : touched) {
        const double gain = link[c] - resolution * tot[c] * degree[i] / m2;
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best = c;
        }
      }
      tot[best] += degree[i];
      for (std::size_t c : touched) link[c] = 0.0;
      link[current] = 0.0;
      if (best != current) {
        community[i] = static_cast<int>(best);
        moved = true;
        any_move = true;
      }
    }
  }
  return any_move;
}

inline WeightedGraph aggregate(const WeightedGraph& g, const std::vector<int>& community, std::size_t groups) {
  std::vector<std::map<std::size_t, double>> acc(groups);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto ci = static_cast<std::size_t>(community[i]);
    for (auto [j, w] : g.adj[i]) acc[ci][static_cast<std::size_t>(community[j])] += w;
  }
  WeightedGraph out(groups);
  for (std::size_t c = 0; c < groups; ++c)
    for (auto [d, w] : acc[c])
      if (c <= d) out.add_edge(c, d, w);  // c < d appears in both lists; c == d holds A_cc
  return out;
}

}  // namespace detail

/// Two-phase Louvain modularity maximisation. Node visiting order is
/// shuffled with `seed`; resolution is 1.
inline CommunityResult louvain(const WeightedGraph& graph, std::uint64_t seed) {
  if (graph.size() == 0) throw std::invalid_argument("louvain needs at least one node");
  std::mt19937_64 rng(seed);
  const std::size_t n = graph.size();
  std::vector<int> membership(n);
  std::iota(membership.begin(), membership.end(), 0);

  CommunityResult result;
  WeightedGraph level = graph;
  while (true) {
    std::vector<int> community(level.size());
    std::iota(community.begin(), community.end(), 0);
    const bool moved = detail::louvain_move_nodes(level, community, rng, 1.0);
    if (!moved) break;
    community = densify(community);
    for (auto& m : membership) m = community[static_cast<std::size_t>(m)];
    result.level_modularity.push_back(modularity(graph, membership));
    const auto groups = static_cast<std::size_t>(num_groups(community));
    if (groups == level.size()) break;
    level = detail::aggregate(level, community, groups);
  }
  result.labels = densify(membership);
  result.modularity = modularity(graph, result.labels);
  return result;
}

inline CommunityResult louvain(const InferredGraph& graph, std::uint64_t seed) {
  return louvain(symmetrize(graph), seed);
}

struct PairwiseScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// F1 of the "same community" relation over all unordered user pairs.
inline PairwiseScores pairwise_f1(const GroupAssignment& predicted, const GroupAssignment& truth) {
  if (predicted.size() != truth.size()) {
    throw std::invalid_argument("label vectors cover different user sets (" + std::to_string(predicted.size()) +
                                " vs " + std::to_string(truth.size()) + ")");
  }
  auto pairs = [](double k) { return k * (k - 1.0) / 2.0; };
  std::map<int, double> pred_sizes, true_sizes;
  std::map<std::pair<int, int>, double> joint;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    pred_sizes[predicted[i]] += 1;
    true_sizes[truth[i]] += 1;
    joint[{predicted[i], truth[i]}] += 1;
  }
  double same_pred = 0, same_true = 0, both = 0;
  for (auto& [c, k] : pred_sizes) same_pred += pairs(k);
  for (auto& [c, k] : true_sizes) same_true += pairs(k);
  for (auto& [c, k] : joint) both += pairs(k);
  PairwiseScores s;
  s.precision = same_pred > 0 ? both / same_pred : 0.0;
  s.recall = same_true > 0 ? both / same_true : 0.0;
  s.f1 = same_pred + same_true > 0 ? 2.0 * both / (same_pred + same_true) : 0.0;
  return s;
}

/// Edge densities within and across communities over ordered pairs; nullopt
/// when a class of pairs is empty.
struct BlockDensities {
  std::optional<double> p;
  std::optional<double> q;
};

inline BlockDensities estimate_block_densities(const InferredGraph& graph, const GroupAssignment& labels) {
  if (labels.size() != graph.num_nodes()) throw std::invalid_argument("labels do not cover the graph's nodes");
  std::map<int, double> sizes;
  for (int c : labels) sizes[c] += 1;
  const double n = static_cast<double>(labels.size());
  double same_pairs = 0;
  for (auto& [c, k] : sizes) same_pairs += k * (k - 1);
  const double cross_pairs = n * (n - 1) - same_pairs;
  double same_edges = 0, cross_edges = 0;
  for (const auto& e : graph.edges()) {
    if (labels[static_cast<std::size_t>(e.src)] == labels[static_cast<std::size_t>(e.dst)]) {
      ++same_edges;
    } else {
      ++cross_edges;
    }
  }
  BlockDensities d;
  if (same_pairs > 0) d.p = same_edges / same_pairs;
  if (cross_pairs > 0) d.q = cross_edges / cross_pairs;
  return d;
}

}  // namespace cemnet

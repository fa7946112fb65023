#pragma once
// Directed graph over a dense user index space, shared by every module that
// produces or consumes an inferred (or ground-truth) follower graph.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace cemnet {

using UserId = std::int32_t;

/// Packs an ordered pair into a single hash key.
constexpr std::uint64_t pair_key(UserId src, UserId dst) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(src)) << 32) |
         static_cast<std::uint32_t>(dst);
}

struct Edge {
  UserId src = 0;
  UserId dst = 0;
  double score = 1.0;
};

/// Directed adjacency over N users with an optional per-edge score.
/// Edge (i, j) means j follows i, so posts of i reach j.
class InferredGraph {
 public:
  InferredGraph() = default;
  explicit InferredGraph(std::size_t num_nodes)
      : out_(num_nodes), in_(num_nodes) {}

  std::size_t num_nodes() const { return out_.size(); }
  std::size_t num_edges() const { return edges_.size(); }

  /// Adds i -> j; a repeated edge keeps the larger score. Self-loops are rejected.
  void add_edge(UserId src, UserId dst, double score = 1.0) {
    check_node(src);
    check_node(dst);
    if (src == dst) {
      throw std::invalid_argument("self-loop on node " + std::to_string(src));
    }
    auto [it, inserted] = index_.try_emplace(pair_key(src, dst), edges_.size());
    if (!inserted) {
      edges_[it->second].score = std::max(edges_[it->second].score, score);
      return;
    }
    edges_.push_back({src, dst, score});
    out_[src].push_back(dst);
    in_[dst].push_back(src);
  }

  bool has_edge(UserId src, UserId dst) const {
    return index_.find(pair_key(src, dst)) != index_.end();
  }

  double score(UserId src, UserId dst) const {
    auto it = index_.find(pair_key(src, dst));
    return it == index_.end() ? 0.0 : edges_[it->second].score;
  }

  /// Edges in insertion order.
  const std::vector<Edge>& edges() const { return edges_; }

  std::vector<Edge> sorted_edges() const {
    std::vector<Edge> out = edges_;
    std::sort(out.begin(), out.end(), [](const Edge& a, const Edge& b) {
      return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    return out;
  }

  const std::vector<UserId>& out_neighbors(UserId node) const { return out_[node]; }
  const std::vector<UserId>& in_neighbors(UserId node) const { return in_[node]; }

 private:
  void check_node(UserId node) const {
    if (node < 0 || static_cast<std::size_t>(node) >= out_.size()) {
      throw std::out_of_range("node " + std::to_string(node) + " outside graph of " +
                              std::to_string(out_.size()) + " nodes");
    }
  }

  std::vector<Edge> edges_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::vector<std::vector<UserId>> out_;
  std::vector<std::vector<UserId>> in_;
};

/// Complete directed graph (every ordered pair i != j).
inline InferredGraph complete_graph(std::size_t n) {
  InferredGraph g(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) g.add_edge(static_cast<UserId>(i), static_cast<UserId>(j));
  return g;
}

}  // namespace cemnet

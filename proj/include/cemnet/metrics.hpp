#pragma once
// Edge-prediction scores against a ground-truth graph and the network
// statistics reported for inferred graphs.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "cemnet/community.hpp"
#include "cemnet/graph.hpp"

namespace cemnet {

/// A score for every ordered pair i != j. Listed pairs carry their own
/// score; every other pair gets a default, which may depend on whether both
/// ends share a label (SBM priors).
struct PairScores {
  std::size_t num_users = 0;
  std::vector<Edge> listed;
  double default_score = 0.0;
  /// When non-empty, unlisted pairs score default_same / default_cross.
  GroupAssignment labels;
  double default_same = 0.0;
  double default_cross = 0.0;

  double unlisted(UserId i, UserId j) const {
    if (labels.empty()) return default_score;
    return labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)] ? default_same : default_cross;
  }
};

/// Edge indicator scores: 1 on edges, 0 elsewhere.
inline PairScores indicator_scores(const InferredGraph& graph) {
  PairScores s;
  s.num_users = graph.num_nodes();
  for (const auto& e : graph.edges()) s.listed.push_back({e.src, e.dst, 1.0});
  return s;
}

struct Confusion {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;
};

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
  Confusion confusion;
  std::optional<double> feasibility;
};

namespace detail {

inline void require_same_size(std::size_t a, std::size_t b) {
  if (a != b) {
    throw std::invalid_argument("graphs cover different user sets (" + std::to_string(a) + " vs " +
                                std::to_string(b) + " users)");
  }
}

}  // namespace detail

/// Mann-Whitney AUC over all ordered pairs, midranks for ties. Unlisted
/// pairs are aggregated by score level instead of being enumerated one by one.
inline double auc_score(const PairScores& scores, const InferredGraph& truth) {
  detail::require_same_size(scores.num_users, truth.num_nodes());
  const std::size_t n = truth.num_nodes();
  const double total = static_cast<double>(n) * static_cast<double>(n > 0 ? n - 1 : 0);
  const double positives = static_cast<double>(truth.num_edges());
  const double negatives = total - positives;
  if (positives == 0 || negatives == 0) return 0.5;

  // score -> (positives, negatives) at that score
  std::map<double, std::pair<double, double>> levels;
  std::unordered_map<std::uint64_t, double> listed;
  for (const auto& e : scores.listed) {
    if (e.src == e.dst) continue;
    listed[pair_key(e.src, e.dst)] = e.score;
  }
  for (const auto& [key, score] : listed) {
    const auto i = static_cast<UserId>(key >> 32), j = static_cast<UserId>(key & 0xffffffffu);
    auto& cell = levels[score];
    (truth.has_edge(i, j) ? cell.first : cell.second) += 1;
  }
  // Unlisted pairs: positives among them come from truth edges, the rest by
  // counting pairs per default level.
  std::map<double, double> unlisted_total;
  if (scores.labels.empty()) {
    unlisted_total[scores.default_score] = total;
  } else {
    std::map<int, double> sizes;
    for (int c : scores.labels) sizes[c] += 1;
    double same = 0;
    for (auto& [c, k] : sizes) same += k * (k - 1);
    unlisted_total[scores.default_same] += same;
    unlisted_total[scores.default_cross] += total - same;
  }
  for (const auto& [key, score] : listed) {
    const auto i = static_cast<UserId>(key >> 32), j = static_cast<UserId>(key & 0xffffffffu);
    unlisted_total[scores.unlisted(i, j)] -= 1;
  }
  std::map<double, double> unlisted_pos;
  for (const auto& e : truth.edges()) {
    if (listed.count(pair_key(e.src, e.dst))) continue;
    unlisted_pos[scores.unlisted(e.src, e.dst)] += 1;
  }
  for (auto& [score, count] : unlisted_total) {
    const double pos = unlisted_pos.count(score) ? unlisted_pos[score] : 0.0;
    auto& cell = levels[score];
    cell.first += pos;
    cell.second += count - pos;
  }

  // Sum of midranks of positives.
  double rank_base = 0.0, pos_rank_sum = 0.0;
  for (const auto& [score, cell] : levels) {
    const double k = cell.first + cell.second;
    if (k <= 0) continue;
    const double midrank = rank_base + (k + 1.0) / 2.0;
    pos_rank_sum += cell.first * midrank;
    rank_base += k;
  }
  return (pos_rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

/// Precision/recall/F1 of `inferred` against `truth`; AUC from `scores`
/// when given, otherwise from the edge indicator of `inferred`.
inline EvalReport classification_scores(const InferredGraph& inferred, const InferredGraph& truth,
                                        const std::optional<PairScores>& scores = std::nullopt) {
  detail::require_same_size(inferred.num_nodes(), truth.num_nodes());
  EvalReport r;
  for (const auto& e : inferred.edges()) (truth.has_edge(e.src, e.dst) ? r.confusion.tp : r.confusion.fp) += 1;
  r.confusion.fn = truth.num_edges() - r.confusion.tp;
  const std::uint64_t n = inferred.num_nodes();
  r.confusion.tn = n * (n > 0 ? n - 1 : 0) - r.confusion.tp - r.confusion.fp - r.confusion.fn;
  const double tp = static_cast<double>(r.confusion.tp);
  r.precision = inferred.num_edges() > 0 ? tp / static_cast<double>(inferred.num_edges()) : 0.0;
  r.recall = truth.num_edges() > 0 ? tp / static_cast<double>(truth.num_edges()) : 0.0;
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  r.auc = auc_score(scores ? *scores : indicator_scores(inferred), truth);
  return r;
}

struct GraphStats {
  std::size_t n_nodes = 0;
  std::size_t n_edges = 0;
  double avg_out_degree = 0.0;
  std::size_t max_out_degree = 0;
  std::size_t max_in_degree = 0;
  std::size_t diameter = 0;
  /// nullopt when no ordered pair is connected.
  std::optional<double> avg_shortest_path;
  /// Largest strongly connected component with at least two nodes.
  std::size_t max_scc_size = 0;
  double max_scc_fraction = 0.0;
};

/// Sizes of all strongly connected components (Tarjan, iterative).
inline std::vector<std::size_t> scc_sizes(const InferredGraph& g) {
  const std::size_t n = g.num_nodes();
  constexpr std::size_t unvisited = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> index(n, unvisited), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<UserId> stack;
  std::vector<std::size_t> sizes;
  std::size_t counter = 0;
  std::vector<std::pair<UserId, std::size_t>> call;  // node, next neighbour position
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != unvisited) continue;
    call.emplace_back(static_cast<UserId>(root), 0);
    while (!call.empty()) {
      auto& [v, pos] = call.back();
      const auto vi = static_cast<std::size_t>(v);
      if (pos == 0 && index[vi] == unvisited) {
        index[vi] = low[vi] = counter++;
        stack.push_back(v);
        on_stack[vi] = true;
      }
      const auto& out = g.out_neighbors(v);
      if (pos < out.size()) {
        const UserId w = out[pos++];
        const auto wi = static_cast<std::size_t>(w);
        if (index[wi] == unvisited) {
          call.emplace_back(w, 0);
        } else if (on_stack[wi]) {
          low[vi] = std::min(low[vi], index[wi]);
        }
        continue;
      }
      if (low[vi] == index[vi]) {
        std::size_t size = 0;
        UserId w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[static_cast<std::size_t>(w)] = false;
          ++size;
        } while (w != v);
        sizes.push_back(size);
      }
      const std::size_t done_low = low[vi];
      call.pop_back();
      if (!call.empty()) {
        const auto parent = static_cast<std::size_t>(call.back().first);
        low[parent] = std::min(low[parent], done_low);
      }
    }
  }
  return sizes;
}

inline GraphStats graph_stats(const InferredGraph& g) {
  GraphStats s;
  const std::size_t n = g.num_nodes();
  s.n_nodes = n;
  s.n_edges = g.num_edges();
  s.avg_out_degree = n > 0 ? static_cast<double>(s.n_edges) / static_cast<double>(n) : 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    s.max_out_degree = std::max(s.max_out_degree, g.out_neighbors(static_cast<UserId>(v)).size());
    s.max_in_degree = std::max(s.max_in_degree, g.in_neighbors(static_cast<UserId>(v)).size());
  }

  // BFS from every source.
  double path_sum = 0.0, reachable = 0.0;
  std::vector<std::size_t> dist(n);
  std::queue<UserId> frontier;
  constexpr std::size_t inf = std::numeric_limits<std::size_t>::max();
  for (std::size_t src = 0; src < n; ++src) {
    std::fill(dist.begin(), dist.end(), inf);
    dist[src] = 0;
    frontier.push(static_cast<UserId>(src));
    while (!frontier.empty()) {
      const UserId v = frontier.front();
      frontier.pop();
      for (UserId w : g.out_neighbors(v)) {
        auto& d = dist[static_cast<std::size_t>(w)];
        if (d != inf) continue;
        d = dist[static_cast<std::size_t>(v)] + 1;
        s.diameter = std::max(s.diameter, d);
        path_sum += static_cast<double>(d);
        reachable += 1;
        frontier.push(w);
      }
    }
  }
  if (reachable > 0) s.avg_shortest_path = path_sum / reachable;

  for (std::size_t size : scc_sizes(g))
    if (size >= 2) s.max_scc_size = std::max(s.max_scc_size, size);
  s.max_scc_fraction = n > 0 ? static_cast<double>(s.max_scc_size) / static_cast<double>(n) : 0.0;
  return s;
}

}  // namespace cemnet

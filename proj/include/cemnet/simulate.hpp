#pragma once
// Synthetic ground truth: a directed SBM follower graph and a Newsfeed/Wall
// diffusion trace generated over it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "cemnet/community.hpp"
#include "cemnet/graph.hpp"
#include "cemnet/trace.hpp"

namespace cemnet {

struct RateRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct SimConfig {
  std::size_t n_users = 100;
  std::size_t n_blocks = 7;
  /// Empty: random sizes, each at least min_block_size.
  std::vector<std::size_t> block_sizes;
  std::size_t min_block_size = 7;
  double p_intra = 0.06;
  double q_inter = 0.007;
  std::size_t feed_capacity = 10;
  std::size_t n_events = 100'000;
  /// Per-user rates, drawn uniformly from these ranges.
  RateRange post_rate{0.1, 0.2};
  RateRange repost_rate{0.5, 1.5};
  /// Trace timestamps are integer ticks: floor(time * ticks_per_unit).
  std::int64_t ticks_per_unit = 1000;

  void validate() const {
    auto prob = [](double v, const char* name) {
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
    };
    prob(p_intra, "p_intra");
    prob(q_inter, "q_inter");
    if (n_users == 0) throw std::invalid_argument("n_users must be positive");
    if (feed_capacity == 0) throw std::invalid_argument("feed_capacity must be positive");
    if (ticks_per_unit <= 0) throw std::invalid_argument("ticks_per_unit must be positive");
    if (block_sizes.empty()) {
      if (n_blocks == 0 || n_blocks > n_users) throw std::invalid_argument("n_blocks must lie in [1, n_users]");
      if (std::max<std::size_t>(min_block_size, 1) * n_blocks > n_users)
        throw std::invalid_argument("n_blocks * min_block_size exceeds n_users");
    } else {
      if (std::accumulate(block_sizes.begin(), block_sizes.end(), std::size_t{0}) != n_users)
        throw std::invalid_argument("block_sizes must sum to n_users");
      if (std::find(block_sizes.begin(), block_sizes.end(), std::size_t{0}) != block_sizes.end())
        throw std::invalid_argument("block sizes must be positive");
    }
    for (const auto* r : {&post_rate, &repost_rate})
      if (!(r->lo >= 0.0 && r->hi >= r->lo)) throw std::invalid_argument("rate ranges need 0 <= lo <= hi");
  }
};

struct SimOutput {
  Trace trace;
  InferredGraph truth_graph;
  GroupAssignment truth_labels;
};

/// Block sizes: the configured ones, or min_block_size each plus a random
/// composition of the remaining users (n_blocks - 1 uniform cut points).
inline std::vector<std::size_t> draw_block_sizes(const SimConfig& config, std::mt19937_64& rng) {
  if (!config.block_sizes.empty()) return config.block_sizes;
  const std::size_t base = std::max<std::size_t>(config.min_block_size, 1);
  const std::size_t spare = config.n_users - base * config.n_blocks;
  std::uniform_int_distribution<std::size_t> cut(0, spare);
  std::vector<std::size_t> cuts(config.n_blocks - 1);
  for (auto& c : cuts) c = cut(rng);
  std::sort(cuts.begin(), cuts.end());
  std::vector<std::size_t> sizes;
  std::size_t prev = 0;
  for (std::size_t c : cuts) {
    sizes.push_back(base + c - prev);
    prev = c;
  }
  sizes.push_back(base + spare - prev);
  return sizes;
}

/// Users are assigned to blocks in a shuffled order; edge i -> j (j follows
/// i) with p_intra inside a block and q_inter across.
inline std::pair<InferredGraph, GroupAssignment> generate_sbm_graph(const SimConfig& config, std::mt19937_64& rng) {
  config.validate();
  const auto sizes = draw_block_sizes(config, rng);
  std::vector<std::size_t> order(config.n_users);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  GroupAssignment labels(config.n_users);
  std::size_t pos = 0;
  for (std::size_t b = 0; b < sizes.size(); ++b)
    for (std::size_t k = 0; k < sizes[b]; ++k) labels[order[pos++]] = static_cast<int>(b);

  InferredGraph g(config.n_users);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < config.n_users; ++i)
    for (std::size_t j = 0; j < config.n_users; ++j) {
      if (i == j) continue;
      const double prob = labels[i] == labels[j] ? config.p_intra : config.q_inter;
      if (unit(rng) < prob) g.add_edge(static_cast<UserId>(i), static_cast<UserId>(j));
    }
  return {std::move(g), std::move(labels)};
}

enum class Action { Post, Repost };

struct Event {
  double time = 0.0;
  UserId uid = 0;
  Action action = Action::Post;
};

/// Two independent Poisson processes per user (post, repost), merged in
/// time order and cut at n_events. A zero rate switches that process off.
inline std::vector<Event> generate_events(const SimConfig& config, std::mt19937_64& rng) {
  config.validate();
  const std::size_t n = config.n_users;
  std::vector<double> rates(2 * n);
  for (std::size_t u = 0; u < n; ++u) {
    rates[2 * u] = std::uniform_real_distribution<double>(config.post_rate.lo, config.post_rate.hi)(rng);
    rates[2 * u + 1] = std::uniform_real_distribution<double>(config.repost_rate.lo, config.repost_rate.hi)(rng);
  }
  using Item = std::pair<double, std::size_t>;  // next time, process id
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  auto next_gap = [&](std::size_t proc) { return std::exponential_distribution<double>(rates[proc])(rng); };
  for (std::size_t proc = 0; proc < rates.size(); ++proc)
    if (rates[proc] > 0.0) heap.emplace(next_gap(proc), proc);

  std::vector<Event> events;
  events.reserve(config.n_events);
  while (events.size() < config.n_events && !heap.empty()) {
    auto [t, proc] = heap.top();
    heap.pop();
    events.push_back({t, static_cast<UserId>(proc / 2), proc % 2 == 0 ? Action::Post : Action::Repost});
    heap.emplace(t + next_gap(proc), proc);
  }
  return events;
}

inline std::string user_name(std::size_t u) { return "u" + std::to_string(u); }

/// Replays events over the follower graph. Posts and reposts go to every
/// follower's feed; a full feed evicts a random entry. A repost picks a feed
/// entry uniformly; a root the user already shared (or wrote) is re-picked
/// once and otherwise the event is skipped, as is a repost from an empty feed.
inline Trace run_diffusion(const InferredGraph& graph, const std::vector<Event>& events, const SimConfig& config,
                           std::mt19937_64& rng) {
  const std::size_t n = graph.num_nodes();
  TraceBuilder builder(TimeFormat::Ticks);
  for (std::size_t u = 0; u < n; ++u) builder.add_user(user_name(u));

  struct Row {
    std::size_t root;
    UserId uid;
  };
  std::vector<Row> rows;
  std::vector<std::vector<std::size_t>> feeds(n);
  std::vector<std::unordered_set<std::size_t>> shared(n);  // roots each user has written or shared

  auto deliver = [&](UserId from, std::size_t row) {
    for (UserId f : graph.out_neighbors(from)) {
      auto& feed = feeds[static_cast<std::size_t>(f)];
      if (feed.size() < config.feed_capacity) {
        feed.push_back(row);
      } else {
        feed[std::uniform_int_distribution<std::size_t>(0, feed.size() - 1)(rng)] = row;
      }
    }
  };

  for (const auto& ev : events) {
    const auto u = static_cast<std::size_t>(ev.uid);
    if (u >= n) throw std::out_of_range("event for unknown user " + std::to_string(u));
    const auto t = static_cast<std::int64_t>(std::floor(ev.time * static_cast<double>(config.ticks_per_unit)));
    const std::string pid = "p" + std::to_string(rows.size());
    if (ev.action == Action::Post) {
      builder.add(pid, t, user_name(u), std::nullopt);
      rows.push_back({rows.size(), ev.uid});
      shared[u].insert(rows.back().root);
      deliver(ev.uid, rows.size() - 1);
      continue;
    }
    auto& feed = feeds[u];
    if (feed.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, feed.size() - 1);
    std::size_t entry = feed[pick(rng)];
    if (shared[u].count(rows[entry].root)) {
      entry = feed[pick(rng)];
      if (shared[u].count(rows[entry].root)) continue;
    }
    builder.add(pid, t, user_name(u), "p" + std::to_string(entry));
    rows.push_back({rows[entry].root, ev.uid});
    shared[u].insert(rows.back().root);
    deliver(ev.uid, rows.size() - 1);
  }
  return builder.build();
}

inline SimOutput simulate(const SimConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto [graph, labels] = generate_sbm_graph(config, rng);
  auto events = generate_events(config, rng);
  SimOutput out;
  out.trace = run_diffusion(graph, events, config, rng);
  out.truth_graph = std::move(graph);
  out.truth_labels = std::move(labels);
  return out;
}

/// Moves `fraction` of the edges (chosen at random) to random non-edges.
inline InferredGraph rewire_edges(const InferredGraph& graph, double fraction, std::mt19937_64& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw std::invalid_argument("fraction must lie in [0, 1]");
  const std::size_t n = graph.num_nodes();
  auto edges = graph.sorted_edges();
  const auto n_move = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(edges.size())));
  if (n < 2 || edges.size() + n_move > n * (n - 1)) throw std::invalid_argument("graph too dense to rewire");
  std::shuffle(edges.begin(), edges.end(), rng);
  InferredGraph out(n);
  for (std::size_t k = n_move; k < edges.size(); ++k) out.add_edge(edges[k].src, edges[k].dst);
  std::uniform_int_distribution<UserId> node(0, static_cast<UserId>(n - 1));
  for (std::size_t k = 0; k < n_move;) {
    const UserId i = node(rng), j = node(rng);
    if (i == j || graph.has_edge(i, j) || out.has_edge(i, j)) continue;
    out.add_edge(i, j);
    ++k;
  }
  return out;
}

}  // namespace cemnet

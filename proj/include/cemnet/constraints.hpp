#pragma once
// Covering constraints that make a graph explain every episode, and the
// feasibility check of a graph against a set of episodes.

#include <cstddef>
#include <unordered_map>
#include <vector>

#include "cemnet/graph.hpp"
#include "cemnet/trace.hpp"

namespace cemnet {

/// sum over predecessors i of target j in one episode: sigma_ij >= 1.
/// Predecessors are indices into the PairTable.
struct FeasibilityConstraint {
  std::size_t episode = 0;
  UserId target = 0;
  std::vector<std::size_t> predecessors;
};

struct ConstraintSystem {
  std::vector<FeasibilityConstraint> rows;
  std::size_t num_variables = 0;
};

/// One row per (episode, non-author participant).
inline ConstraintSystem build_constraints(const std::vector<Episode>& episodes, const PairTable& pairs) {
  ConstraintSystem system;
  system.num_variables = pairs.size();
  for (std::size_t s = 0; s < episodes.size(); ++s) {
    const auto& users = episodes[s].ordered_users;
    for (std::size_t b = 1; b < users.size(); ++b) {
      FeasibilityConstraint row{s, users[b].uid, {}};
      row.predecessors.reserve(b);
      for (std::size_t a = 0; a < b; ++a) {
        auto k = pairs.find(users[a].uid, users[b].uid);
        if (!k) throw std::logic_error("pair table does not cover the episodes");
        row.predecessors.push_back(*k);
      }
      system.rows.push_back(std::move(row));
    }
  }
  return system;
}

struct FeasibilityReport {
  double fraction = 1.0;
  std::size_t n_feasible = 0;
  std::size_t n_episodes = 0;
  std::vector<bool> per_episode;
};

/// An episode is feasible iff every non-author participant has an in-edge
/// from someone earlier in the episode. Any such predecessor edge moves
/// strictly towards the author, so this is the same as asking for a
/// time-respecting path from the author to every participant.
inline FeasibilityReport check_feasibility(const InferredGraph& graph, const std::vector<Episode>& episodes) {
  FeasibilityReport report;
  report.n_episodes = episodes.size();
  report.per_episode.assign(episodes.size(), true);
  std::unordered_map<UserId, std::size_t> position;
  for (std::size_t s = 0; s < episodes.size(); ++s) {
    const auto& users = episodes[s].ordered_users;
    position.clear();
    for (std::size_t k = 0; k < users.size(); ++k) position.emplace(users[k].uid, k);
    bool feasible = true;
    for (std::size_t b = 1; b < users.size() && feasible; ++b) {
      const UserId j = users[b].uid;
      bool covered = false;
      if (static_cast<std::size_t>(j) < graph.num_nodes()) {
        const auto& in = graph.in_neighbors(j);
        if (in.size() < b) {
          for (UserId i : in) {
            auto it = position.find(i);
            if (it != position.end() && it->second < b) {
              covered = true;
              break;
            }
          }
        } else {
          for (std::size_t a = 0; a < b; ++a) {
            if (graph.has_edge(users[a].uid, j)) {
              covered = true;
              break;
            }
          }
        }
      }
      feasible = covered;
    }
    report.per_episode[s] = feasible;
    if (feasible) ++report.n_feasible;
  }
  report.fraction = episodes.empty() ? 1.0 : static_cast<double>(report.n_feasible) / episodes.size();
  return report;
}

}  // namespace cemnet

#pragma once
// Comparison methods: Star, Chain, an Independent Cascade EM (Saito) and an
// unconstrained EM over direct observations (Newman).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "cemnet/em.hpp"
#include "cemnet/graph.hpp"
#include "cemnet/log.hpp"
#include "cemnet/trace.hpp"

namespace cemnet {

/// author -> every other participant, over all episodes.
inline InferredGraph star_graph(const std::vector<Episode>& episodes, std::size_t num_users) {
  InferredGraph g(num_users);
  for (const auto& ep : episodes)
    for (std::size_t b = 1; b < ep.size(); ++b) g.add_edge(ep.author, ep.ordered_users[b].uid);
  return g;
}

/// u0 -> u1 -> ... -> uk along each episode's time order.
inline InferredGraph chain_graph(const std::vector<Episode>& episodes, std::size_t num_users) {
  InferredGraph g(num_users);
  for (const auto& ep : episodes)
    for (std::size_t b = 1; b < ep.size(); ++b) g.add_edge(ep.ordered_users[b - 1].uid, ep.ordered_users[b].uid);
  return g;
}

struct BaselineEmOptions {
  std::size_t max_iters = 100;
  double epsilon = 1e-3;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  /// Start every probability at this value instead of a random draw.
  std::optional<double> init;
  /// Saito only: add, to the denominator of kappa_ij, the episodes where i
  /// took part and j never did (the classic IC negative trials). Off, the
  /// denominator is M_ij alone and nearly every active pair clears 0.5.
  bool count_failures = true;
};

struct SaitoResult {
  PairTable pairs;
  /// Influence probability per pair, aligned with `pairs`.
  std::vector<double> kappa;
  std::size_t iterations = 0;
  bool converged = false;
  InferredGraph graph;
};

namespace detail {

inline double l2_change(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

inline void baseline_init(std::vector<double>& values, const BaselineEmOptions& options, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (double& v : values) v = options.init ? *options.init : unit(rng);
}

}  // namespace detail

/// IC-model EM. The candidate parents of j in an episode are everyone who
/// shared before j. E-step: parent i gets kappa_ij / P_j, with
/// P_j = 1 - prod(1 - kappa_kj) over the candidates. M-step: the summed
/// responsibilities over M_ij (plus failures when counted).
inline SaitoResult saito_em(const std::vector<Episode>& episodes, std::size_t num_users,
                            const BaselineEmOptions& options = {}) {
  SaitoResult r;
  r.pairs = pair_counts(episodes, num_users);
  const std::size_t n_pairs = r.pairs.size();
  const ConstraintSystem rows = build_constraints(episodes, r.pairs);

  std::vector<double> denom(n_pairs);
  for (std::size_t k = 0; k < n_pairs; ++k) denom[k] = r.pairs.m(k);
  if (options.count_failures) {
    // episodes per user, and episodes holding both ends of each active pair
    std::vector<double> joined(num_users, 0.0);
    std::vector<double> both(n_pairs, 0.0);
    for (const auto& ep : episodes) {
      for (const auto& u : ep.ordered_users) joined[static_cast<std::size_t>(u.uid)] += 1;
      for (std::size_t a = 0; a < ep.size(); ++a)
        for (std::size_t b = 0; b < ep.size(); ++b) {
          if (a == b) continue;
          if (auto k = r.pairs.find(ep.ordered_users[a].uid, ep.ordered_users[b].uid)) both[*k] += 1;
        }
    }
    for (std::size_t k = 0; k < n_pairs; ++k) denom[k] += joined[static_cast<std::size_t>(r.pairs.src(k))] - both[k];
  }

  std::mt19937_64 rng(options.seed);
  r.kappa.resize(n_pairs);
  detail::baseline_init(r.kappa, options, rng);
  std::vector<double> acc(n_pairs);
  while (r.iterations < options.max_iters) {
    ++r.iterations;
    std::fill(acc.begin(), acc.end(), 0.0);
    for (const auto& row : rows.rows) {
      double none = 1.0;
      for (std::size_t k : row.predecessors) none *= 1.0 - r.kappa[k];
      const double activated = std::max(1.0 - none, kProbClamp);
      for (std::size_t k : row.predecessors) acc[k] += r.kappa[k] / activated;
    }
    std::vector<double> next(n_pairs);
    for (std::size_t k = 0; k < n_pairs; ++k) next[k] = std::clamp(acc[k] / denom[k], 0.0, 1.0);
    const double change = detail::l2_change(next, r.kappa);
    r.kappa = std::move(next);
    if (change < options.epsilon) {
      r.converged = true;
      break;
    }
  }
  if (!r.converged) log().warn("saito: no convergence after {} iterations", r.iterations);
  r.graph = InferredGraph(num_users);
  for (std::size_t k = 0; k < n_pairs; ++k)
    if (r.kappa[k] > options.threshold) r.graph.add_edge(r.pairs.src(k), r.pairs.dst(k), r.kappa[k]);
  return r;
}

struct NewmanResult {
  PairTable pairs;
  /// Author -> reposter counts per pair, aligned with `pairs`.
  std::vector<std::uint32_t> successes;
  /// Posterior edge probability per pair.
  std::vector<double> q;
  double alpha = 0.0;
  double beta = 0.0;
  double rho = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  InferredGraph graph;
};

/// Newman's EM on direct observations: N_ij = M_ij trials, E_ij = episodes
/// where i is the author and j reshared. No feasibility constraint and no
/// hidden paths. Unobserved pairs sit at rho, the same convention as the
/// constrained EM.
inline NewmanResult newman_em(const std::vector<Episode>& episodes, std::size_t num_users,
                              const BaselineEmOptions& options = {}) {
  if (num_users < 2) throw std::invalid_argument("inference needs at least two users");
  NewmanResult r;
  r.pairs = pair_counts(episodes, num_users);
  const std::size_t n_pairs = r.pairs.size();
  r.successes.assign(n_pairs, 0);
  for (const auto& ep : episodes)
    for (std::size_t b = 1; b < ep.size(); ++b) ++r.successes[*r.pairs.find(ep.author, ep.ordered_users[b].uid)];

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  r.alpha = clamp_prob(options.init ? *options.init : 0.5 + 0.5 * unit(rng));
  r.beta = clamp_prob(options.init ? 1.0 - *options.init : 0.5 * unit(rng));
  r.rho = clamp_prob(options.init ? *options.init : unit(rng));
  r.q.assign(n_pairs, r.rho);

  const double all = detail::total_pairs(num_users);
  double q_rho = r.rho;  // the rho behind the current q, for inactive pairs
  while (r.iterations < options.max_iters) {
    ++r.iterations;
    std::vector<double> next(n_pairs);
    const double la = std::log(r.alpha), l1a = std::log1p(-r.alpha);
    const double lb = std::log(r.beta), l1b = std::log1p(-r.beta);
    for (std::size_t k = 0; k < n_pairs; ++k) {
      const double e = r.successes[k], n = r.pairs.m(k);
      const double log_odds = logit(r.rho) + e * (la - lb) + (n - e) * (l1a - l1b);
      next[k] = log_odds >= 0.0 ? 1.0 / (1.0 + std::exp(-log_odds)) : std::exp(log_odds) / (1.0 + std::exp(log_odds));
    }
    double change = detail::l2_change(next, r.q);
    change = std::sqrt(change * change + (all - static_cast<double>(n_pairs)) * (r.rho - q_rho) * (r.rho - q_rho));
    r.q = std::move(next);
    q_rho = r.rho;

    double num_a = 0, den_a = 0, num_b = 0, den_b = 0, sum_q = 0;
    for (std::size_t k = 0; k < n_pairs; ++k) {
      const double e = r.successes[k], n = r.pairs.m(k), q = r.q[k];
      num_a += q * e;
      den_a += q * n;
      num_b += (1.0 - q) * e;
      den_b += (1.0 - q) * n;
      sum_q += q;
    }
    if (den_a > 0) r.alpha = clamp_prob(num_a / den_a);
    if (den_b > 0) r.beta = clamp_prob(num_b / den_b);
    r.rho = clamp_prob((sum_q + (all - static_cast<double>(n_pairs)) * q_rho) / all);
    if (r.iterations > 1 && change < options.epsilon) {
      r.converged = true;
      break;
    }
  }
  if (!r.converged) log().warn("newman: no convergence after {} iterations", r.iterations);
  r.graph = InferredGraph(num_users);
  for (std::size_t k = 0; k < n_pairs; ++k)
    if (r.q[k] > options.threshold) r.graph.add_edge(r.pairs.src(k), r.pairs.dst(k), r.q[k]);
  if (q_rho > options.threshold) {
    const auto n = static_cast<UserId>(num_users);
    for (UserId i = 0; i < n; ++i)
      for (UserId j = 0; j < n; ++j)
        if (i != j && !r.pairs.find(i, j)) r.graph.add_edge(i, j, q_rho);
  }
  return r;
}

}  // namespace cemnet

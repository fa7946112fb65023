#pragma once
// Constrained EM for follower-graph inference (CEM-er / CEM-sbm).
//
// Each iteration: Q from the previous parameters, then alpha/beta, the prior
// (rho, or p/q), sigma from the covering LP and, for the SBM prior, new
// community labels from Louvain on the thresholded Q graph.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cemnet/community.hpp"
#include "cemnet/constraints.hpp"
#include "cemnet/graph.hpp"
#include "cemnet/log.hpp"
#include "cemnet/lp.hpp"
#include "cemnet/metrics.hpp"
#include "cemnet/trace.hpp"

namespace cemnet {

constexpr double kProbClamp = 1e-12;

inline double clamp_prob(double x) { return std::clamp(x, kProbClamp, 1.0 - kProbClamp); }
inline double logit(double x) { return std::log(x) - std::log1p(-x); }

enum class PriorKind { ER, SBM };

inline const char* to_string(PriorKind p) { return p == PriorKind::ER ? "er" : "sbm"; }

/// Which alpha/beta enter W when sigma is re-solved: the values that
/// produced this iteration's Q, or the ones just re-estimated from it.
enum class WeightParams { Previous, Current };

struct ParamSet {
  double alpha = 0.9;
  double beta = 0.1;
  double rho = 0.1;
  double p = 0.1;
  double q = 0.01;
};

/// The parameters and labels that produced the current Q table. Inactive
/// pairs take their Q from here.
struct PriorContext {
  PriorKind kind = PriorKind::ER;
  double rho = 0.0;
  double p = 0.0;
  double q = 0.0;
  GroupAssignment labels;

  double value(UserId i, UserId j) const {
    if (kind == PriorKind::ER) return rho;
    return labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)] ? p : q;
  }
};

struct EmOptions {
  PriorKind prior = PriorKind::ER;
  double lambda = 1.0;
  double epsilon = 1e-3;
  std::size_t max_iters = 100;
  std::uint64_t seed = 0;
  /// Holds beta at this constant instead of re-estimating it.
  std::optional<double> beta_fixed;
  /// Keeps the SBM labels fixed (no Louvain step).
  std::optional<GroupAssignment> fixed_labels;
  WeightParams weight_params = WeightParams::Previous;
  /// Keep a copy of the Q table in every history entry.
  bool record_q = false;
  std::size_t threads = 1;
  SimplexOptions lp;
  /// Fresh random starts allowed after a collapse (alpha <= beta).
  std::size_t max_restarts = 10;
  /// Called with every sigma LP before it is solved.
  std::function<void(std::size_t iteration, const LpProblem&)> on_lp;
};

struct IterationRecord {
  std::size_t iteration = 0;
  ParamSet params;
  double delta_q = 0.0;
  std::size_t lp_iterations = 0;
  std::vector<double> q;
};

struct EmState {
  PriorKind prior = PriorKind::ER;
  ParamSet params;
  std::optional<double> beta_fixed;
  double lambda = 1.0;
  std::size_t num_users = 0;
  PairTable pairs;
  ConstraintSystem constraints;
  GroupAssignment labels;
  PriorContext q_context;
  std::size_t iteration = 0;
  double delta_q = std::numeric_limits<double>::infinity();
  bool converged = false;
  std::size_t restarts = 0;
  std::vector<IterationRecord> history;
};

namespace detail {

inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t, std::size_t)>& body) {
  threads = std::max<std::size_t>(1, std::min(threads, n / 1024 + 1));
  if (threads == 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
    if (lo < hi) pool.emplace_back(body, lo, hi);
  }
  for (auto& th : pool) th.join();
}

inline double posterior(double prior, double alpha, double beta, double m, double sigma) {
  const double log_odds = logit(prior) + m * sigma * (std::log(alpha) - std::log(beta)) +
                          m * (1.0 - sigma) * (std::log1p(-alpha) - std::log1p(-beta));
  if (!std::isfinite(log_odds)) throw std::runtime_error("non-finite posterior log-odds");
  return log_odds >= 0.0 ? 1.0 / (1.0 + std::exp(-log_odds)) : std::exp(log_odds) / (1.0 + std::exp(log_odds));
}

inline double total_pairs(std::size_t n) { return static_cast<double>(n) * static_cast<double>(n - 1); }

/// Ordered pairs with equal labels.
inline double same_label_pairs(const GroupAssignment& labels) {
  std::map<int, double> sizes;
  for (int c : labels) sizes[c] += 1;
  double same = 0;
  for (auto& [c, k] : sizes) same += k * (k - 1);
  return same;
}

}  // namespace detail

/// Q for every active pair under the given prior context.
inline void update_q(EmState& state, const PriorContext& ctx, std::size_t threads = 1) {
  auto& pairs = state.pairs;
  const double a = state.params.alpha, b = state.params.beta;
  detail::parallel_for(pairs.size(), threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t k = lo; k < hi; ++k) {
      pairs.q()[k] = detail::posterior(ctx.value(pairs.src(k), pairs.dst(k)), a, b, pairs.m(k), pairs.sigma()[k]);
    }
  });
  state.q_context = ctx;
}

inline PriorContext current_context(const EmState& state) {
  PriorContext ctx;
  ctx.kind = state.prior;
  ctx.rho = state.params.rho;
  ctx.p = state.params.p;
  ctx.q = state.params.q;
  if (state.prior == PriorKind::SBM) ctx.labels = state.labels;
  return ctx;
}

inline void update_q_er(EmState& state, std::size_t threads = 1) {
  PriorContext ctx;
  ctx.rho = state.params.rho;
  update_q(state, ctx, threads);
}

inline void update_q_sbm(EmState& state, std::size_t threads = 1) {
  PriorContext ctx;
  ctx.kind = PriorKind::SBM;
  ctx.p = state.params.p;
  ctx.q = state.params.q;
  ctx.labels = state.labels;
  if (ctx.labels.size() != state.num_users) throw std::invalid_argument("labels do not cover every user");
  update_q(state, ctx, threads);
}

inline void update_alpha_beta(EmState& state) {
  const auto& pairs = state.pairs;
  double num_a = 0, den_a = 0, num_b = 0, den_b = 0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const double m = pairs.m(k), s = pairs.sigma()[k], q = pairs.q()[k];
    num_a += m * s * q;
    den_a += m * q;
    num_b += m * s * (1.0 - q);
    den_b += m * (1.0 - q);
  }
  if (den_a > 0) {
    state.params.alpha = clamp_prob(num_a / den_a);
  } else {
    log().warn("alpha update has a zero denominator; keeping {}", state.params.alpha);
  }
  if (state.beta_fixed) {
    state.params.beta = clamp_prob(*state.beta_fixed);
  } else if (den_b > 0) {
    state.params.beta = clamp_prob(num_b / den_b);
  } else {
    log().warn("beta update has a zero denominator; keeping {}", state.params.beta);
  }
}

namespace detail {

/// Mean Q over ordered pairs of one class (same-label or not), inactive
/// pairs counted at `inactive_value`. Returns nullopt for an empty class.
inline std::optional<double> class_mean(const EmState& state, const std::function<bool(UserId, UserId)>& in_class,
                                        double class_pairs, double inactive_value) {
  if (class_pairs <= 0) return std::nullopt;
  const auto& pairs = state.pairs;
  double sum = 0, active = 0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (!in_class(pairs.src(k), pairs.dst(k))) continue;
    sum += pairs.q()[k];
    active += 1;
  }
  return (sum + (class_pairs - active) * inactive_value) / class_pairs;
}

}  // namespace detail

/// rho = mean Q over all N(N-1) ordered pairs; inactive pairs hold the rho
/// that produced the current Q.
inline void update_prior_er(EmState& state) {
  if (state.num_users < 2) throw std::invalid_argument("the ER prior needs at least two users");
  auto mean = detail::class_mean(state, [](UserId, UserId) { return true; }, detail::total_pairs(state.num_users),
                                 state.q_context.rho);
  state.params.rho = clamp_prob(*mean);
}

inline void update_prior_sbm(EmState& state) {
  if (state.num_users < 2) throw std::invalid_argument("the SBM prior needs at least two users");
  const auto& labels = state.q_context.labels;
  if (labels.size() != state.num_users) throw std::invalid_argument("labels do not cover every user");
  const double same = detail::same_label_pairs(labels);
  const double cross = detail::total_pairs(state.num_users) - same;
  auto is_same = [&](UserId i, UserId j) {
    return labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)];
  };
  if (auto p = detail::class_mean(state, is_same, same, state.q_context.p)) {
    state.params.p = clamp_prob(*p);
  } else {
    log().warn("no same-community pairs; keeping p = {}", state.params.p);
  }
  if (auto q = detail::class_mean(state, [&](UserId i, UserId j) { return !is_same(i, j); }, cross,
                                  state.q_context.q)) {
    state.params.q = clamp_prob(*q);
  } else {
    log().warn("no cross-community pairs; keeping q = {}", state.params.q);
  }
}

/// Fills W per active pair and returns max W.
inline double build_w(EmState& state, double alpha, double beta) {
  alpha = clamp_prob(alpha);
  beta = clamp_prob(beta);
  const double la = logit(alpha), lb = logit(beta);
  auto& pairs = state.pairs;
  double c = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const double q = pairs.q()[k];
    pairs.w()[k] = pairs.m(k) * (q * la + (1.0 - q) * lb);
    c = std::max(c, pairs.w()[k]);
  }
  return pairs.size() > 0 ? c : 0.0;
}

inline double build_w(EmState& state) { return build_w(state, state.params.alpha, state.params.beta); }

/// LP objective W - lambda * max(W) over the covering rows.
inline LpProblem sigma_problem(const EmState& state, double c) {
  LpProblem problem;
  problem.objective.reserve(state.pairs.size());
  for (double w : state.pairs.w()) problem.objective.push_back(w - state.lambda * c);
  problem.rows.reserve(state.constraints.rows.size());
  for (const auto& row : state.constraints.rows) problem.rows.push_back(row.predecessors);
  return problem;
}

/// Edges with Q > 0.5. Inactive pairs take their prior value and are added
/// only when it exceeds 0.5.
inline InferredGraph threshold_graph(const EmState& state) {
  InferredGraph g(state.num_users);
  const auto& pairs = state.pairs;
  for (std::size_t k = 0; k < pairs.size(); ++k)
    if (pairs.q()[k] > 0.5) g.add_edge(pairs.src(k), pairs.dst(k), pairs.q()[k]);
  const auto& ctx = state.q_context;
  const bool any_inactive = ctx.kind == PriorKind::ER ? ctx.rho > 0.5 : (ctx.p > 0.5 || ctx.q > 0.5);
  if (!any_inactive) return g;
  const auto n = static_cast<UserId>(state.num_users);
  for (UserId i = 0; i < n; ++i)
    for (UserId j = 0; j < n; ++j) {
      if (i == j || pairs.find(i, j)) continue;
      const double v = ctx.value(i, j);
      if (v > 0.5) g.add_edge(i, j, v);
    }
  return g;
}

/// Scores for AUC: Q on active pairs, the prior elsewhere.
inline PairScores pair_scores(const EmState& state) {
  PairScores s;
  s.num_users = state.num_users;
  for (std::size_t k = 0; k < state.pairs.size(); ++k)
    s.listed.push_back({state.pairs.src(k), state.pairs.dst(k), state.pairs.q()[k]});
  const auto& ctx = state.q_context;
  if (ctx.kind == PriorKind::ER) {
    s.default_score = ctx.rho;
  } else {
    s.labels = ctx.labels;
    s.default_same = ctx.p;
    s.default_cross = ctx.q;
  }
  return s;
}

/// Squared L2 distance between two full Q matrices that share the active
/// pair set; inactive pairs are counted in closed form per label class.
inline double q_distance_sq(const PairTable& pairs, const std::vector<double>& q_old, const PriorContext& old_ctx,
                            const std::vector<double>& q_new, const PriorContext& new_ctx) {
  double sum = 0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const double d = q_new[k] - q_old[k];
    sum += d * d;
  }
  const std::size_t n = pairs.num_users();
  if (n < 2) return sum;
  // Pair counts per (same under old labels, same under new labels).
  const bool old_er = old_ctx.kind == PriorKind::ER, new_er = new_ctx.kind == PriorKind::ER;
  const double all = detail::total_pairs(n);
  const double old_same = old_er ? all : detail::same_label_pairs(old_ctx.labels);
  const double new_same = new_er ? all : detail::same_label_pairs(new_ctx.labels);
  double both_same;
  if (old_er) {
    both_same = new_same;
  } else if (new_er) {
    both_same = old_same;
  } else {
    std::map<std::pair<int, int>, double> joint;
    for (std::size_t i = 0; i < n; ++i) joint[{old_ctx.labels[i], new_ctx.labels[i]}] += 1;
    both_same = 0;
    for (auto& [cell, k] : joint) both_same += k * (k - 1);
  }
  double count[2][2];
  count[1][1] = both_same;
  count[1][0] = old_same - both_same;
  count[0][1] = new_same - both_same;
  count[0][0] = all - both_same - count[1][0] - count[0][1];
  auto same_in = [](const PriorContext& ctx, UserId i, UserId j) {
    return ctx.kind == PriorKind::ER ||
           ctx.labels[static_cast<std::size_t>(i)] == ctx.labels[static_cast<std::size_t>(j)];
  };
  for (std::size_t k = 0; k < pairs.size(); ++k)
    count[same_in(old_ctx, pairs.src(k), pairs.dst(k))][same_in(new_ctx, pairs.src(k), pairs.dst(k))] -= 1;
  auto level = [](const PriorContext& ctx, bool same) {
    return ctx.kind == PriorKind::ER ? ctx.rho : (same ? ctx.p : ctx.q);
  };
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const double d = level(new_ctx, b) - level(old_ctx, a);
      sum += count[a][b] * d * d;
    }
  return sum;
}

/// Random start, drawn in this order: alpha ~ U(0.5, 1) (above a fixed beta
/// when one is set), beta ~ U(0, 0.5),
/// rho (or p), q, every sigma, then (SBM) labels over ceil(sqrt(N)) groups;
/// everything but alpha and beta is U(0, 1). Starting with alpha > 0.5 > beta
/// pins the "edge" class to alpha and gives W its intended sign from the
/// first LP on.
inline EmState init_state(const std::vector<Episode>& episodes, std::size_t num_users, const EmOptions& options,
                          std::size_t restart = 0) {
  if (num_users < 2) throw std::invalid_argument("inference needs at least two users");
  if (options.lambda < 0.0 || options.lambda > 1.0) throw std::invalid_argument("lambda must lie in [0, 1]");
  EmState state;
  state.prior = options.prior;
  state.num_users = num_users;
  state.lambda = options.lambda;
  state.beta_fixed = options.beta_fixed;
  state.pairs = pair_counts(episodes, num_users);
  state.constraints = build_constraints(episodes, state.pairs);

  std::seed_seq restart_seed{options.seed, static_cast<std::uint64_t>(restart)};
  std::mt19937_64 rng = restart == 0 ? std::mt19937_64(options.seed) : std::mt19937_64(restart_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double a_lo = std::max(0.5, options.beta_fixed.value_or(0.0));
  const double a = a_lo + (1.0 - a_lo) * unit(rng), b = 0.5 * unit(rng);
  state.params.alpha = clamp_prob(a);
  state.params.beta = clamp_prob(options.beta_fixed ? *options.beta_fixed : b);
  const double prior = clamp_prob(unit(rng));
  state.params.rho = prior;
  state.params.p = prior;
  state.params.q = clamp_prob(unit(rng));
  for (double& s : state.pairs.sigma()) s = unit(rng);
  if (options.prior == PriorKind::SBM) {
    if (options.fixed_labels) {
      if (options.fixed_labels->size() != num_users) throw std::invalid_argument("fixed labels do not cover every user");
      state.labels = densify(*options.fixed_labels);
    } else {
      const auto groups = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(num_users))));
      std::uniform_int_distribution<int> pick(0, groups - 1);
      state.labels.resize(num_users);
      for (int& g : state.labels) g = pick(rng);
    }
  }
  state.q_context = current_context(state);
  return state;
}

/// One full iteration. Returns the LP status.
inline LpStatus cem_step(EmState& state, const EmOptions& options) {
  ++state.iteration;
  const std::vector<double> q_old = state.pairs.q();
  const PriorContext old_ctx = state.q_context;

  if (state.prior == PriorKind::ER) {
    update_q_er(state, options.threads);
  } else {
    update_q_sbm(state, options.threads);
  }
  state.delta_q = state.iteration == 1
                      ? std::numeric_limits<double>::infinity()
                      : std::sqrt(q_distance_sq(state.pairs, q_old, old_ctx, state.pairs.q(), state.q_context));

  const ParamSet before = state.params;
  update_alpha_beta(state);
  if (state.prior == PriorKind::ER) {
    update_prior_er(state);
  } else {
    update_prior_sbm(state);
  }

  const bool previous = options.weight_params == WeightParams::Previous;
  const double c = build_w(state, previous ? before.alpha : state.params.alpha,
                           previous ? before.beta : state.params.beta);
  const LpProblem problem = sigma_problem(state, c);
  if (options.on_lp) options.on_lp(state.iteration, problem);
  SimplexOptions lp = options.lp;
  lp.threads = std::max(lp.threads, options.threads);
  const LpSolution solution = SimplexSolver(lp).solve(problem);
  if (solution.status != LpStatus::Optimal) {
    throw std::runtime_error(std::string("sigma LP failed at iteration ") + std::to_string(state.iteration) + ": " +
                             to_string(solution.status));
  }
  state.pairs.sigma() = solution.sigma;

  if (state.prior == PriorKind::SBM && !options.fixed_labels) {
    const auto communities = louvain(threshold_graph(state), options.seed);
    state.labels = communities.labels;
  }

  IterationRecord record;
  record.iteration = state.iteration;
  record.params = state.params;
  record.delta_q = state.delta_q;
  record.lp_iterations = solution.iterations;
  if (options.record_q) record.q = state.pairs.q();
  state.history.push_back(std::move(record));
  log().debug("iteration {}: alpha={} beta={} rho={} p={} q={} dQ={} lp_pivots={}", state.iteration,
              state.params.alpha, state.params.beta, state.params.rho, state.params.p, state.params.q,
              state.delta_q, solution.iterations);
  return solution.status;
}

struct CemResult {
  EmState state;
  InferredGraph graph;
};

/// alpha <= beta: the edge and non-edge classes have merged (typically
/// alpha = beta = 1 after sigma went to 1 on every pair) or swapped, and Q no
/// longer depends on the data.
inline bool collapsed(const EmState& state) { return state.params.alpha <= state.params.beta + 1e-9; }

/// Runs until ||Q_t - Q_{t-1}||_2 < epsilon or max_iters. A collapsed run
/// restarts from a fresh random start (up to max_restarts times). A run
/// that hits the iteration cap is returned with converged = false.
inline CemResult run_cem(const std::vector<Episode>& episodes, std::size_t num_users, const EmOptions& options) {
  CemResult result{init_state(episodes, num_users, options), {}};
  auto& state = result.state;
  while (state.iteration < options.max_iters) {
    cem_step(state, options);
    if (collapsed(state) && state.restarts < options.max_restarts) {
      const std::size_t restarts = state.restarts + 1;
      log().info("alpha <= beta at iteration {}; restarting ({} of {})", state.iteration, restarts,
                 options.max_restarts);
      state = init_state(episodes, num_users, options, restarts);
      state.restarts = restarts;
      continue;
    }
    if (state.delta_q < options.epsilon) {
      state.converged = true;
      break;
    }
  }
  if (!state.converged) log().warn("no convergence after {} iterations (last dQ = {})", state.iteration, state.delta_q);
  result.graph = threshold_graph(state);
  return result;
}

inline CemResult run_cem(const Trace& trace, const EmOptions& options) {
  return run_cem(build_episodes(trace), trace.num_users(), options);
}

}  // namespace cemnet

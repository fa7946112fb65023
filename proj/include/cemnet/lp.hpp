#pragma once
// Box-constrained covering LPs:
//
//   maximize  sum_v c_v x_v
//   s.t.      sum_{v in row} x_v >= 1   for every row
//             0 <= x_v <= 1
//
// Solved by a bounded-variable primal simplex on a dense tableau. Before the
// simplex runs, variables with c_v >= 0 are fixed at 1 (raising them never
// hurts), forced singleton rows are propagated, duplicate and dominated rows
// are dropped and the rest is split into independent blocks (rows that share
// no variable never interact).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace cemnet {

struct LpProblem {
  std::vector<double> objective;
  std::vector<std::vector<std::size_t>> rows;

  std::size_t num_variables() const { return objective.size(); }
};

enum class LpStatus { Optimal, Infeasible, IterationLimit };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::IterationLimit: return "iteration-limit";
  }
  return "unknown";
}

struct LpSolution {
  std::vector<double> sigma;
  double objective = 0.0;
  LpStatus status = LpStatus::Optimal;
  std::size_t iterations = 0;
};

enum class Pricing { Dantzig, Bland };

struct SimplexOptions {
  bool presolve = true;
  Pricing pricing = Pricing::Dantzig;
  /// Per block.
  std::size_t max_iterations = 200'000;
  /// Consecutive degenerate pivots before switching to Bland's rule.
  std::size_t bland_after = 64;
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  std::size_t threads = 1;
};

/// Max residual violation of the covering rows and box (0 when feasible).
inline double max_violation(const LpProblem& problem, const std::vector<double>& x) {
  double worst = 0.0;
  for (double v : x) worst = std::max({worst, -v, v - 1.0});
  for (const auto& row : problem.rows) {
    double sum = 0.0;
    for (std::size_t v : row) sum += x[v];
    worst = std::max(worst, 1.0 - sum);
  }
  return worst;
}

inline double objective_value(const LpProblem& problem, const std::vector<double>& x) {
  double obj = 0.0;
  for (std::size_t v = 0; v < x.size(); ++v) obj += problem.objective[v] * x[v];
  return obj;
}

/// Binary feasible point: scan rows in order and, for each row not yet
/// covered, raise its member with the largest coefficient (lowest index on ties).
inline std::vector<double> greedy_cover_warm_start(const LpProblem& problem) {
  std::vector<double> x(problem.num_variables(), 0.0);
  for (const auto& row : problem.rows) {
    bool covered = false;
    for (std::size_t v : row) {
      if (x[v] >= 1.0) {
        covered = true;
        break;
      }
    }
    if (covered || row.empty()) continue;
    std::size_t best = row.front();
    for (std::size_t v : row) {
      if (problem.objective[v] > problem.objective[best] ||
          (problem.objective[v] == problem.objective[best] && v < best)) {
        best = v;
      }
    }
    x[best] = 1.0;
  }
  return x;
}

namespace detail {

/// Dense bounded-variable primal simplex for one covering block. Columns
/// 0..n-1 are the structural variables (bounds [0,1]); column n+r is the
/// surplus of row r (a_r x - s_r = 1, bounds [0, inf)). The start basis is
/// all surpluses with structurals at the bounds given by `start`, which
/// must be binary and feasible.
class DenseSimplex {
 public:
  DenseSimplex(const std::vector<double>& cost, const std::vector<std::vector<std::size_t>>& rows,
               const std::vector<double>& start, const SimplexOptions& options)
      : n_(cost.size()), m_(rows.size()), cols_(n_ + m_), options_(options), rows_(rows) {
    tableau_.assign(m_ * cols_, 0.0);
    // T = B^{-1} [A | -I] with B = -I gives [-A | I].
    for (std::size_t r = 0; r < m_; ++r) {
      for (std::size_t v : rows[r]) at(r, v) = -1.0;
      at(r, n_ + r) = 1.0;
    }
    cost_.assign(cols_, 0.0);
    std::copy(cost.begin(), cost.end(), cost_.begin());
    double scale = 1.0;
    for (double c : cost) scale = std::max(scale, std::abs(c));
    opt_tol_ = options.optimality_tol * scale;

    upper_.assign(cols_, std::numeric_limits<double>::infinity());
    std::fill(upper_.begin(), upper_.begin() + static_cast<std::ptrdiff_t>(n_), 1.0);
    value_.assign(cols_, 0.0);
    for (std::size_t v = 0; v < n_; ++v) value_[v] = start[v] >= 0.5 ? 1.0 : 0.0;
    basic_.resize(m_);
    is_basic_.assign(cols_, -1);
    for (std::size_t r = 0; r < m_; ++r) {
      basic_[r] = n_ + r;
      is_basic_[n_ + r] = static_cast<std::ptrdiff_t>(r);
    }
    recompute_basic_values();
    // Reduced costs with c_B = 0 (surpluses cost nothing).
    reduced_ = cost_;
  }

  LpStatus run() {
    bool bland = options_.pricing == Pricing::Bland;
    std::size_t degenerate_run = 0;
    while (true) {
      if (iterations_ >= options_.max_iterations) return LpStatus::IterationLimit;
      const std::ptrdiff_t entering = choose_entering(bland);
      if (entering < 0) break;
      const auto q = static_cast<std::size_t>(entering);
      const double dir = reduced_[q] > 0.0 ? 1.0 : -1.0;

      // Ratio test; a tie with the entering variable's own bound flip keeps the flip.
      double best_step = upper_[q];
      std::ptrdiff_t leave_row = -1;
      double best_pivot = 0.0;
      for (std::size_t r = 0; r < m_; ++r) {
        const double rate = -dir * at(r, q);
        if (std::abs(rate) <= kPivotTol) continue;
        const std::size_t var = basic_[r];
        double limit;
        if (rate < 0.0) {
          limit = std::max(0.0, value_[var]) / -rate;
        } else {
          if (!std::isfinite(upper_[var])) continue;
          limit = std::max(0.0, upper_[var] - value_[var]) / rate;
        }
        bool take = limit < best_step - kRatioTie;
        if (!take && leave_row >= 0 && limit <= best_step + kRatioTie) {
          take = bland ? var < basic_[static_cast<std::size_t>(leave_row)] : std::abs(rate) > best_pivot;
        }
        if (take) {
          best_step = std::min(best_step, limit);
          leave_row = static_cast<std::ptrdiff_t>(r);
          best_pivot = std::abs(rate);
        }
      }
      if (!std::isfinite(best_step)) {
        throw std::logic_error("covering LP block reported unbounded");
      }
      ++iterations_;
      degenerate_run = best_step <= options_.feasibility_tol ? degenerate_run + 1 : 0;
      if (!bland && degenerate_run > options_.bland_after) bland = true;

      // Move along the edge.
      for (std::size_t r = 0; r < m_; ++r) value_[basic_[r]] += -dir * at(r, q) * best_step;
      value_[q] += dir * best_step;

      if (leave_row < 0) {
        value_[q] = dir > 0 ? upper_[q] : 0.0;  // bound flip
        continue;
      }
      const auto r = static_cast<std::size_t>(leave_row);
      const std::size_t leaving = basic_[r];
      const double rate = -dir * at(r, q);
      value_[leaving] = rate < 0.0 ? 0.0 : upper_[leaving];
      pivot(r, q);
      is_basic_[leaving] = -1;
      is_basic_[q] = static_cast<std::ptrdiff_t>(r);
      basic_[r] = q;
      if (iterations_ % kRefreshEvery == 0) recompute_basic_values();
    }
    recompute_basic_values();
    return LpStatus::Optimal;
  }

  std::vector<double> solution() const {
    std::vector<double> x(value_.begin(), value_.begin() + static_cast<std::ptrdiff_t>(n_));
    for (double& v : x) v = std::clamp(v, 0.0, 1.0);
    return x;
  }

  std::size_t iterations() const { return iterations_; }

 private:
  static constexpr double kPivotTol = 1e-11;
  static constexpr double kRatioTie = 1e-12;
  static constexpr std::size_t kRefreshEvery = 50;

  double& at(std::size_t r, std::size_t c) { return tableau_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return tableau_[r * cols_ + c]; }

  std::ptrdiff_t choose_entering(bool bland) const {
    std::ptrdiff_t best = -1;
    double best_score = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) {
      if (is_basic_[j] >= 0) continue;
      const double d = reduced_[j];
      const bool at_upper = std::isfinite(upper_[j]) && value_[j] >= upper_[j] - 0.5;
      double gain = 0.0;
      if (!at_upper && d > opt_tol_) gain = d;
      if (at_upper && d < -opt_tol_) gain = -d;
      if (gain <= 0.0) continue;
      if (bland) return static_cast<std::ptrdiff_t>(j);
      if (gain > best_score) {
        best_score = gain;
        best = static_cast<std::ptrdiff_t>(j);
      }
    }
    return best;
  }

  void pivot(std::size_t r, std::size_t q) {
    double* prow = &tableau_[r * cols_];
    const double inv = 1.0 / prow[q];
    for (std::size_t c = 0; c < cols_; ++c) prow[c] *= inv;
    prow[q] = 1.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r) continue;
      double* row = &tableau_[i * cols_];
      const double f = row[q];
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < cols_; ++c) row[c] -= f * prow[c];
      row[q] = 0.0;
    }
    const double f = reduced_[q];
    for (std::size_t c = 0; c < cols_; ++c) reduced_[c] -= f * prow[c];
    reduced_[q] = 0.0;
  }

  /// x_B = B^{-1}(1 - A_N x_N); the surplus block of the tableau holds -B^{-1}.
  void recompute_basic_values() {
    std::vector<double> rhs(m_, 1.0);
    for (std::size_t r = 0; r < m_; ++r) {
      for (std::size_t v : rows_[r])
        if (is_basic_[v] < 0) rhs[r] -= value_[v];
    }
    for (std::size_t j = n_; j < cols_; ++j)
      if (is_basic_[j] < 0) rhs[j - n_] += value_[j];
    for (std::size_t i = 0; i < m_; ++i) {
      double v = 0.0;
      const double* row = &tableau_[i * cols_ + n_];
      for (std::size_t k = 0; k < m_; ++k) v -= row[k] * rhs[k];
      value_[basic_[i]] = v;
    }
  }

  std::size_t n_, m_, cols_;
  SimplexOptions options_;
  const std::vector<std::vector<std::size_t>>& rows_;
  std::vector<double> tableau_;
  std::vector<double> cost_;
  std::vector<double> reduced_;
  std::vector<double> upper_;
  std::vector<double> value_;
  std::vector<std::size_t> basic_;
  std::vector<std::ptrdiff_t> is_basic_;
  double opt_tol_ = 1e-9;
  std::size_t iterations_ = 0;
};

struct Block {
  std::vector<std::size_t> vars;                    // global indices
  std::vector<std::vector<std::size_t>> rows;       // local indices
};

struct BlockResult {
  std::vector<double> x;
  LpStatus status = LpStatus::Optimal;
  std::size_t iterations = 0;
};

inline BlockResult solve_block(const Block& block, const std::vector<double>& objective,
                               const SimplexOptions& options) {
  LpProblem local;
  local.objective.reserve(block.vars.size());
  for (std::size_t v : block.vars) local.objective.push_back(objective[v]);
  local.rows = block.rows;
  const auto start = greedy_cover_warm_start(local);
  DenseSimplex simplex(local.objective, local.rows, start, options);
  BlockResult result;
  result.status = simplex.run();
  result.x = simplex.solution();
  result.iterations = simplex.iterations();
  return result;
}

/// Drops rows that contain another remaining row (they are implied).
inline std::vector<std::vector<std::size_t>> drop_dominated_rows(std::vector<std::vector<std::size_t>> rows,
                                                                 std::size_t num_local_vars) {
  for (auto& row : rows) std::sort(row.begin(), row.end());
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());

  const std::size_t words = (num_local_vars + 63) / 64;
  std::vector<std::uint64_t> kept_bits;
  std::vector<std::vector<std::size_t>> kept;
  std::vector<std::uint64_t> bits(words);
  for (auto& row : rows) {
    std::fill(bits.begin(), bits.end(), 0);
    for (std::size_t v : row) bits[v / 64] |= std::uint64_t{1} << (v % 64);
    bool dominated = false;
    for (std::size_t k = 0; k < kept.size() && !dominated; ++k) {
      if (kept[k].size() > row.size()) break;
      const std::uint64_t* kb = &kept_bits[k * words];
      bool subset = true;
      for (std::size_t w = 0; w < words && subset; ++w) subset = (kb[w] & ~bits[w]) == 0;
      dominated = subset;
    }
    if (dominated) continue;
    kept_bits.insert(kept_bits.end(), bits.begin(), bits.end());
    kept.push_back(std::move(row));
  }
  return kept;
}

}  // namespace detail

/// Abstract σ-subproblem solver so another LP engine can sit behind the same
/// contract.
class LpSolver {
 public:
  virtual ~LpSolver() = default;
  virtual LpSolution solve(const LpProblem& problem) const = 0;
};

class SimplexSolver : public LpSolver {
 public:
  explicit SimplexSolver(SimplexOptions options = {}) : options_(options) {}

  LpSolution solve(const LpProblem& problem) const override {
    const std::size_t n = problem.num_variables();
    for (const auto& row : problem.rows) {
      for (std::size_t v : row)
        if (v >= n) throw std::invalid_argument("LP row references variable " + std::to_string(v));
    }
    LpSolution solution;
    for (const auto& row : problem.rows) {
      if (row.empty()) {
        solution.status = LpStatus::Infeasible;
        solution.sigma.assign(n, 1.0);
        solution.objective = objective_value(problem, solution.sigma);
        return solution;
      }
    }
    if (!options_.presolve) {
      detail::Block whole;
      whole.vars.resize(n);
      std::iota(whole.vars.begin(), whole.vars.end(), std::size_t{0});
      whole.rows = problem.rows;
      auto result = detail::solve_block(whole, problem.objective, options_);
      solution.sigma = std::move(result.x);
      solution.status = result.status;
      solution.iterations = result.iterations;
      solution.objective = objective_value(problem, solution.sigma);
      return solution;
    }
    return solve_presolved(problem);
  }

 private:
  LpSolution solve_presolved(const LpProblem& problem) const {
    const std::size_t n = problem.num_variables();
    std::vector<double> x(n, 0.0);
    for (std::size_t v = 0; v < n; ++v)
      if (problem.objective[v] >= 0.0) x[v] = 1.0;

    // Propagate satisfied rows and forced singletons to a fixed point.
    std::vector<const std::vector<std::size_t>*> open;
    open.reserve(problem.rows.size());
    for (const auto& row : problem.rows) open.push_back(&row);
    std::vector<std::vector<std::size_t>> reduced;
    for (bool changed = true; changed;) {
      changed = false;
      std::vector<const std::vector<std::size_t>*> still_open;
      for (const auto* row : open) {
        bool satisfied = false;
        for (std::size_t v : *row) {
          if (x[v] >= 1.0) {
            satisfied = true;
            break;
          }
        }
        if (satisfied) continue;
        if (row->size() == 1 || std::adjacent_find(row->begin(), row->end(), std::not_equal_to<>{}) == row->end()) {
          x[row->front()] = 1.0;
          changed = true;
          continue;
        }
        still_open.push_back(row);
      }
      open.swap(still_open);
    }

    // Union-find over the variables of the remaining rows.
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t v) {
      while (parent[v] != v) v = parent[v] = parent[parent[v]];
      return v;
    };
    for (const auto* row : open)
      for (std::size_t v : *row) {
        const std::size_t a = find(row->front()), b = find(v);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }

    std::vector<std::ptrdiff_t> block_of(n, -1);
    std::vector<std::size_t> local(n, 0);
    std::vector<detail::Block> blocks;
    std::vector<bool> in_rows(n, false);
    for (const auto* row : open)
      for (std::size_t v : *row) in_rows[v] = true;
    for (std::size_t v = 0; v < n; ++v) {
      if (!in_rows[v]) continue;
      const std::size_t root = find(v);
      if (block_of[root] < 0) {
        block_of[root] = static_cast<std::ptrdiff_t>(blocks.size());
        blocks.emplace_back();
      }
      auto& block = blocks[static_cast<std::size_t>(block_of[root])];
      local[v] = block.vars.size();
      block.vars.push_back(v);
    }
    for (const auto* row : open) {
      auto& block = blocks[static_cast<std::size_t>(block_of[find(row->front())])];
      std::vector<std::size_t> lrow;
      lrow.reserve(row->size());
      for (std::size_t v : *row) lrow.push_back(local[v]);
      std::sort(lrow.begin(), lrow.end());
      lrow.erase(std::unique(lrow.begin(), lrow.end()), lrow.end());
      block.rows.push_back(std::move(lrow));
    }
    for (auto& block : blocks) block.rows = detail::drop_dominated_rows(std::move(block.rows), block.vars.size());

    std::vector<detail::BlockResult> results(blocks.size());
    const std::size_t threads = std::max<std::size_t>(1, std::min(options_.threads, blocks.size()));
    if (threads <= 1) {
      for (std::size_t b = 0; b < blocks.size(); ++b) results[b] = detail::solve_block(blocks[b], problem.objective, options_);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::thread> pool;
      for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
          for (std::size_t b = next++; b < blocks.size(); b = next++)
            results[b] = detail::solve_block(blocks[b], problem.objective, options_);
        });
      }
      for (auto& th : pool) th.join();
    }

    LpSolution solution;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      for (std::size_t k = 0; k < blocks[b].vars.size(); ++k) x[blocks[b].vars[k]] = results[b].x[k];
      solution.iterations += results[b].iterations;
      if (results[b].status != LpStatus::Optimal) solution.status = results[b].status;
    }
    solution.sigma = std::move(x);
    solution.objective = objective_value(problem, solution.sigma);
    return solution;
  }

  SimplexOptions options_;
};

inline LpSolution solve(const LpProblem& problem, const SimplexOptions& options = {}) {
  return SimplexSolver(options).solve(problem);
}

/// Writes the problem in CPLEX LP text form.
inline void dump_lp(std::ostream& out, const LpProblem& problem,
                    const std::vector<std::string>& names = {}) {
  auto name = [&](std::size_t v) { return v < names.size() ? names[v] : "x" + std::to_string(v); };
  out << "\\ sigma subproblem: " << problem.num_variables() << " columns, " << problem.rows.size() << " rows\n";
  out << "Maximize\n obj:";
  for (std::size_t v = 0; v < problem.num_variables(); ++v) {
    const double c = problem.objective[v];
    out << (c < 0 ? " - " : " + ") << std::abs(c) << ' ' << name(v);
    if (v % 8 == 7) out << "\n     ";
  }
  out << "\nSubject To\n";
  for (std::size_t r = 0; r < problem.rows.size(); ++r) {
    out << " c" << r << ':';
    for (std::size_t k = 0; k < problem.rows[r].size(); ++k) out << (k ? " + " : " ") << name(problem.rows[r][k]);
    out << " >= 1\n";
  }
  out << "Bounds\n";
  for (std::size_t v = 0; v < problem.num_variables(); ++v) out << " 0 <= " << name(v) << " <= 1\n";
  out << "End\n";
}

}  // namespace cemnet

#pragma once
// Independent LP oracles for small covering problems: a textbook two-phase
// tableau simplex (explicit slack rows for the upper bounds, Bland's rule)
// and brute force over binary points.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "cemnet/lp.hpp"

namespace lp_reference {

/// max c.z s.t. E z = b (b >= 0), z >= 0, with `basis` a feasible identity
/// basis. Columns in `banned` never enter. Returns false if unbounded.
inline bool tableau_max(std::vector<std::vector<double>>& t, std::vector<std::size_t>& basis,
                        const std::vector<double>& c, const std::vector<bool>& banned) {
  const std::size_t m = t.size(), cols = c.size();
  constexpr double tol = 1e-11;
  for (int guard = 0; guard < 100000; ++guard) {
    // reduced costs d_j = c_j - c_B B^-1 a_j ; tableau already holds B^-1 a_j
    std::optional<std::size_t> enter;
    for (std::size_t j = 0; j < cols && !enter; ++j) {
      if (banned[j]) continue;
      double d = c[j];
      for (std::size_t r = 0; r < m; ++r) d -= c[basis[r]] * t[r][j];
      if (d > tol) enter = j;
    }
    if (!enter) return true;
    const std::size_t q = *enter;
    std::optional<std::size_t> leave;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < m; ++r) {
      if (t[r][q] <= tol) continue;
      const double ratio = t[r][cols] / t[r][q];
      if (ratio < best - tol || (std::abs(ratio - best) <= tol && leave && basis[r] < basis[*leave])) {
        best = ratio;
        leave = r;
      }
    }
    if (!leave) return false;
    const std::size_t p = *leave;
    const double piv = t[p][q];
    for (double& v : t[p]) v /= piv;
    for (std::size_t r = 0; r < m; ++r) {
      if (r == p || t[r][q] == 0.0) continue;
      const double f = t[r][q];
      for (std::size_t j = 0; j <= cols; ++j) t[r][j] -= f * t[p][j];
    }
    basis[p] = q;
  }
  return true;
}

/// Optimal value of max c.x s.t. rows cover, 0 <= x <= 1; nullopt when
/// infeasible (an empty row).
inline std::optional<double> lp_optimum(const cemnet::LpProblem& problem) {
  const std::size_t n = problem.num_variables(), m = problem.rows.size();
  for (const auto& row : problem.rows)
    if (row.empty()) return std::nullopt;
  // columns: x (n) | surplus s (m) | slack t (n) | artificial a (m) | rhs
  const std::size_t cols = n + m + n + m;
  std::vector<std::vector<double>> t(m + n, std::vector<double>(cols + 1, 0.0));
  std::vector<std::size_t> basis(m + n);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t v : problem.rows[r]) t[r][v] = 1.0;  // duplicates collapse, as in sum over a set
    t[r][n + r] = -1.0;
    t[r][n + m + n + r] = 1.0;
    t[r][cols] = 1.0;
    basis[r] = n + m + n + r;
  }
  for (std::size_t v = 0; v < n; ++v) {
    t[m + v][v] = 1.0;
    t[m + v][n + m + v] = 1.0;
    t[m + v][cols] = 1.0;
    basis[m + v] = n + m + v;
  }
  std::vector<double> phase1(cols, 0.0);
  for (std::size_t r = 0; r < m; ++r) phase1[n + m + n + r] = -1.0;
  std::vector<bool> none(cols, false);
  tableau_max(t, basis, phase1, none);
  double infeas = 0;
  for (std::size_t r = 0; r < t.size(); ++r)
    if (basis[r] >= n + m + n) infeas += t[r][cols];
  if (infeas > 1e-9) return std::nullopt;
  // Drive zero-level artificials out of the basis, dropping redundant rows.
  for (std::size_t r = 0; r < t.size();) {
    if (basis[r] < n + m + n) {
      ++r;
      continue;
    }
    std::optional<std::size_t> q;
    for (std::size_t j = 0; j < n + m + n && !q; ++j)
      if (std::abs(t[r][j]) > 1e-9) q = j;
    if (!q) {
      t.erase(t.begin() + static_cast<std::ptrdiff_t>(r));
      basis.erase(basis.begin() + static_cast<std::ptrdiff_t>(r));
      continue;
    }
    const double piv = t[r][*q];
    for (double& v : t[r]) v /= piv;
    for (std::size_t o = 0; o < t.size(); ++o) {
      if (o == r || t[o][*q] == 0.0) continue;
      const double f = t[o][*q];
      for (std::size_t j = 0; j <= cols; ++j) t[o][j] -= f * t[r][j];
    }
    basis[r] = *q;
    ++r;
  }
  std::vector<double> c(cols, 0.0);
  for (std::size_t v = 0; v < n; ++v) c[v] = problem.objective[v];
  std::vector<bool> banned(cols, false);
  for (std::size_t j = n + m + n; j < cols; ++j) banned[j] = true;
  tableau_max(t, basis, c, banned);
  double value = 0;
  for (std::size_t r = 0; r < t.size(); ++r)
    if (basis[r] < n) value += c[basis[r]] * t[r][cols];
  return value;
}

/// Best objective over binary feasible points (n <= ~20).
inline std::optional<double> binary_optimum(const cemnet::LpProblem& problem) {
  const std::size_t n = problem.num_variables();
  std::optional<double> best;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    bool ok = true;
    for (const auto& row : problem.rows) {
      bool covered = false;
      for (std::size_t v : row) covered |= (mask >> v) & 1u;
      if (!covered) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    double value = 0;
    for (std::size_t v = 0; v < n; ++v)
      if ((mask >> v) & 1u) value += problem.objective[v];
    if (!best || value > *best) best = value;
  }
  return best;
}

/// Random covering instance: n in [1, max_vars], a few rows of random
/// subsets, coefficients drawn from `coef`.
template <class Rng, class Coef>
cemnet::LpProblem random_problem(Rng& rng, std::size_t max_vars, Coef coef) {
  cemnet::LpProblem p;
  const std::size_t n = 1 + rng() % max_vars;
  for (std::size_t v = 0; v < n; ++v) p.objective.push_back(coef(rng));
  const std::size_t m = rng() % (n + 3);
  for (std::size_t r = 0; r < m; ++r) {
    std::vector<std::size_t> row;
    const std::size_t len = 1 + rng() % std::min<std::size_t>(n, 5);
    while (row.size() < len) {
      const std::size_t v = rng() % n;
      if (std::find(row.begin(), row.end(), v) == row.end()) row.push_back(v);
    }
    p.rows.push_back(row);
  }
  return p;
}

}  // namespace lp_reference

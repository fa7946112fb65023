#include <gtest/gtest.h>

#include <random>
#include <set>

#include "support.hpp"

using namespace cemnet;
using namespace testing_support;

namespace {

// Reachability oracle: BFS from the author over graph edges that go from an
// earlier participant to a later one.
bool feasible_by_paths(const InferredGraph& g, const Episode& ep) {
  const std::size_t k = ep.size();
  std::vector<bool> reached(k, false);
  reached[0] = true;
  for (bool grew = true; grew;) {
    grew = false;
    for (std::size_t a = 0; a < k; ++a) {
      if (!reached[a]) continue;
      for (std::size_t b = a + 1; b < k; ++b)
        if (!reached[b] && g.has_edge(ep.ordered_users[a].uid, ep.ordered_users[b].uid)) reached[b] = grew = true;
    }
  }
  return std::all_of(reached.begin(), reached.end(), [](bool r) { return r; });
}

}  // namespace

TEST(Constraints, ExampleTraceRows) {
  const Trace t = t1();
  const auto eps = build_episodes(t);
  const auto pairs = pair_counts(eps, t.num_users());
  const auto sys = build_constraints(eps, pairs);
  ASSERT_EQ(sys.rows.size(), 4u);
  EXPECT_EQ(sys.num_variables, pairs.size());
  const UserId u1 = uid(t, "U1"), u2 = uid(t, "U2"), u3 = uid(t, "U3");
  auto vars = [&](std::size_t r) {
    std::set<std::pair<UserId, UserId>> out;
    for (auto k : sys.rows[r].predecessors) out.insert({pairs.src(k), pairs.dst(k)});
    return out;
  };
  using S = std::set<std::pair<UserId, UserId>>;
  EXPECT_EQ(vars(0), (S{{u1, u2}}));
  EXPECT_EQ(vars(1), (S{{u1, u3}, {u2, u3}}));
  EXPECT_EQ(vars(2), (S{{u2, u3}}));
  EXPECT_EQ(vars(3), (S{{u2, u1}, {u3, u1}}));
  EXPECT_EQ(sys.rows[3].target, u1);
  EXPECT_EQ(sys.rows[3].episode, 1u);
}

TEST(Constraints, TwoUserEpisodeForcesItsEdge) {
  const auto eps = std::vector<Episode>{episode({3, 1})};
  const auto pairs = pair_counts(eps, 4);
  const auto sys = build_constraints(eps, pairs);
  ASSERT_EQ(sys.rows.size(), 1u);
  ASSERT_EQ(sys.rows[0].predecessors.size(), 1u);
  EXPECT_EQ(pairs.src(sys.rows[0].predecessors[0]), 3);
  EXPECT_EQ(pairs.dst(sys.rows[0].predecessors[0]), 1);
}

TEST(ConstraintsProperty, RowCountsAndSizes) {
  std::mt19937_64 rng(21);
  for (int round = 0; round < 30; ++round) {
    const auto eps = random_episodes(rng, 15, 20, 10);
    const auto sys = build_constraints(eps, pair_counts(eps, 15));
    std::size_t expected = 0;
    for (const auto& e : eps) expected += e.size() - 1;
    ASSERT_EQ(sys.rows.size(), expected);
    std::size_t r = 0;
    for (const auto& e : eps)
      for (std::size_t b = 1; b < e.size(); ++b, ++r) {
        EXPECT_EQ(sys.rows[r].predecessors.size(), b);
        EXPECT_NE(sys.rows[r].target, e.author);
      }
  }
}

TEST(Feasibility, ExampleGraphs) {
  const Trace t = t1();
  const auto eps = build_episodes(t);
  const UserId u1 = uid(t, "U1"), u2 = uid(t, "U2"), u3 = uid(t, "U3");
  InferredGraph ga(3);  // explains the second episode only
  ga.add_edge(u2, u3);
  ga.add_edge(u2, u1);
  const auto ra = check_feasibility(ga, eps);
  EXPECT_DOUBLE_EQ(ra.fraction, 0.5);
  EXPECT_FALSE(ra.per_episode[0]);
  EXPECT_TRUE(ra.per_episode[1]);

  InferredGraph gc(3);
  gc.add_edge(u1, u2);
  gc.add_edge(u2, u3);
  gc.add_edge(u3, u1);
  EXPECT_DOUBLE_EQ(check_feasibility(gc, eps).fraction, 1.0);
  EXPECT_EQ(check_feasibility(gc, eps).n_feasible, 2u);
}

TEST(Feasibility, CompleteGraphExplainsEverything) {
  std::mt19937_64 rng(22);
  const auto eps = random_episodes(rng, 9, 40, 9);
  EXPECT_DOUBLE_EQ(check_feasibility(complete_graph(9), eps).fraction, 1.0);
}

TEST(Feasibility, EmptyEpisodeListIsFullyFeasible) {
  EXPECT_DOUBLE_EQ(check_feasibility(InferredGraph(3), {}).fraction, 1.0);
}

TEST(FeasibilityProperty, LocalCriterionMatchesPathSearch) {
  std::mt19937_64 rng(23);
  for (int round = 0; round < 200; ++round) {
    const std::size_t n = 7;
    const auto eps = random_episodes(rng, n, 10, 7);
    const auto g = random_graph(rng, n, std::uniform_real_distribution<double>(0.1, 0.8)(rng));
    const auto report = check_feasibility(g, eps);
    for (std::size_t s = 0; s < eps.size(); ++s) EXPECT_EQ(report.per_episode[s], feasible_by_paths(g, eps[s]));
  }
}

TEST(FeasibilityProperty, AddingEdgesNeverHurts) {
  std::mt19937_64 rng(24);
  for (int round = 0; round < 50; ++round) {
    const std::size_t n = 8;
    const auto eps = random_episodes(rng, n, 15, 6);
    InferredGraph g = random_graph(rng, n, 0.2);
    double last = check_feasibility(g, eps).fraction;
    for (int extra = 0; extra < 20; ++extra) {
      const auto i = static_cast<UserId>(rng() % n), j = static_cast<UserId>(rng() % n);
      if (i == j) continue;
      g.add_edge(i, j);
      const double now = check_feasibility(g, eps).fraction;
      EXPECT_GE(now, last);
      last = now;
    }
  }
}

TEST(FeasibilityProperty, BinaryCoverInducesFeasibleGraph) {
  std::mt19937_64 rng(25);
  for (int round = 0; round < 50; ++round) {
    const std::size_t n = 8;
    const auto eps = random_episodes(rng, n, 12, 6);
    const auto pairs = pair_counts(eps, n);
    const auto sys = build_constraints(eps, pairs);
    // a random binary cover: one random predecessor per row
    std::vector<int> sigma(pairs.size(), 0);
    for (const auto& row : sys.rows) sigma[row.predecessors[rng() % row.predecessors.size()]] = 1;
    InferredGraph g(n);
    for (std::size_t k = 0; k < pairs.size(); ++k)
      if (sigma[k]) g.add_edge(pairs.src(k), pairs.dst(k));
    EXPECT_DOUBLE_EQ(check_feasibility(g, eps).fraction, 1.0);
  }
}

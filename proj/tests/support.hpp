#pragma once
// Shared fixtures and hand-rolled generators for the unit tests.

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cemnet/cemnet.hpp"

namespace testing_support {

using namespace cemnet;

// The six-row example trace: P1 by U1 reshared by U2 then U3 (via P2),
// P3 by U2 reshared by U3 then U1.
inline const char* kT1 =
    "pid,t,uid,rid\n"
    "P1,2020-01-01T09:20:00Z,U1,-1\n"
    "P2,2020-01-01T09:30:00Z,U2,P1\n"
    "P3,2020-01-01T09:35:00Z,U2,-1\n"
    "P4,2020-01-01T09:40:00Z,U3,P2\n"
    "P5,2020-01-01T09:45:00Z,U3,P3\n"
    "P6,2020-01-01T09:50:00Z,U1,P3\n";

inline Trace parse(const std::string& text) {
  std::istringstream in(text);
  return parse_trace(in);
}

inline Trace t1() { return parse(kT1); }

inline UserId uid(const Trace& t, const char* name) { return *t.find_user(name); }

/// Episode with the given users in order, timestamps 0, 1, 2, ...
inline Episode episode(std::vector<UserId> users) {
  Episode ep;
  ep.author = users.front();
  for (std::size_t k = 0; k < users.size(); ++k) ep.ordered_users.push_back({users[k], static_cast<std::int64_t>(k)});
  return ep;
}

/// Random episodes over n users: each picks 2..max_len distinct users.
inline std::vector<Episode> random_episodes(std::mt19937_64& rng, std::size_t n, std::size_t count,
                                            std::size_t max_len) {
  std::vector<Episode> out;
  std::vector<UserId> users(n);
  for (std::size_t u = 0; u < n; ++u) users[u] = static_cast<UserId>(u);
  for (std::size_t s = 0; s < count; ++s) {
    std::shuffle(users.begin(), users.end(), rng);
    const std::size_t len = std::uniform_int_distribution<std::size_t>(2, std::min(max_len, n))(rng);
    out.push_back(episode({users.begin(), users.begin() + static_cast<std::ptrdiff_t>(len)}));
  }
  return out;
}

inline InferredGraph random_graph(std::mt19937_64& rng, std::size_t n, double density) {
  InferredGraph g(n);
  std::bernoulli_distribution coin(density);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && coin(rng)) g.add_edge(static_cast<UserId>(i), static_cast<UserId>(j));
  return g;
}

/// Random trace text: originals and reposts of earlier rows, integer times.
inline std::string random_trace_text(std::mt19937_64& rng, std::size_t users, std::size_t rows) {
  std::ostringstream out;
  out << "pid,t,uid,rid\n";
  std::uniform_int_distribution<std::size_t> user(0, users - 1);
  std::bernoulli_distribution original(0.3);
  for (std::size_t k = 0; k < rows; ++k) {
    out << 'p' << k << ',' << k * 10 + std::uniform_int_distribution<int>(0, 9)(rng) << ",u" << user(rng) << ',';
    if (k == 0 || original(rng)) {
      out << "-1\n";
    } else {
      out << 'p' << std::uniform_int_distribution<std::size_t>(0, k - 1)(rng) << '\n';
    }
  }
  return out.str();
}

}  // namespace testing_support

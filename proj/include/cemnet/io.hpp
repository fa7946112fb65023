#pragma once
// File formats: graph / score CSV (src,dst,q), labels CSV (uid,community) and
// the JSON forms of simulator configs, EM states and evaluation reports.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "cemnet/community.hpp"
#include "cemnet/constraints.hpp"
#include "cemnet/em.hpp"
#include "cemnet/graph.hpp"
#include "cemnet/metrics.hpp"
#include "cemnet/simulate.hpp"
#include "cemnet/trace.hpp"

namespace cemnet {

using Json = nlohmann::json;

/// Malformed or schema-violating input file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("cannot format number");
  return std::string(buf, end);
}

/// User names <-> dense ids; new names are appended.
class UserTable {
 public:
  UserTable() = default;
  explicit UserTable(std::vector<std::string> names) {
    for (auto& n : names) intern(n);
  }

  UserId intern(std::string_view name) {
    auto [it, inserted] = index_.try_emplace(std::string{name}, static_cast<UserId>(names_.size()));
    if (inserted) names_.emplace_back(name);
    return it->second;
  }

  std::optional<UserId> find(std::string_view name) const {
    auto it = index_.find(std::string{name});
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, UserId> index_;
};

struct NamedEdge {
  std::string src;
  std::string dst;
  double score = 1.0;
};

namespace detail {

inline double parse_double(std::string_view s, const std::string& where) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw FormatError(where + "not a number: '" + std::string{s} + "'");
  return v;
}

inline int parse_int(std::string_view s, const std::string& where) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw FormatError(where + "not an integer: '" + std::string{s} + "'");
  return v;
}

/// Reads a CSV whose header starts with the given columns; calls
/// `row(fields, where)` per non-empty data line.
template <class F>
void read_csv(std::istream& in, const std::vector<std::string_view>& header, std::string_view what, F&& row) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError(std::string{what} + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto head = split_csv(line);
  bool ok = head.size() >= header.size();
  for (std::size_t k = 0; ok && k < header.size(); ++k) ok = trim(head[k]) == header[k];
  if (!ok) throw FormatError(std::string{what} + ": unexpected header '" + line + "'");
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_csv(line);
    for (auto& f : fields) f = trim(f);
    row(fields, std::string{what} + " line " + std::to_string(number) + ": ");
  }
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

}  // namespace detail

/// `src,dst[,q]` rows; a missing q reads as 1. `*` is kept verbatim (score
/// files use it for the default row).
inline std::vector<NamedEdge> read_edges(std::istream& in, std::string_view what = "graph") {
  std::vector<NamedEdge> edges;
  detail::read_csv(in, {"src", "dst"}, what, [&](const std::vector<std::string_view>& f, const std::string& where) {
    if (f.size() < 2 || f.size() > 3) throw FormatError(where + "expected 2 or 3 fields");
    if (f[0].empty() || f[1].empty()) throw FormatError(where + "empty user id");
    NamedEdge e{std::string{f[0]}, std::string{f[1]}, 1.0};
    if (f.size() == 3) e.score = detail::parse_double(f[2], where);
    edges.push_back(std::move(e));
  });
  return edges;
}

inline std::vector<NamedEdge> read_edges_file(const std::string& path, std::string_view what = "graph") {
  auto in = detail::open_input(path);
  return read_edges(in, std::string{what} + " '" + path + "'");
}

/// Resolves names against `users`. With `extend`, unknown names are added;
/// otherwise they are an error naming the uid.
inline InferredGraph resolve_graph(const std::vector<NamedEdge>& edges, UserTable& users, bool extend,
                                   std::string_view what = "graph") {
  auto id = [&](const std::string& name) {
    if (extend) return users.intern(name);
    auto u = users.find(name);
    if (!u) throw std::out_of_range(std::string{what} + " mentions unknown user '" + name + "'");
    return *u;
  };
  std::vector<Edge> resolved;
  for (const auto& e : edges) {
    if (e.src == "*" || e.dst == "*") continue;
    if (e.src == e.dst) throw FormatError(std::string{what} + ": self-loop on '" + e.src + "'");
    resolved.push_back({id(e.src), id(e.dst), e.score});
  }
  InferredGraph g(users.size());
  for (const auto& e : resolved) g.add_edge(e.src, e.dst, e.score);
  return g;
}

/// Edges sorted by (src, dst) id, one `src,dst,q` row each.
inline void write_graph(std::ostream& out, const InferredGraph& graph, const std::vector<std::string>& names) {
  out << "src,dst,q\n";
  for (const auto& e : graph.sorted_edges()) {
    out << names[static_cast<std::size_t>(e.src)] << ',' << names[static_cast<std::size_t>(e.dst)] << ','
        << format_double(e.score) << '\n';
  }
}

inline void write_graph_file(const std::string& path, const InferredGraph& graph,
                             const std::vector<std::string>& names) {
  auto out = detail::open_output(path);
  write_graph(out, graph, names);
}

/// Score file: listed pairs, then (with labels) every unlisted same-label
/// pair at default_same, then one `*,*,v` row for all remaining pairs.
inline void write_scores(std::ostream& out, const PairScores& scores, const std::vector<std::string>& names) {
  out << "src,dst,q\n";
  std::vector<Edge> listed = scores.listed;
  std::sort(listed.begin(), listed.end(),
            [](const Edge& a, const Edge& b) { return a.src != b.src ? a.src < b.src : a.dst < b.dst; });
  auto row = [&](UserId i, UserId j, double v) {
    out << names[static_cast<std::size_t>(i)] << ',' << names[static_cast<std::size_t>(j)] << ',' << format_double(v)
        << '\n';
  };
  for (const auto& e : listed) row(e.src, e.dst, e.score);
  double rest = scores.default_score;
  if (!scores.labels.empty()) {
    std::unordered_set<std::uint64_t> seen;
    for (const auto& e : listed) seen.insert(pair_key(e.src, e.dst));
    const auto n = static_cast<UserId>(scores.num_users);
    for (UserId i = 0; i < n; ++i)
      for (UserId j = 0; j < n; ++j)
        if (i != j && scores.labels[static_cast<std::size_t>(i)] == scores.labels[static_cast<std::size_t>(j)] &&
            !seen.count(pair_key(i, j)))
          row(i, j, scores.default_same);
    rest = scores.default_cross;
  }
  out << "*,*," << format_double(rest) << '\n';
}

/// Reads a score file against a fixed user table (unknown names are an
/// error). Without a `*,*` row unlisted pairs score 0.
inline PairScores read_scores(const std::vector<NamedEdge>& edges, const UserTable& users) {
  PairScores s;
  s.num_users = users.size();
  for (const auto& e : edges) {
    if (e.src == "*" && e.dst == "*") {
      s.default_score = e.score;
      continue;
    }
    if (e.src == "*" || e.dst == "*") throw FormatError("scores: '*' must appear in both columns");
    auto i = users.find(e.src), j = users.find(e.dst);
    if (!i) throw std::out_of_range("scores mention unknown user '" + e.src + "'");
    if (!j) throw std::out_of_range("scores mention unknown user '" + e.dst + "'");
    s.listed.push_back({*i, *j, e.score});
  }
  return s;
}

inline void write_labels(std::ostream& out, const GroupAssignment& labels, const std::vector<std::string>& names) {
  out << "uid,community\n";
  for (std::size_t u = 0; u < labels.size(); ++u) out << names[u] << ',' << labels[u] << '\n';
}

inline void write_labels_file(const std::string& path, const GroupAssignment& labels,
                              const std::vector<std::string>& names) {
  auto out = detail::open_output(path);
  write_labels(out, labels, names);
}

/// Labels for every user of `users`; a user missing from the file, or a
/// name the table does not know, is an error.
inline GroupAssignment read_labels(std::istream& in, const UserTable& users, std::string_view what = "labels") {
  std::vector<std::optional<int>> raw(users.size());
  detail::read_csv(in, {"uid", "community"}, what, [&](const std::vector<std::string_view>& f, const std::string& where) {
    if (f.size() != 2) throw FormatError(where + "expected 2 fields");
    auto u = users.find(f[0]);
    if (!u) throw std::out_of_range(std::string{what} + " mention unknown user '" + std::string{f[0]} + "'");
    auto& slot = raw[static_cast<std::size_t>(*u)];
    if (slot) throw FormatError(where + "duplicate user '" + std::string{f[0]} + "'");
    slot = detail::parse_int(f[1], where);
  });
  std::vector<int> labels(users.size());
  for (std::size_t u = 0; u < raw.size(); ++u) {
    if (!raw[u]) throw std::out_of_range(std::string{what} + " lack user '" + users.names()[u] + "'");
    labels[u] = *raw[u];
  }
  return densify(labels);
}

inline GroupAssignment read_labels_file(const std::string& path, const UserTable& users) {
  auto in = detail::open_input(path);
  return read_labels(in, users, "labels '" + path + "'");
}

// ---- JSON ----

inline Json to_json(const SimConfig& c) {
  return Json{{"n_users", c.n_users},
              {"n_blocks", c.n_blocks},
              {"block_sizes", c.block_sizes},
              {"min_block_size", c.min_block_size},
              {"p_intra", c.p_intra},
              {"q_inter", c.q_inter},
              {"feed_capacity", c.feed_capacity},
              {"n_events", c.n_events},
              {"post_rate", {c.post_rate.lo, c.post_rate.hi}},
              {"repost_rate", {c.repost_rate.lo, c.repost_rate.hi}},
              {"ticks_per_unit", c.ticks_per_unit}};
}

/// Fields missing from `j` keep their defaults; unknown keys and wrong
/// types are errors.
inline SimConfig sim_config_from_json(const Json& j) {
  if (!j.is_object()) throw FormatError("sim config must be a JSON object");
  SimConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const Json& v = it.value();
    auto rate = [&](RateRange& r) {
      if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        throw FormatError("sim config: '" + key + "' must be [lo, hi]");
      r = {v[0].get<double>(), v[1].get<double>()};
    };
    auto non_negative = [](const Json& x) {
      return x.is_number_unsigned() || (x.is_number_integer() && x.get<std::int64_t>() >= 0);
    };
    auto count = [&](std::size_t& out) {
      if (!non_negative(v)) throw FormatError("sim config: '" + key + "' must be a non-negative integer");
      out = v.get<std::size_t>();
    };
    auto real = [&](double& out) {
      if (!v.is_number()) throw FormatError("sim config: '" + key + "' must be a number");
      out = v.get<double>();
    };
    if (key == "n_users") count(c.n_users);
    else if (key == "n_blocks") count(c.n_blocks);
    else if (key == "min_block_size") count(c.min_block_size);
    else if (key == "feed_capacity") count(c.feed_capacity);
    else if (key == "n_events") count(c.n_events);
    else if (key == "p_intra") real(c.p_intra);
    else if (key == "q_inter") real(c.q_inter);
    else if (key == "post_rate") rate(c.post_rate);
    else if (key == "repost_rate") rate(c.repost_rate);
    else if (key == "ticks_per_unit") {
      if (!v.is_number_integer()) throw FormatError("sim config: 'ticks_per_unit' must be an integer");
      c.ticks_per_unit = v.get<std::int64_t>();
    } else if (key == "block_sizes") {
      if (!v.is_array()) throw FormatError("sim config: 'block_sizes' must be an array");
      c.block_sizes.clear();
      for (const auto& b : v) {
        if (!non_negative(b)) throw FormatError("sim config: block sizes must be non-negative integers");
        c.block_sizes.push_back(b.get<std::size_t>());
      }
    } else {
      throw FormatError("sim config: unknown field '" + key + "'");
    }
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("sim config: ") + e.what());
  }
  return c;
}

inline Json to_json(const EmState& s) {
  Json j{{"prior", to_string(s.prior)},
         {"lambda", s.lambda},
         {"alpha", s.params.alpha},
         {"beta", s.params.beta},
         {"iterations", s.iteration},
         {"delta_q", std::isfinite(s.delta_q) ? Json(s.delta_q) : Json(nullptr)},
         {"converged", s.converged},
         {"restarts", s.restarts},
         {"n_users", s.num_users},
         {"n_active_pairs", s.pairs.size()}};
  if (s.beta_fixed) j["beta_fixed"] = *s.beta_fixed;
  if (s.prior == PriorKind::ER) {
    j["rho"] = s.params.rho;
  } else {
    j["p"] = s.params.p;
    j["q"] = s.params.q;
    j["n_communities"] = num_groups(s.labels);
  }
  return j;
}

inline Json to_json(const FeasibilityReport& r) {
  return Json{{"fraction", r.fraction}, {"n_feasible", r.n_feasible}, {"n_episodes", r.n_episodes}};
}

inline Json to_json(const GraphStats& s) {
  return Json{{"n_nodes", s.n_nodes},
              {"n_edges", s.n_edges},
              {"avg_out_degree", s.avg_out_degree},
              {"max_out_degree", s.max_out_degree},
              {"max_in_degree", s.max_in_degree},
              {"diameter", s.diameter},
              {"avg_shortest_path", s.avg_shortest_path ? Json(*s.avg_shortest_path) : Json(nullptr)},
              {"max_scc_size", s.max_scc_size},
              {"max_scc_pct", 100.0 * s.max_scc_fraction}};
}

inline Json to_json(const EvalReport& r) {
  Json j{{"precision", r.precision},
         {"recall", r.recall},
         {"f1", r.f1},
         {"auc", r.auc},
         {"confusion", {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"fn", r.confusion.fn}, {"tn", r.confusion.tn}}}};
  if (r.feasibility) j["feasibility"] = *r.feasibility;
  return j;
}

inline Json read_json_file(const std::string& path) {
  auto in = detail::open_input(path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw FormatError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_json_file(const std::string& path, const Json& j) {
  auto out = detail::open_output(path);
  out << j.dump(2) << '\n';
}

}  // namespace cemnet

#pragma once
// Post/repost traces: parsing, root resolution, episodes and temporal pair
// counts M_ij.
//
// Trace file format (UTF-8 CSV):
//   pid,t,uid,rid
//   P1,100,U1,-1
//   P2,160,U2,P1
// rid = -1 marks an original post. t is either a non-negative integer or an
// RFC3339 timestamp; one file uses one kind throughout.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cemnet/graph.hpp"
#include "cemnet/log.hpp"

namespace cemnet {

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::int32_t kNoParent = -1;

enum class TimeFormat { Ticks, Rfc3339 };

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

template <typename Int>
std::optional<Int> parse_int(std::string_view s) {
  Int value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

inline bool is_all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace detail

/// Parses "YYYY-MM-DDTHH:MM:SS[.frac](Z|+HH:MM|-HH:MM)" into microseconds
/// since the Unix epoch.
inline std::optional<std::int64_t> parse_rfc3339(std::string_view s) {
  using detail::parse_int;
  if (s.size() < 20 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != 't' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':') {
    return std::nullopt;
  }
  auto year = parse_int<int>(s.substr(0, 4));
  auto month = parse_int<unsigned>(s.substr(5, 2));
  auto day = parse_int<unsigned>(s.substr(8, 2));
  auto hour = parse_int<int>(s.substr(11, 2));
  auto minute = parse_int<int>(s.substr(14, 2));
  auto second = parse_int<int>(s.substr(17, 2));
  if (!year || !month || !day || !hour || !minute || !second) return std::nullopt;
  if (*hour > 23 || *minute > 59 || *second > 60) return std::nullopt;

  std::size_t pos = 19;
  std::int64_t micros = 0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    std::size_t digits = 0;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      if (digits < 6) micros = micros * 10 + (s[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0) return std::nullopt;
    for (std::size_t d = digits; d < 6; ++d) micros *= 10;
  }
  std::int64_t offset_seconds = 0;
  if (pos >= s.size()) return std::nullopt;
  if (s[pos] == 'Z' || s[pos] == 'z') {
    ++pos;
  } else if (s[pos] == '+' || s[pos] == '-') {
    if (s.size() != pos + 6 || s[pos + 3] != ':') return std::nullopt;
    auto oh = parse_int<int>(s.substr(pos + 1, 2));
    auto om = parse_int<int>(s.substr(pos + 4, 2));
    if (!oh || !om) return std::nullopt;
    offset_seconds = (*oh * 3600 + *om * 60) * (s[pos] == '+' ? 1 : -1);
    pos += 6;
  } else {
    return std::nullopt;
  }
  if (pos != s.size()) return std::nullopt;

  std::chrono::year_month_day ymd{std::chrono::year{*year}, std::chrono::month{*month},
                                  std::chrono::day{*day}};
  if (!ymd.ok()) return std::nullopt;
  const std::int64_t days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  const std::int64_t seconds =
      days * 86400 + *hour * 3600 + *minute * 60 + *second - offset_seconds;
  return seconds * 1'000'000 + micros;
}

/// Formats microseconds since epoch as UTC RFC3339.
inline std::string format_rfc3339(std::int64_t micros) {
  using namespace std::chrono;
  const std::int64_t secs = micros >= 0 ? micros / 1'000'000 : -((-micros + 999'999) / 1'000'000);
  const std::int64_t frac = micros - secs * 1'000'000;
  const sys_days day_point{days{secs >= 0 ? secs / 86400 : -((-secs + 86399) / 86400)}};
  const std::int64_t in_day = secs - day_point.time_since_epoch().count() * 86400;
  const year_month_day ymd{day_point};
  char buf[64];
  int n = std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                        static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                        static_cast<int>(in_day / 3600), static_cast<int>(in_day / 60 % 60),
                        static_cast<int>(in_day % 60));
  std::string out(buf, static_cast<std::size_t>(n));
  if (frac != 0) {
    std::snprintf(buf, sizeof buf, ".%06lld", static_cast<long long>(frac));
    out += buf;
  }
  out += 'Z';
  return out;
}

/// One row of a trace with identifiers interned. pid equals the row index;
/// rid is the row index of the reposted record or kNoParent for originals.
struct TraceRecord {
  std::int32_t pid = 0;
  std::int64_t t = 0;
  UserId uid = 0;
  std::int32_t rid = kNoParent;
};

class Trace {
 public:
  std::vector<TraceRecord> records;
  std::vector<std::string> pid_names;
  std::vector<std::string> user_names;
  TimeFormat time_format = TimeFormat::Ticks;

  std::size_t size() const { return records.size(); }
  std::size_t num_users() const { return user_names.size(); }

  std::size_t num_originals() const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(),
                                                  [](const TraceRecord& r) { return r.rid == kNoParent; }));
  }

  std::optional<std::int32_t> find_pid(std::string_view name) const {
    for (std::size_t k = 0; k < pid_names.size(); ++k)
      if (pid_names[k] == name) return static_cast<std::int32_t>(k);
    return std::nullopt;
  }

  std::optional<UserId> find_user(std::string_view name) const {
    for (std::size_t k = 0; k < user_names.size(); ++k)
      if (user_names[k] == name) return static_cast<UserId>(k);
    return std::nullopt;
  }

  std::unordered_map<std::string, UserId> user_index() const {
    std::unordered_map<std::string, UserId> out;
    for (std::size_t k = 0; k < user_names.size(); ++k) out.emplace(user_names[k], static_cast<UserId>(k));
    return out;
  }

  std::string format_time(std::int64_t t) const {
    return time_format == TimeFormat::Ticks ? std::to_string(t) : format_rfc3339(t);
  }

  /// The first n rows. Reposts whose parent falls outside the prefix are
  /// dropped; the user table is kept whole.
  Trace head(std::size_t n) const;
};

/// Accumulates rows with string identifiers and interns them into a Trace.
class TraceBuilder {
 public:
  explicit TraceBuilder(TimeFormat format = TimeFormat::Ticks) : format_(format) {}

  /// Registers a user without a row; lets callers fix the user table order.
  UserId add_user(std::string_view name) {
    auto [it, inserted] = users_.try_emplace(std::string{name}, static_cast<UserId>(user_names_.size()));
    if (inserted) user_names_.emplace_back(name);
    return it->second;
  }

  /// `line` is only used in error messages.
  void add(std::string_view pid, std::int64_t t, std::string_view uid, std::optional<std::string_view> rid,
           std::size_t line = 0) {
    auto [it, inserted] = pids_.try_emplace(std::string{pid}, rows_.size());
    if (!inserted) {
      throw TraceError(where(line) + "duplicate pid '" + std::string{pid} + "'");
    }
    rows_.push_back({std::string{pid}, t, add_user(uid), rid ? std::optional<std::string>{std::string{*rid}} : std::nullopt,
                     line == 0 ? rows_.size() + 1 : line});
  }

  std::size_t size() const { return rows_.size(); }

  /// Resolves rid references. Missing parents are a hard error unless
  /// drop_orphans is set, in which case the row (and any repost of it) is
  /// dropped with a warning.
  Trace build(bool drop_orphans = false, bool quiet = false) const {
    const std::size_t n = rows_.size();
    std::vector<std::int64_t> parent(n, kNoParent);
    std::vector<bool> keep(n, true);
    for (std::size_t k = 0; k < n; ++k) {
      if (!rows_[k].rid) continue;
      auto it = pids_.find(*rows_[k].rid);
      if (it == pids_.end()) {
        if (!drop_orphans) {
          throw TraceError(where(rows_[k].line) + "rid '" + *rows_[k].rid + "' references a missing pid");
        }
        if (!quiet) log().warn("dropping row {}: rid '{}' references a missing pid", rows_[k].line, *rows_[k].rid);
        keep[k] = false;
        continue;
      }
      parent[k] = static_cast<std::int64_t>(it->second);
    }
    // Propagate drops to reposts of dropped rows.
    for (bool changed = true; changed;) {
      changed = false;
      for (std::size_t k = 0; k < n; ++k) {
        if (keep[k] && parent[k] != kNoParent && !keep[static_cast<std::size_t>(parent[k])]) {
          keep[k] = false;
          changed = true;
          if (!quiet) log().warn("dropping row {}: its parent was dropped", rows_[k].line);
        }
      }
    }

    std::vector<std::int32_t> new_index(n, kNoParent);
    Trace trace;
    trace.time_format = format_;
    trace.user_names = user_names_;
    for (std::size_t k = 0; k < n; ++k) {
      if (!keep[k]) continue;
      new_index[k] = static_cast<std::int32_t>(trace.records.size());
      trace.records.push_back({new_index[k], rows_[k].t, rows_[k].uid, kNoParent});
      trace.pid_names.push_back(rows_[k].pid);
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (keep[k] && parent[k] != kNoParent) {
        trace.records[static_cast<std::size_t>(new_index[k])].rid = new_index[static_cast<std::size_t>(parent[k])];
      }
    }
    return trace;
  }

 private:
  struct Row {
    std::string pid;
    std::int64_t t;
    UserId uid;
    std::optional<std::string> rid;
    std::size_t line;
  };

  static std::string where(std::size_t line) { return "line " + std::to_string(line) + ": "; }

  TimeFormat format_;
  std::vector<Row> rows_;
  std::unordered_map<std::string, std::size_t> pids_;
  std::unordered_map<std::string, UserId> users_;
  std::vector<std::string> user_names_;
};

inline Trace Trace::head(std::size_t n) const {
  TraceBuilder builder(time_format);
  for (const auto& name : user_names) builder.add_user(name);
  const std::size_t limit = std::min(n, records.size());
  for (std::size_t k = 0; k < limit; ++k) {
    const auto& r = records[k];
    std::optional<std::string_view> rid;
    if (r.rid != kNoParent) rid = pid_names[static_cast<std::size_t>(r.rid)];
    builder.add(pid_names[k], r.t, user_names[static_cast<std::size_t>(r.uid)], rid, k + 2);
  }
  return builder.build(/*drop_orphans=*/true, /*quiet=*/true);
}

struct ParseOptions {
  bool drop_orphans = false;
};

/// Reads a trace in the CSV format described at the top of this header.
inline Trace parse_trace(std::istream& in, const ParseOptions& options = {}) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) {
      have_header = true;
      break;
    }
  }
  if (!have_header) throw TraceError("empty trace");
  {
    auto cols = detail::split_csv(line);
    if (!line.empty() && line.rfind("\xEF\xBB\xBF", 0) == 0) cols = detail::split_csv(std::string_view{line}.substr(3));
    if (cols.size() != 4 || cols[0] != "pid" || cols[1] != "t" || cols[2] != "uid" || cols[3] != "rid") {
      throw TraceError("line " + std::to_string(line_no) + ": expected header 'pid,t,uid,rid'");
    }
  }

  std::optional<TimeFormat> format;
  TraceBuilder builder;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cols = detail::split_csv(line);
    const std::string at = "line " + std::to_string(line_no) + ": ";
    if (cols.size() != 4) {
      throw TraceError(at + "expected 4 fields, got " + std::to_string(cols.size()));
    }
    if (cols[0].empty() || cols[2].empty() || cols[3].empty()) throw TraceError(at + "empty field");

    const TimeFormat row_format = detail::is_all_digits(cols[1]) ? TimeFormat::Ticks : TimeFormat::Rfc3339;
    if (!format) {
      format = row_format;
      builder = TraceBuilder(*format);
    } else if (*format != row_format) {
      throw TraceError(at + "timestamp '" + std::string{cols[1]} + "' does not match the file's timestamp format");
    }
    std::optional<std::int64_t> t = row_format == TimeFormat::Ticks ? detail::parse_int<std::int64_t>(cols[1])
                                                                     : parse_rfc3339(cols[1]);
    if (!t) throw TraceError(at + "unparsable timestamp '" + std::string{cols[1]} + "'");

    std::optional<std::string_view> rid;
    if (cols[3] != "-1") rid = cols[3];
    builder.add(cols[0], *t, cols[2], rid, line_no);
  }
  if (builder.size() == 0) throw TraceError("empty trace");
  return builder.build(options.drop_orphans);
}

inline Trace parse_trace_file(const std::string& path, const ParseOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open trace file '" + path + "'");
  return parse_trace(in, options);
}

inline void write_trace(std::ostream& out, const Trace& trace) {
  out << "pid,t,uid,rid\n";
  for (const auto& r : trace.records) {
    out << trace.pid_names[static_cast<std::size_t>(r.pid)] << ',' << trace.format_time(r.t) << ','
        << trace.user_names[static_cast<std::size_t>(r.uid)] << ','
        << (r.rid == kNoParent ? std::string{"-1"} : trace.pid_names[static_cast<std::size_t>(r.rid)]) << '\n';
  }
}

/// Follows rid links from `pid` to the original post it ultimately reposts.
inline std::int32_t resolve_root(const Trace& trace, std::int32_t pid) {
  if (pid < 0 || static_cast<std::size_t>(pid) >= trace.size()) {
    throw TraceError("pid index " + std::to_string(pid) + " not in trace");
  }
  std::int32_t current = pid;
  for (std::size_t steps = 0; steps <= trace.size(); ++steps) {
    const std::int32_t parent = trace.records[static_cast<std::size_t>(current)].rid;
    if (parent == kNoParent) return current;
    current = parent;
  }
  throw TraceError("cycle in repost chain starting at pid '" + trace.pid_names[static_cast<std::size_t>(pid)] + "'");
}

struct Participant {
  UserId uid = 0;
  std::int64_t t = 0;
};

/// An original post and the time-ordered users who shared it, author first.
struct Episode {
  std::int32_t root_pid = 0;
  UserId author = 0;
  std::vector<Participant> ordered_users;

  std::size_t size() const { return ordered_users.size(); }
};

struct EpisodeOptions {
  /// Keep only originals reposted by at least one other user.
  bool reposted_only = true;
};

/// Groups reposts by resolved root. Users are ordered by timestamp with ties
/// broken by row order; repeated shares of one root by the same user keep the
/// earliest; an author resharing their own post is ignored.
inline std::vector<Episode> build_episodes(const Trace& trace, const EpisodeOptions& options = {}) {
  const std::size_t n = trace.size();
  std::vector<std::int32_t> root(n, kNoParent);
  std::vector<std::int32_t> chain;
  for (std::size_t k = 0; k < n; ++k) {
    if (root[k] != kNoParent) continue;
    chain.clear();
    std::int32_t cur = static_cast<std::int32_t>(k);
    while (root[static_cast<std::size_t>(cur)] == kNoParent) {
      const auto& rec = trace.records[static_cast<std::size_t>(cur)];
      if (rec.rid == kNoParent) {
        root[static_cast<std::size_t>(cur)] = cur;
        break;
      }
      chain.push_back(cur);
      if (chain.size() > n) throw TraceError("cycle in repost chain at pid '" + trace.pid_names[k] + "'");
      cur = rec.rid;
    }
    const std::int32_t r = root[static_cast<std::size_t>(cur)];
    for (std::int32_t c : chain) root[static_cast<std::size_t>(c)] = r;
  }

  std::unordered_map<std::int32_t, std::vector<std::size_t>> reposts;
  for (std::size_t k = 0; k < n; ++k)
    if (trace.records[k].rid != kNoParent) reposts[root[k]].push_back(k);

  std::vector<Episode> episodes;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& original = trace.records[k];
    if (original.rid != kNoParent) continue;
    Episode ep;
    ep.root_pid = static_cast<std::int32_t>(k);
    ep.author = original.uid;
    ep.ordered_users.push_back({original.uid, original.t});

    auto it = reposts.find(static_cast<std::int32_t>(k));
    if (it != reposts.end()) {
      auto rows = it->second;
      std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
        return trace.records[a].t < trace.records[b].t;
      });
      std::unordered_set<UserId> seen{original.uid};
      for (std::size_t row : rows) {
        const auto& rec = trace.records[row];
        if (!seen.insert(rec.uid).second) continue;
        if (rec.t < original.t) {
          throw TraceError("repost '" + trace.pid_names[row] + "' is timestamped before its original '" +
                           trace.pid_names[k] + "'");
        }
        ep.ordered_users.push_back({rec.uid, rec.t});
      }
    }
    if (options.reposted_only && ep.size() < 2) continue;
    episodes.push_back(std::move(ep));
  }
  return episodes;
}

/// Sparse per-ordered-pair storage. Only pairs with M_ij > 0 are stored,
/// sorted by (src, dst). The sigma/q/w slots are working state for the EM.
class PairTable {
 public:
  PairTable() = default;
  explicit PairTable(std::size_t num_users) : num_users_(num_users) {}

  std::size_t num_users() const { return num_users_; }
  std::size_t size() const { return src_.size(); }

  UserId src(std::size_t k) const { return src_[k]; }
  UserId dst(std::size_t k) const { return dst_[k]; }
  std::uint32_t m(std::size_t k) const { return m_[k]; }
  const std::vector<std::uint32_t>& counts() const { return m_; }

  std::vector<double>& sigma() { return sigma_; }
  const std::vector<double>& sigma() const { return sigma_; }
  std::vector<double>& q() { return q_; }
  const std::vector<double>& q() const { return q_; }
  std::vector<double>& w() { return w_; }
  const std::vector<double>& w() const { return w_; }

  std::optional<std::size_t> find(UserId src, UserId dst) const {
    auto it = index_.find(pair_key(src, dst));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::uint32_t m(UserId src, UserId dst) const {
    auto k = find(src, dst);
    return k ? m_[*k] : 0;
  }

  /// Builds from (key, count) entries; keys must be distinct.
  static PairTable from_counts(std::size_t num_users, std::vector<std::pair<std::uint64_t, std::uint32_t>> entries) {
    std::sort(entries.begin(), entries.end());
    PairTable table(num_users);
    table.src_.reserve(entries.size());
    for (const auto& [key, count] : entries) {
      if (count == 0) continue;
      const auto src = static_cast<UserId>(key >> 32);
      const auto dst = static_cast<UserId>(key & 0xffffffffu);
      if (src == dst) throw std::invalid_argument("pair table cannot hold self-pairs");
      table.index_.emplace(key, table.src_.size());
      table.src_.push_back(src);
      table.dst_.push_back(dst);
      table.m_.push_back(count);
    }
    table.sigma_.assign(table.size(), 0.0);
    table.q_.assign(table.size(), 0.0);
    table.w_.assign(table.size(), 0.0);
    return table;
  }

 private:
  std::size_t num_users_ = 0;
  std::vector<UserId> src_;
  std::vector<UserId> dst_;
  std::vector<std::uint32_t> m_;
  std::vector<double> sigma_;
  std::vector<double> q_;
  std::vector<double> w_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

/// M_ij = number of episodes in which i appears strictly before j.
inline PairTable pair_counts(const std::vector<Episode>& episodes, std::size_t num_users) {
  std::unordered_map<std::uint64_t, std::uint32_t> counts;
  for (const auto& ep : episodes) {
    const auto& users = ep.ordered_users;
    for (std::size_t b = 1; b < users.size(); ++b)
      for (std::size_t a = 0; a < b; ++a) ++counts[pair_key(users[a].uid, users[b].uid)];
  }
  return PairTable::from_counts(num_users, {counts.begin(), counts.end()});
}

}  // namespace cemnet

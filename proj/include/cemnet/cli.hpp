#pragma once
// Command-line front end: simulate, infer, baseline, evaluate, stats and
// feascheck. Every run writes <primary output>.manifest.json.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#include "CLI11.hpp"

#include "cemnet/baselines.hpp"
#include "cemnet/community.hpp"
#include "cemnet/constraints.hpp"
#include "cemnet/em.hpp"
#include "cemnet/io.hpp"
#include "cemnet/lp.hpp"
#include "cemnet/metrics.hpp"
#include "cemnet/simulate.hpp"
#include "cemnet/trace.hpp"

namespace cemnet::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Bad invocation or input that does not match its schema (exit 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256 unavailable");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int k = 0; k < len; ++k) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[k]);
  return hex.str();
}

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::optional<std::uint64_t> seed;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, sha256
  std::vector<std::string> outputs;
  std::string version = kVersion;
  double runtime_seconds = 0.0;
};

inline Json to_json(const RunManifest& m) {
  Json inputs = Json::array();
  for (const auto& [path, digest] : m.inputs) inputs.push_back({{"path", path}, {"sha256", digest}});
  return Json{{"command", m.command},
              {"argv", m.argv},
              {"seed", m.seed ? Json(*m.seed) : Json(nullptr)},
              {"inputs", inputs},
              {"outputs", m.outputs},
              {"version", m.version},
              {"runtime_seconds", m.runtime_seconds}};
}

namespace detail {

struct TraceInput {
  std::string path;
  std::size_t head = 0;
  bool drop_orphans = false;
};

inline void add_trace_options(CLI::App* sub, TraceInput& t, bool required = true) {
  auto* opt = sub->add_option("--trace", t.path, "trace CSV (pid,t,uid,rid)");
  if (required) opt->required();
  sub->add_option("--head", t.head, "use only the first N rows (0 = all)");
  sub->add_flag("--drop-orphans", t.drop_orphans, "drop reposts whose parent is missing instead of failing");
}

inline Trace load_trace(const TraceInput& t) {
  ParseOptions options;
  options.drop_orphans = t.drop_orphans;
  Trace trace = parse_trace_file(t.path, options);
  return t.head > 0 ? trace.head(t.head) : trace;
}

inline void emit_error(std::ostream& err, const char* kind, const std::string& message) {
  err << Json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
}

}  // namespace detail

/// Runs one command line; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  const auto started = std::chrono::steady_clock::now();
  CLI::App app{"Follower-graph inference from repost traces"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--threads", threads, "worker threads for pair-level work")->check(CLI::PositiveNumber);

  RunManifest manifest;
  for (int k = 0; k < argc; ++k) manifest.argv.emplace_back(argv[k]);
  std::function<void()> action;
  auto input = [&](const std::string& path) { manifest.inputs.emplace_back(path, sha256_file(path)); };

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic SBM graph and diffusion trace")->fallthrough();
  std::string sim_config, out_trace, out_truth, out_labels;
  std::uint64_t seed = 0;
  sim->add_option("--config", sim_config, "JSON with SimConfig fields (missing fields keep defaults)");
  sim->add_option("--seed", seed);
  sim->add_option("--out-trace", out_trace)->required();
  sim->add_option("--out-truth", out_truth)->required();
  sim->add_option("--out-labels", out_labels)->required();
  sim->callback([&] {
    action = [&] {
      SimConfig config;
      if (!sim_config.empty()) {
        input(sim_config);
        config = sim_config_from_json(read_json_file(sim_config));
      }
      manifest.seed = seed;
      const SimOutput o = simulate(config, seed);
      {
        auto f = cemnet::detail::open_output(out_trace);
        write_trace(f, o.trace);
      }
      write_graph_file(out_truth, o.truth_graph, o.trace.user_names);
      write_labels_file(out_labels, o.truth_labels, o.trace.user_names);
      manifest.outputs = {out_trace, out_truth, out_labels};
    };
  });

  // infer
  auto* inf = app.add_subcommand("infer", "constrained EM (CEM-er / CEM-sbm)")->fallthrough();
  detail::TraceInput trace_in;
  detail::add_trace_options(inf, trace_in);
  std::string prior = "sbm", weights = "previous", fixed_labels, out_graph, out_state, out_scores, out_inf_labels,
              dump_lp_path;
  EmOptions em;
  std::optional<double> beta_fixed;
  inf->add_option("--prior", prior)->check(CLI::IsMember({"er", "sbm"}));
  inf->add_option("--lambda", em.lambda)->check(CLI::Range(0.0, 1.0));
  inf->add_option("--epsilon", em.epsilon)->check(CLI::PositiveNumber);
  inf->add_option("--max-iters", em.max_iters);
  inf->add_option("--max-restarts", em.max_restarts);
  inf->add_option("--seed", seed);
  inf->add_option("--beta-fixed", beta_fixed)->check(CLI::Range(0.0, 1.0));
  inf->add_option("--labels", fixed_labels, "fixed SBM labels (uid,community); skips Louvain");
  inf->add_option("--weights", weights, "alpha/beta used in the sigma LP")->check(CLI::IsMember({"previous", "current"}));
  inf->add_option("--out-graph", out_graph)->required();
  inf->add_option("--out-state", out_state)->required();
  inf->add_option("--out-scores", out_scores, "per-pair Q with prior defaults, for AUC");
  inf->add_option("--out-labels", out_inf_labels, "final SBM labels");
  inf->add_option("--dump-lp", dump_lp_path, "write the last sigma LP in CPLEX LP format");
  inf->callback([&] {
    action = [&] {
      input(trace_in.path);
      const Trace trace = detail::load_trace(trace_in);
      const UserTable users(trace.user_names);
      em.prior = prior == "er" ? PriorKind::ER : PriorKind::SBM;
      em.seed = seed;
      em.beta_fixed = beta_fixed;
      em.threads = threads;
      em.weight_params = weights == "previous" ? WeightParams::Previous : WeightParams::Current;
      if (!fixed_labels.empty()) {
        if (em.prior != PriorKind::SBM) throw UsageError("--labels needs --prior sbm");
        input(fixed_labels);
        em.fixed_labels = read_labels_file(fixed_labels, users);
      }
      LpProblem last_lp;
      if (!dump_lp_path.empty()) em.on_lp = [&](std::size_t, const LpProblem& p) { last_lp = p; };
      manifest.seed = seed;
      const CemResult r = run_cem(build_episodes(trace), trace.num_users(), em);
      write_graph_file(out_graph, r.graph, trace.user_names);
      write_json_file(out_state, to_json(r.state));
      manifest.outputs = {out_graph, out_state};
      if (!out_scores.empty()) {
        auto f = cemnet::detail::open_output(out_scores);
        write_scores(f, pair_scores(r.state), trace.user_names);
        manifest.outputs.push_back(out_scores);
      }
      if (!out_inf_labels.empty()) {
        if (em.prior != PriorKind::SBM) throw UsageError("--out-labels needs --prior sbm");
        write_labels_file(out_inf_labels, r.state.labels, trace.user_names);
        manifest.outputs.push_back(out_inf_labels);
      }
      if (!dump_lp_path.empty()) {
        std::vector<std::string> names;
        for (std::size_t k = 0; k < r.state.pairs.size(); ++k)
          names.push_back("s_" + trace.user_names[static_cast<std::size_t>(r.state.pairs.src(k))] + "_" +
                          trace.user_names[static_cast<std::size_t>(r.state.pairs.dst(k))]);
        auto f = cemnet::detail::open_output(dump_lp_path);
        dump_lp(f, last_lp, names);
        manifest.outputs.push_back(dump_lp_path);
      }
    };
  });

  // baseline
  auto* base = app.add_subcommand("baseline", "Star, Chain, Saito (IC EM) or Newman EM")->fallthrough();
  detail::TraceInput base_trace;
  detail::add_trace_options(base, base_trace);
  std::string method;
  BaselineEmOptions bopt;
  bool positives_only = false;
  base->add_option("--method", method)->required()->check(CLI::IsMember({"star", "chain", "saito", "newman"}));
  base->add_option("--out-graph", out_graph)->required();
  base->add_option("--out-scores", out_scores, "per-pair probabilities (saito, newman)");
  base->add_option("--seed", seed);
  base->add_option("--max-iters", bopt.max_iters);
  base->add_option("--epsilon", bopt.epsilon)->check(CLI::PositiveNumber);
  base->add_flag("--saito-positives-only", positives_only, "Saito denominator M_ij only (no failure trials)");
  base->callback([&] {
    action = [&] {
      input(base_trace.path);
      const Trace trace = detail::load_trace(base_trace);
      const auto episodes = build_episodes(trace);
      const std::size_t n = trace.num_users();
      bopt.seed = seed;
      bopt.count_failures = !positives_only;
      InferredGraph g;
      std::optional<PairScores> scores;
      if (method == "star") {
        g = star_graph(episodes, n);
      } else if (method == "chain") {
        g = chain_graph(episodes, n);
      } else if (method == "saito") {
        manifest.seed = seed;
        auto r = saito_em(episodes, n, bopt);
        scores = PairScores{n, {}, 0.0, {}, 0.0, 0.0};
        for (std::size_t k = 0; k < r.pairs.size(); ++k) scores->listed.push_back({r.pairs.src(k), r.pairs.dst(k), r.kappa[k]});
        g = std::move(r.graph);
      } else {
        manifest.seed = seed;
        auto r = newman_em(episodes, n, bopt);
        scores = PairScores{n, {}, r.rho, {}, 0.0, 0.0};
        for (std::size_t k = 0; k < r.pairs.size(); ++k) scores->listed.push_back({r.pairs.src(k), r.pairs.dst(k), r.q[k]});
        g = std::move(r.graph);
      }
      write_graph_file(out_graph, g, trace.user_names);
      manifest.outputs = {out_graph};
      if (!out_scores.empty()) {
        if (!scores) throw UsageError("--out-scores is only available for saito and newman");
        auto f = cemnet::detail::open_output(out_scores);
        write_scores(f, *scores, trace.user_names);
        manifest.outputs.push_back(out_scores);
      }
    };
  });

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "score an inferred graph against the truth")->fallthrough();
  detail::TraceInput ev_trace;
  detail::add_trace_options(ev, ev_trace);
  std::string inferred_path, truth_path, scores_path, truth_labels_path, inferred_labels_path, out_report;
  ev->add_option("--inferred", inferred_path)->required();
  ev->add_option("--truth", truth_path)->required();
  ev->add_option("--scores", scores_path, "per-pair scores for AUC (default: edge indicator)");
  ev->add_option("--truth-labels", truth_labels_path, "true communities (default: Louvain on the truth graph)");
  ev->add_option("--labels", inferred_labels_path, "inferred communities (default: Louvain on the inferred graph)");
  ev->add_option("--seed", seed, "Louvain seed");
  ev->add_option("--out", out_report)->required();
  ev->callback([&] {
    action = [&] {
      input(ev_trace.path);
      input(inferred_path);
      input(truth_path);
      const Trace trace = detail::load_trace(ev_trace);
      const auto inferred_edges = read_edges_file(inferred_path, "inferred graph");
      const auto truth_edges = read_edges_file(truth_path, "truth graph");
      std::optional<std::vector<NamedEdge>> score_rows;
      if (!scores_path.empty()) {
        input(scores_path);
        score_rows = read_edges_file(scores_path, "scores");
      }
      manifest.seed = seed;
      // Universe: trace users, then truth endpoints; anything else is a mismatch.
      UserTable users(trace.user_names);
      const InferredGraph truth = resolve_graph(truth_edges, users, true, "truth graph");
      const InferredGraph inferred = resolve_graph(inferred_edges, users, false, "inferred graph");
      std::optional<PairScores> scores;
      if (score_rows) scores = read_scores(*score_rows, users);

      EvalReport report = classification_scores(inferred, truth, scores);
      report.feasibility = check_feasibility(inferred, build_episodes(trace)).fraction;

      GroupAssignment truth_labels, inferred_labels;
      if (!truth_labels_path.empty()) {
        input(truth_labels_path);
        truth_labels = read_labels_file(truth_labels_path, users);
      } else {
        truth_labels = louvain(truth, seed).labels;
      }
      if (!inferred_labels_path.empty()) {
        input(inferred_labels_path);
        inferred_labels = read_labels_file(inferred_labels_path, users);
      } else {
        inferred_labels = louvain(inferred, seed).labels;
      }
      const auto pf = pairwise_f1(inferred_labels, truth_labels);
      const auto dens = estimate_block_densities(inferred, inferred_labels);
      auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
      Json j = to_json(report);
      j["n_users"] = users.size();
      j["inferred_stats"] = to_json(graph_stats(inferred));
      j["truth_stats"] = to_json(graph_stats(truth));
      j["community"] = {{"f1", pf.f1},
                        {"precision", pf.precision},
                        {"recall", pf.recall},
                        {"n_inferred", num_groups(inferred_labels)},
                        {"n_truth", num_groups(truth_labels)},
                        {"p_hat", opt(dens.p)},
                        {"q_hat", opt(dens.q)}};
      write_json_file(out_report, j);
      manifest.outputs = {out_report};
    };
  });

  // stats
  auto* st = app.add_subcommand("stats", "network statistics of a graph")->fallthrough();
  std::string graph_path, universe_trace;
  st->add_option("--graph", graph_path)->required();
  st->add_option("--trace", universe_trace, "count every user of this trace as a node");
  st->add_option("--out", out_report)->required();
  st->callback([&] {
    action = [&] {
      input(graph_path);
      UserTable users;
      if (!universe_trace.empty()) {
        input(universe_trace);
        users = UserTable(parse_trace_file(universe_trace).user_names);
      }
      const InferredGraph g = resolve_graph(read_edges_file(graph_path), users, true);
      write_json_file(out_report, to_json(graph_stats(g)));
      manifest.outputs = {out_report};
    };
  });

  // feascheck
  auto* fc = app.add_subcommand("feascheck", "fraction of episodes a graph explains")->fallthrough();
  detail::TraceInput fc_trace;
  detail::add_trace_options(fc, fc_trace);
  fc->add_option("--graph", graph_path)->required();
  fc->add_option("--out", out_report)->required();
  fc->callback([&] {
    action = [&] {
      input(fc_trace.path);
      input(graph_path);
      const Trace trace = detail::load_trace(fc_trace);
      UserTable users(trace.user_names);
      const InferredGraph g = resolve_graph(read_edges_file(graph_path), users, true);
      write_json_file(out_report, to_json(check_feasibility(g, build_episodes(trace))));
      manifest.outputs = {out_report};
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion& e) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    detail::emit_error(err, "usage", e.what());
    return 2;
  }

  manifest.command = app.get_subcommands().front()->get_name();
  try {
    action();
    manifest.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_json_file(manifest.outputs.front() + ".manifest.json", to_json(manifest));
  } catch (const UsageError& e) {
    detail::emit_error(err, "usage", e.what());
    return 2;
  } catch (const FormatError& e) {
    detail::emit_error(err, "usage", e.what());
    return 2;
  } catch (const TraceError& e) {
    detail::emit_error(err, "usage", e.what());
    return 2;
  } catch (const std::exception& e) {
    detail::emit_error(err, "computation", e.what());
    return 1;
  }
  return 0;
}

}  // namespace cemnet::cli

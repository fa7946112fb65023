#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cemnet/cli.hpp"
#include "support.hpp"

using namespace cemnet;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("cemnet_test_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

struct CliResult {
  int code;
  std::string out, err;
};

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cemnet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST(Io, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(91);
  for (int k = 0; k < 1000; ++k) {
    const double v = std::uniform_real_distribution<double>(-1e6, 1e6)(rng);
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(1.0), "1");
}

TEST(Io, GraphRoundTrip) {
  std::mt19937_64 rng(92);
  const auto g = random_graph(rng, 10, 0.2);
  std::vector<std::string> names;
  for (int u = 0; u < 10; ++u) names.push_back("n" + std::to_string(u));
  std::ostringstream out;
  write_graph(out, g, names);
  std::istringstream in(out.str());
  UserTable users(names);
  const auto back = resolve_graph(read_edges(in), users, false);
  EXPECT_EQ(back.num_edges(), g.num_edges());
  for (const auto& e : g.edges()) EXPECT_TRUE(back.has_edge(e.src, e.dst));
}

TEST(Io, UnknownUserIsNamed) {
  std::istringstream in("src,dst\na,zed\n");
  UserTable users(std::vector<std::string>{"a", "b"});
  try {
    resolve_graph(read_edges(in), users, false);
    FAIL() << "expected an error";
  } catch (const std::out_of_range& e) {
    EXPECT_NE(std::string(e.what()).find("'zed'"), std::string::npos);
  }
}

TEST(Io, MalformedEdgeFiles) {
  std::istringstream bad_header("from,to\na,b\n");
  EXPECT_THROW(read_edges(bad_header), FormatError);
  std::istringstream bad_score("src,dst,q\na,b,high\n");
  EXPECT_THROW(read_edges(bad_score), FormatError);
  std::istringstream self_loop("src,dst\na,a\n");
  UserTable users;
  EXPECT_THROW(resolve_graph(read_edges(self_loop), users, true), FormatError);
}

TEST(Io, ScoresRoundTripPreservesAuc) {
  std::mt19937_64 rng(93);
  const auto truth = random_graph(rng, 8, 0.3);
  PairScores s;
  s.num_users = 8;
  s.labels = {0, 0, 0, 1, 1, 1, 2, 2};
  s.default_same = 0.4;
  s.default_cross = 0.05;
  const auto listed = random_graph(rng, 8, 0.3);
  for (const auto& e : listed.edges()) s.listed.push_back({e.src, e.dst, 0.9});
  std::vector<std::string> names;
  for (int u = 0; u < 8; ++u) names.push_back("n" + std::to_string(u));
  std::ostringstream out;
  write_scores(out, s, names);
  std::istringstream in(out.str());
  const auto back = read_scores(read_edges(in, "scores"), UserTable(names));
  EXPECT_NEAR(auc_score(back, truth), auc_score(s, truth), 1e-12);
}

TEST(Io, LabelsMustCoverEveryUser) {
  UserTable users(std::vector<std::string>{"a", "b"});
  std::istringstream ok("uid,community\na,5\nb,9\n");
  EXPECT_EQ(read_labels(ok, users), (GroupAssignment{0, 1}));
  std::istringstream missing("uid,community\na,5\n");
  EXPECT_THROW(read_labels(missing, users), std::out_of_range);
}

TEST(Io, SimConfigIsStrict) {
  EXPECT_EQ(sim_config_from_json(Json::object()).n_users, 100u);
  EXPECT_EQ(sim_config_from_json(Json{{"n_users", 50}, {"n_blocks", 5}}).n_users, 50u);
  EXPECT_THROW(sim_config_from_json(Json{{"n_user", 50}}), FormatError);
  EXPECT_THROW(sim_config_from_json(Json{{"p_intra", "high"}}), FormatError);
  EXPECT_THROW(sim_config_from_json(Json{{"p_intra", 2.0}}), FormatError);
  const SimConfig c = sim_config_from_json(to_json(SimConfig{}));
  EXPECT_EQ(to_json(c), to_json(SimConfig{}));
}

TEST(Cli, VersionAndHelp) {
  const auto v = run_cli({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find(cli::kVersion), std::string::npos);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(Cli, UsageErrorsExitTwo) {
  const auto bad = run_cli({"infer", "--bogus"});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("\"error\""), std::string::npos);
  EXPECT_EQ(run_cli({"infer", "--trace", "/nonexistent/trace.csv", "--out-graph", "g", "--out-state", "s"}).code, 2);
  EXPECT_EQ(run_cli({}).code, 2);
}

TEST(Cli, PipelineEndToEnd) {
  TempDir dir;
  spit(dir / "sim.json", R"({"n_users": 40, "n_blocks": 4, "n_events": 20000})");
  auto r = run_cli({"simulate", "--config", dir / "sim.json", "--seed", "3", "--out-trace", dir / "trace.csv",
                "--out-truth", dir / "truth.csv", "--out-labels", dir / "labels.csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "trace.csv.manifest.json"));

  r = run_cli({"infer", "--trace", dir / "trace.csv", "--prior", "sbm", "--lambda", "1", "--seed", "1", "--out-graph",
           dir / "g.csv", "--out-state", dir / "state.json", "--out-scores", dir / "scores.csv", "--out-labels",
           dir / "inferred_labels.csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json state = Json::parse(slurp(dir / "state.json"));
  EXPECT_EQ(state["prior"], "sbm");
  EXPECT_TRUE(state.contains("p"));

  const Json manifest = Json::parse(slurp(dir / "g.csv.manifest.json"));
  EXPECT_EQ(manifest["command"], "infer");
  EXPECT_EQ(manifest["seed"], 1);
  EXPECT_EQ(manifest["version"], cli::kVersion);
  EXPECT_EQ(manifest["inputs"][0]["sha256"].get<std::string>().size(), 64u);

  r = run_cli({"evaluate", "--trace", dir / "trace.csv", "--inferred", dir / "g.csv", "--truth", dir / "truth.csv",
           "--scores", dir / "scores.csv", "--out", dir / "report.json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json report = Json::parse(slurp(dir / "report.json"));
  EXPECT_EQ(report["feasibility"], 1.0);
  EXPECT_GE(report["auc"].get<double>(), 0.5);
  EXPECT_EQ(report["n_users"], 40);

  for (const char* method : {"star", "chain", "saito", "newman"}) {
    r = run_cli({"baseline", "--trace", dir / "trace.csv", "--method", method, "--out-graph", dir / "b.csv"});
    EXPECT_EQ(r.code, 0) << method << ": " << r.err;
  }
  r = run_cli({"feascheck", "--trace", dir / "trace.csv", "--graph", dir / "b.csv", "--out", dir / "feas.json"});
  EXPECT_EQ(r.code, 0) << r.err;
  r = run_cli({"stats", "--graph", dir / "truth.csv", "--out", dir / "stats.json"});
  EXPECT_EQ(r.code, 0) << r.err;
  const std::string truth = slurp(dir / "truth.csv");
  EXPECT_EQ(Json::parse(slurp(dir / "stats.json"))["n_edges"].get<std::size_t>() + 1,
            static_cast<std::size_t>(std::count(truth.begin(), truth.end(), '\n')));
}

TEST(Cli, RerunsAreByteIdentical) {
  TempDir dir;
  spit(dir / "sim.json", R"({"n_users": 30, "n_blocks": 3, "n_events": 8000})");
  ASSERT_EQ(run_cli({"simulate", "--config", dir / "sim.json", "--seed", "4", "--out-trace", dir / "t.csv", "--out-truth",
                 dir / "truth.csv", "--out-labels", dir / "l.csv"})
                .code,
            0);
  for (const char* tag : {"a", "b"}) {
    const std::string t = tag;
    ASSERT_EQ(run_cli({"infer", "--trace", dir / "t.csv", "--seed", "2", "--out-graph", dir / ("g" + t), "--out-state",
                   dir / ("s" + t), "--out-scores", dir / ("sc" + t)})
                  .code,
              0);
    ASSERT_EQ(run_cli({"evaluate", "--trace", dir / "t.csv", "--inferred", dir / ("g" + t), "--truth", dir / "truth.csv",
                   "--scores", dir / ("sc" + t), "--out", dir / ("r" + t)})
                  .code,
              0);
  }
  EXPECT_EQ(slurp(dir / "ga"), slurp(dir / "gb"));
  EXPECT_EQ(slurp(dir / "sa"), slurp(dir / "sb"));
  EXPECT_EQ(slurp(dir / "sca"), slurp(dir / "scb"));
  EXPECT_EQ(slurp(dir / "ra"), slurp(dir / "rb"));
}

TEST(Cli, UnknownUserInEvaluateExitsOne) {
  TempDir dir;
  spit(dir / "t.csv", kT1);
  spit(dir / "g.csv", "src,dst\nU1,U2\nU2,ghost\n");
  spit(dir / "truth.csv", "src,dst\nU1,U2\n");
  const auto r = run_cli({"evaluate", "--trace", dir / "t.csv", "--inferred", dir / "g.csv", "--truth", dir / "truth.csv",
                      "--out", dir / "r.json"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("ghost"), std::string::npos);
}

TEST(Cli, MalformedTraceExitsTwo) {
  TempDir dir;
  spit(dir / "t.csv", "pid,t,uid,rid\nP1,1,a,-1\nP2,2,b,P9\n");
  const auto r = run_cli({"infer", "--trace", dir / "t.csv", "--out-graph", dir / "g", "--out-state", dir / "s"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("P9"), std::string::npos);
  spit(dir / "t.csv", "pid,t,uid,rid\nP1,1,a,-1\nP2,2,b,P9\nP3,3,c,P1\n");
  EXPECT_EQ(run_cli({"infer", "--trace", dir / "t.csv", "--drop-orphans", "--out-graph", dir / "g", "--out-state",
                 dir / "s"})
                .code,
            0);
}

TEST(Cli, DumpLpWritesTheLastProgram) {
  TempDir dir;
  spit(dir / "t.csv", kT1);
  const auto r = run_cli({"infer", "--trace", dir / "t.csv", "--prior", "er", "--out-graph", dir / "g", "--out-state",
                      dir / "s", "--dump-lp", dir / "last.lp"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string lp = slurp(dir / "last.lp");
  EXPECT_NE(lp.find("s_U1_U2"), std::string::npos);
  EXPECT_NE(lp.find("Subject To"), std::string::npos);
}

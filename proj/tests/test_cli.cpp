#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;  // stdout and stderr interleaved
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(INTERSAD_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path temp_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("intersad_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Small enough for a sub-second run.
const std::string kTiny =
    " --set fleet.size=20 train.iterations=3 train.batch_size=4 train.eval_every=1 train.probe_size=20"
    " train.embedding_dim=4 train.hidden_dim=6 train.policy_hidden_dim=8 eval.test_size=40";

}  // namespace

TEST(Cli, MissingConfigNamesPath) {
  const auto r = cli("train --config /nonexistent/run.toml");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("/nonexistent/run.toml"), std::string::npos) << r.output;
}

TEST(Cli, BadConfigIsLineAnchored) {
  const auto dir = temp_dir("badcfg");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.toml") << "[train]\niterations = 5\nhorizon = many\n";
  const auto r = cli("train --config " + (dir / "bad.toml").string() + " --out " + dir.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("bad.toml:3:"), std::string::npos) << r.output;
  fs::remove_all(dir);
}

TEST(Cli, TrainWritesArtifacts) {
  const auto dir = temp_dir("train");
  const auto r = cli("train --out " + dir.string() + kTiny);
  ASSERT_EQ(r.code, 0) << r.output;
  for (const char* f : {"resolved_config.toml", "trace.csv", "policy.json", "embedder.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_EQ(slurp(dir / "trace.csv").rfind("iteration,L_f,L_mu,sen_total,", 0), 0u);
  EXPECT_NE(slurp(dir / "resolved_config.toml").find("iterations = 3"), std::string::npos);

  const auto e = cli("eval " + dir.string() + " --out " + dir.string());
  ASSERT_EQ(e.code, 0) << e.output;
  EXPECT_NE(e.output.find("auc="), std::string::npos) << e.output;
  EXPECT_TRUE(fs::exists(dir / "scores.csv"));
  fs::remove_all(dir);
}

TEST(Cli, SameSeedSameTrace) {
  const auto a = temp_dir("seed_a");
  const auto b = temp_dir("seed_b");
  const auto c = temp_dir("seed_c");
  ASSERT_EQ(cli("train --seed 4 --out " + a.string() + kTiny).code, 0);
  ASSERT_EQ(cli("train --seed 4 --out " + b.string() + kTiny).code, 0);
  ASSERT_EQ(cli("train --seed 5 --out " + c.string() + kTiny).code, 0);
  EXPECT_EQ(slurp(a / "trace.csv"), slurp(b / "trace.csv"));
  EXPECT_EQ(slurp(a / "policy.json"), slurp(b / "policy.json"));
  EXPECT_NE(slurp(a / "trace.csv"), slurp(c / "trace.csv"));
  for (const auto& d : {a, b, c}) fs::remove_all(d);
}

TEST(Cli, RewardEmbeddingRefusedUnlessNegativeControl) {
  const auto dir = temp_dir("reward");
  ASSERT_EQ(cli("train --set train.mode=\\\"reward\\\" --out " + dir.string() + kTiny).code, 0);
  const auto refused = cli("eval " + dir.string() + " --space embedding --out " + dir.string());
  EXPECT_EQ(refused.code, 2);
  EXPECT_NE(refused.output.find("reward anomalies"), std::string::npos) << refused.output;
  const auto control = cli("eval " + dir.string() + " --space embedding --negative-control --out " + dir.string());
  EXPECT_EQ(control.code, 0) << control.output;
  EXPECT_NE(control.output.find("auc="), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, UnknownFigureListsIds) {
  const auto r = cli("reproduce fig9 --out " + temp_dir("fig9").string());
  EXPECT_EQ(r.code, 2);
  for (const char* id : {"table3", "table5", "fig4a", "fig4bc", "fig5", "fig6a", "fig6b", "fig6c"}) {
    EXPECT_NE(r.output.find(id), std::string::npos) << id;
  }
}

TEST(Cli, SweepRejectsEmptyValues) {
  const auto r = cli("sweep --param T --out " + temp_dir("empty").string() + kTiny + " sweep.values=[]");
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_NE(r.output.find("at least one value"), std::string::npos) << r.output;
}

TEST(Cli, HorizonSweepHasOneRowPerValue) {
  const auto dir = temp_dir("sweep");
  const auto r = cli("sweep --param T --values 2,4,6,8,10 --out " + dir.string() + kTiny);
  ASSERT_EQ(r.code, 0) << r.output;
  std::istringstream csv(slurp(dir / "sweep.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "param,value,auc");
  int rows = 0;
  while (std::getline(csv, line)) {
    if (!line.empty()) ++rows;
  }
  EXPECT_EQ(rows, 5);
  fs::remove_all(dir);
}

TEST(Cli, UnknownOptionIsUsageError) {
  EXPECT_EQ(cli("train --no-such-flag").code, 2);
  EXPECT_EQ(cli("").code, 2);
}

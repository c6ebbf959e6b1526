// Runs the built jeanie binary end to end.
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "jeanie/config.hpp"
#include "jeanie/fsar.hpp"
#include "jeanie/io.hpp"

namespace fs = std::filesystem;
using namespace jeanie;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(JEANIE_CLI_PATH) + " " + args + " 2>/dev/null";
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
  Run r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe.get())) > 0) r.out.append(buf, n);
  const int raw = pclose(pipe.release());
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("jeanie_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    fsar::SyntheticConfig cfg;
    cfg.classes = 2;
    cfg.samples_per_class = 1;
    const auto corpus = fsar::make_synthetic_corpus(cfg);
    io::write_sequence(corpus[0].sequence, path("a.txt"));
    io::write_sequence(corpus[1].sequence, path("b.txt"));
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  static double value(const std::string& out) { return std::stod(out.substr(out.rfind(' ') + 1)); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run("--help").status, 0);
  EXPECT_EQ(run("align --no-such-flag " + path("a.txt") + " " + path("b.txt")).status, 2);
  EXPECT_EQ(run("align " + path("a.txt") + " " + path("missing.txt")).status, 3);
  io::write_file(path("bad.txt"), "{\"joints\": 10, \"hip_index\": 0}\n1,2\n");
  EXPECT_EQ(run("align " + path("a.txt") + " " + path("bad.txt")).status, 3);
  EXPECT_EQ(run("align --gamma -1 " + path("a.txt") + " " + path("b.txt")).status, 2);
}

TEST_F(CliTest, AlignSelfAndOrdering) {
  const auto self = run("align --method dtw --hard " + path("a.txt") + " " + path("a.txt"));
  ASSERT_EQ(self.status, 0);
  EXPECT_EQ(value(self.out), 0.0);
  const std::string pair = " --hard --grid 1x1 " + path("a.txt") + " " + path("b.txt");
  const double fvm = value(run("align --method fvm" + pair).out);
  const double jeanie = value(run("align --method jeanie" + pair).out);
  const double dtw = value(run("align --method dtw" + pair).out);
  EXPECT_LE(fvm, jeanie + 1e-6);
  EXPECT_LE(jeanie, dtw + 1e-6);
  const double single = value(run("align --method jeanie --grid 0x0 --hard " + path("a.txt") + " " + path("b.txt")).out);
  EXPECT_EQ(single, dtw);
}

TEST_F(CliTest, ExportPath) {
  const auto r = run("align --hard --export-path " + path("path.csv") + " " + path("a.txt") + " " + path("b.txt"));
  ASSERT_EQ(r.status, 0);
  EXPECT_FALSE(io::read_file(path("path.csv")).empty());
  EXPECT_EQ(run("align --export-path " + path("p2.csv") + " " + path("a.txt") + " " + path("b.txt")).status, 2);
}

TEST_F(CliTest, SimulateViews) {
  const auto r = run("simulate-views --grid 1x1 --mode camvpc " + path("a.txt") + " " + path("views"));
  ASSERT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("views 9"), std::string::npos);
  EXPECT_NE(r.out.find("max_epipolar_residual"), std::string::npos);
  EXPECT_EQ(io::read_file(path("views/view_1_1.csv")), io::read_file(path("a.txt")));
  EXPECT_EQ(io::parse_sequence(path("views/view_0_2.csv")).frames(), io::parse_sequence(path("a.txt")).frames());
}

TEST_F(CliTest, TrainEvaluateReproducible) {
  const std::string cfg = std::string(JEANIE_SOURCE_DIR) + "/configs/smoke.json";
  const std::string common = "train --config " + cfg + " --mode sup --seed 3 --metrics ";
  ASSERT_EQ(run(common + path("m1.jsonl") + " --out " + path("c1.bin")).status, 0);
  ASSERT_EQ(run(common + path("m2.jsonl") + " --out " + path("c2.bin")).status, 0);
  EXPECT_EQ(io::read_file(path("m1.jsonl")), io::read_file(path("m2.jsonl")));
  EXPECT_EQ(io::read_file(path("c1.bin")), io::read_file(path("c2.bin")));
  const std::string metrics = io::read_file(path("m1.jsonl"));
  const auto first = nlohmann::json::parse(metrics.substr(0, metrics.find('\n')));
  EXPECT_EQ(first.at("iter").get<int>(), 1);
  EXPECT_TRUE(first.contains("loss"));

  const auto ev = run("evaluate " + path("c1.bin") + " --episodes 20 --seeds 1");
  ASSERT_EQ(ev.status, 0);
  const auto j = nlohmann::json::parse(ev.out);
  EXPECT_EQ(j.at("classifier"), "sup");
  EXPECT_GE(j.at("accuracy").get<double>(), 0.0);
  EXPECT_LE(j.at("accuracy").get<double>(), 1.0);
  const auto one_way = nlohmann::json::parse(run("evaluate " + path("c1.bin") + " --n-way 1 --episodes 5").out);
  EXPECT_EQ(one_way.at("accuracy").get<double>(), 1.0);

  io::write_file(path("other.json"), R"({"seed": 3, "supervised": {"iterations": 21}})");
  EXPECT_EQ(run("evaluate " + path("c1.bin") + " --config " + path("other.json")).status, 3);
}

TEST_F(CliTest, ConfigPrintsDefaults) {
  const auto r = run("config");
  ASSERT_EQ(r.status, 0);
  EXPECT_EQ(io::to_json_text(io::parse_run_config(r.out)), io::to_json_text(io::RunConfig{}));
}

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "temp_dir.hpp"

#ifndef MMSSL_CLI_PATH
#error "MMSSL_CLI_PATH must name the command-line tool"
#endif

namespace {

using mmssl::testing::TempDir;

const char* kSmall =
    " --n_classes 2 --patients_per_class 6 --image_size 8 --encoder_dims 64,16,8"
    " --batch_patients 5 --epochs 2 --folds 3 --knn_k 3";

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct CliRun {
  int status = -1;
  std::string out;
  std::string err;
};

CliRun run(const TempDir& dir, const std::string& args) {
  static int counter = 0;
  const std::string base = dir.file("run" + std::to_string(counter++));
  const std::string cmd =
      std::string("\"") + MMSSL_CLI_PATH + "\" " + args + " > \"" + base + ".out\" 2> \"" + base + ".err\"";
  const int raw = std::system(cmd.c_str());
  CliRun r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(base + ".out");
  r.err = slurp(base + ".err");
  return r;
}

std::string resolved_config(const std::string& err) {
  const std::string marker = "# resolved config\n";
  const auto start = err.find(marker);
  if (start == std::string::npos) return "";
  return err.substr(start + marker.size());
}

TEST(Cli, UsageErrors) {
  TempDir dir;
  EXPECT_EQ(run(dir, "").status, 1);
  EXPECT_EQ(run(dir, "no-such-command").status, 1);
  EXPECT_EQ(run(dir, "train stray-positional --seed 1").status, 1);
  const CliRun v = run(dir, "--version");
  EXPECT_EQ(v.status, 0);
  EXPECT_FALSE(v.out.empty());
}

TEST(Cli, ConfigErrorsExitTwo) {
  TempDir dir;
  const std::string out = " --out \"" + dir.file("m") + "\"";
  const CliRun no_seed = run(dir, std::string("train") + kSmall + out);
  EXPECT_EQ(no_seed.status, 2);
  EXPECT_NE(no_seed.err.find("seed"), std::string::npos);
  EXPECT_EQ(run(dir, std::string("cross-validate") + kSmall).status, 2);
  EXPECT_EQ(run(dir, std::string("train --seed 1 --tau -1") + kSmall + out).status, 2);
  EXPECT_EQ(run(dir, std::string("train --seed 1 --bogus_key 3") + kSmall + out).status, 2);
  EXPECT_EQ(run(dir, "generate").status, 2);
  std::ofstream(dir.file("bad.conf")) << "tau = 0.1\nnot a pair\n";
  const CliRun bad_file = run(dir, "generate -c \"" + dir.file("bad.conf") + "\"" + out);
  EXPECT_EQ(bad_file.status, 2);
  EXPECT_NE(bad_file.err.find("bad.conf:2"), std::string::npos) << bad_file.err;
}

TEST(Cli, IoErrorsExitThree) {
  TempDir dir;
  EXPECT_EQ(run(dir, "generate --out /nonexistent-dir/x/d.txt").status, 3);
  EXPECT_EQ(run(dir, "generate -c \"" + dir.file("missing.conf") + "\" --out x").status, 3);
  EXPECT_EQ(run(dir, "eval-knn --model \"" + dir.file("missing.bin") + "\"" + kSmall).status, 3);
  std::ofstream(dir.file("a.txt")) << "1 2 3\n";
  EXPECT_EQ(run(dir, "ttest \"" + dir.file("a.txt") + "\" \"" + dir.file("none.txt") + "\"").status, 3);
}

TEST(Cli, NumericalAndDataErrors) {
  TempDir dir;
  std::ofstream(dir.file("a.txt")) << "1 1 1\n";
  std::ofstream(dir.file("b.txt")) << "2 2 2\n";
  std::ofstream(dir.file("one.txt")) << "2\n";
  EXPECT_EQ(run(dir, "ttest \"" + dir.file("a.txt") + "\" \"" + dir.file("b.txt") + "\"").status, 4);
  EXPECT_EQ(run(dir, "ttest \"" + dir.file("a.txt") + "\" \"" + dir.file("one.txt") + "\"").status, 5);
}

TEST(Cli, TTestReport) {
  TempDir dir;
  std::ofstream(dir.file("a.txt")) << "2 4\n";
  std::ofstream(dir.file("b.txt")) << "1, 3\n";
  const CliRun r = run(dir, "ttest \"" + dir.file("a.txt") + "\" \"" + dir.file("b.txt") + "\"");
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("t = 0.7071067811865"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("df = 2\n"), std::string::npos);
}

TEST(Cli, ConfigFileAndOverrides) {
  TempDir dir;
  std::ofstream(dir.file("run.conf")) << "epochs = 5\ntau = 0.2\n";
  const CliRun r = run(dir, "generate -c \"" + dir.file("run.conf") + "\"" + kSmall +
                                " --epochs 3 --knn-k=7 --out \"" + dir.file("d.txt") + "\"");
  ASSERT_EQ(r.status, 0) << r.err;
  const std::string cfg = resolved_config(r.err);
  EXPECT_NE(cfg.find("epochs = 3\n"), std::string::npos);
  EXPECT_NE(cfg.find("tau = 0.2\n"), std::string::npos);
  EXPECT_NE(cfg.find("knn_k = 7\n"), std::string::npos);
  EXPECT_NE(r.out.find("samples = 12"), std::string::npos);
}

TEST(Cli, EchoedConfigReproducesTraining) {
  TempDir dir;
  const CliRun first = run(dir, std::string("train --seed 5") + kSmall + " --out \"" + dir.file("a") + "\"");
  ASSERT_EQ(first.status, 0) << first.err;
  const std::string cfg = resolved_config(first.err);
  ASSERT_FALSE(cfg.empty());
  std::ofstream(dir.file("echo.conf")) << cfg;
  const CliRun second = run(dir, "train -c \"" + dir.file("echo.conf") + "\"");
  ASSERT_EQ(second.status, 0) << second.err;
  EXPECT_EQ(first.out, second.out);

  const CliRun third = run(dir, "train -c \"" + dir.file("echo.conf") + "\" --out \"" + dir.file("b") + "\"");
  ASSERT_EQ(third.status, 0) << third.err;
  EXPECT_EQ(slurp(dir.file("a/params.bin")), slurp(dir.file("b/params.bin")));
  EXPECT_EQ(slurp(dir.file("a/loss.csv")), slurp(dir.file("b/loss.csv")));
}

TEST(Cli, CrossValidateIsDeterministic) {
  TempDir dir;
  const CliRun a = run(dir, std::string("cross-validate --seed 2") + kSmall);
  const CliRun b = run(dir, std::string("cross-validate --seed 2") + kSmall);
  ASSERT_EQ(a.status, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out.find("mean.accuracy = "), std::string::npos);
}

TEST(Cli, EvaluateAndExport) {
  TempDir dir;
  const std::string model = " --model \"" + dir.file("m/params.bin") + "\"";
  ASSERT_EQ(run(dir, std::string("train --seed 1") + kSmall + " --out \"" + dir.file("m") + "\"").status, 0);
  const CliRun knn = run(dir, std::string("eval-knn") + kSmall + model);
  ASSERT_EQ(knn.status, 0) << knn.err;
  EXPECT_NE(knn.out.find("accuracy = "), std::string::npos);
  const CliRun probe = run(dir, std::string("eval-probe --probe_epochs 10") + kSmall + model);
  ASSERT_EQ(probe.status, 0) << probe.err;
  EXPECT_NE(probe.out.find("f1 = "), std::string::npos);

  const CliRun to_stdout = run(dir, std::string("export-embeddings") + kSmall + model);
  ASSERT_EQ(to_stdout.status, 0) << to_stdout.err;
  EXPECT_EQ(to_stdout.out.rfind("patient_id,label,e0,", 0), 0u);
  const std::string csv = dir.file("e.csv");
  ASSERT_EQ(run(dir, std::string("export-embeddings") + kSmall + model + " --out \"" + csv + "\"").status, 0);
  EXPECT_EQ(slurp(csv), to_stdout.out);
}

}  // namespace

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kCli = MAXRISK_CLI_PATH;
const fs::path kFixtures = MAXRISK_FIXTURE_DIR;
const fs::path kConfigs = MAXRISK_CONFIG_DIR;

int run(const std::string& args, const fs::path& out = {}) {
  std::string cmd;
  if (!out.empty()) cmd += "MAXRISK_OUT='" + out.string() + "' ";
  cmd += "'" + kCli + "' " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fresh_dir(const std::string& tag) {
  auto d = fs::temp_directory_path() / ("maxrisk_cli_" + tag);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST(Cli, ListAndValidate) {
  EXPECT_EQ(run("list"), 0);
  EXPECT_EQ(run("list --json"), 0);
  EXPECT_EQ(run("validate legendre-gaussian"), 0);
  EXPECT_EQ(run("validate '" + (kConfigs / "avar-limit.json").string() + "'"), 0);
}

TEST(Cli, MatchingVerdictExitsZeroAndHonoursOutDir) {
  auto out = fresh_dir("pass");
  EXPECT_EQ(run("run legendre-gaussian -q", out), 0);
  EXPECT_TRUE(fs::exists(out / "legendre-gaussian.summary.json"));
  EXPECT_TRUE(fs::exists(out / "legendre-gaussian.conjugate.csv"));
}

TEST(Cli, ExpectedFailureExitsZero) {
  EXPECT_EQ(run("run riskrep-expectation -q", fresh_dir("expected_fail")), 0);
}

TEST(Cli, VerdictMismatchExitsTwo) {
  EXPECT_EQ(run("run '" + (kFixtures / "bernoulli-expect-pass.json").string() + "' -q", fresh_dir("mismatch")), 2);
}

TEST(Cli, ConfigAndNumericalErrorsExitOne) {
  auto out = fresh_dir("errors");
  EXPECT_EQ(run("run '" + (kFixtures / "unknown-key.json").string() + "'", out), 1);
  EXPECT_EQ(run("validate '" + (kFixtures / "unknown-key.json").string() + "'"), 1);
  EXPECT_EQ(run("run '" + (kFixtures / "nonlattice-premium.json").string() + "'", out), 1);
  EXPECT_EQ(run("run no-such-entry", out), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run(""), 1);
}

#include <sys/wait.h>

#include <cstdlib>

#include <gtest/gtest.h>

#include "forge/process.hpp"
#include "support.hpp"

namespace {

/// Exit status of `forge <args>` with output discarded.
int forge_cli(const std::string& args) {
  const std::string cmd = forge::process::shell_quote(FORGE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return forge::process::shell_quote(p.string()); }

std::string config_flag(const std::string& toml = "conv2d/forge.toml") {
  return "--config " + q(forge::test::fixture(toml));
}

}  // namespace

TEST(Cli, RunAndResume) {
  forge::test::TempDir out;
  EXPECT_EQ(forge_cli(config_flag() + " run --out " + q(out.path())), 0);
  EXPECT_TRUE(fs::exists(out / "model/Conv2D.cpp"));
  EXPECT_EQ(forge_cli("resume " + q(out.path())), 0);
}

TEST(Cli, StageByStage) {
  forge::test::TempDir out;
  const auto o = " --out " + q(out.path());
  EXPECT_EQ(forge_cli(config_flag() + " standardize" + o), 0);
  EXPECT_TRUE(fs::exists(out / "ir/design.json"));
  EXPECT_EQ(forge_cli(config_flag() + " plan" + o), 0);
  EXPECT_EQ(forge_cli(config_flag() + " generate" + o), 0);
  EXPECT_EQ(forge_cli(config_flag() + " verify" + o), 0);
  const auto summary = nlohmann::json::parse(forge::test::read_file(out / "reports/validation.json"));
  EXPECT_EQ(summary["status"], "passed");
}

TEST(Cli, PlanFromIrFile) {
  forge::test::TempDir out;
  const auto plan = out / "p/plan.json";
  ASSERT_EQ(forge_cli("plan --ir " + q(forge::test::fixture("conv2d/design.json")) + " --out " + q(plan)), 0);
  const auto j = nlohmann::json::parse(forge::test::read_file(plan));
  EXPECT_EQ(j["tasks"], nlohmann::json::parse(R"(["Adder", "Multi", "Conv2D"])"));
  forge::test::write_file(out / "bad.json", "{\"design_name\": ");
  EXPECT_EQ(forge_cli("plan --ir " + q(out / "bad.json") + " --out " + q(plan)), 7);
}

TEST(Cli, ExitCodes) {
  forge::test::TempDir out;
  EXPECT_EQ(forge_cli(config_flag("conv2d/forge_abort.toml") + " run --out " + q(out / "abort")), 5);
  EXPECT_EQ(forge_cli(config_flag() + " run --spec " + q(out / "missing.md") + " --out " + q(out / "m")), 6);
  EXPECT_EQ(forge_cli("--config " + q(out / "none.toml") + " run --out " + q(out / "n")), 6);
  EXPECT_EQ(forge_cli(config_flag() + " --temperature 3 run --out " + q(out / "t")), 6);
  EXPECT_EQ(forge_cli("frobnicate"), 6);
  EXPECT_EQ(forge_cli("--help"), 0);
}

TEST(Cli, GlobalFlagsOverrideConfig) {
  forge::test::TempDir out;
  ASSERT_EQ(forge_cli(config_flag() + " --max-debug-iters 2 --temperature 0.7 standardize --out " + q(out.path())), 0);
  const auto cfg = nlohmann::json::parse(forge::test::read_file(out / "run_config.json"));
  EXPECT_EQ(cfg["max_debug_iters"], 2);
  EXPECT_EQ(cfg["temperature"], 0.7);
  EXPECT_EQ(forge_cli(config_flag() + " --mock-script " + q(out / "none.json") + " run --out " + q(out / "x")), 6);
}

TEST(Cli, ResumeAfterCorruption) {
  forge::test::TempDir out;
  ASSERT_EQ(forge_cli(config_flag() + " run --out " + q(out.path())), 0);
  forge::test::write_file(out / "plan.json", "{\"tasks\": [");
  EXPECT_EQ(forge_cli("resume " + q(out.path())), 7);
}

TEST(Cli, Eval) {
  forge::test::TempDir bench;
  const auto c = bench / "cases/conv2d";
  fs::create_directories(c);
  fs::copy_file(forge::test::fixture("conv2d/spec.md"), c / "spec.md");
  fs::copy(forge::test::fixture("conv2d/testbench"), c / "testbench", fs::copy_options::recursive);
  forge::test::write_file(c / "meta.json", R"({"code_lines": 120, "submodule_count": 3})");
  const auto results = bench / "out/results.json";
  ASSERT_EQ(forge_cli(config_flag() + " eval --bench " + q(bench / "cases") + " --trials 2 --k 1,2 --out " + q(results) +
                      " --csv " + q(bench / "out/records.csv")),
            0);
  const auto j = nlohmann::json::parse(forge::test::read_file(results));
  EXPECT_EQ(j["records"].size(), 2u);
  EXPECT_EQ(j["summary"]["fp"], 1.0);
  EXPECT_EQ(j["summary"]["average_pass_at_k"]["pass@2"], 1.0);
  EXPECT_TRUE(fs::exists(bench / "out/records.csv"));
  EXPECT_EQ(forge_cli(config_flag() + " eval --bench " + q(bench / "nothing") + " --out " + q(results)), 6);
}

#include <random>

#include <gtest/gtest.h>

#include "forge/error.hpp"
#include "forge/verification.hpp"
#include "support.hpp"

using namespace forge;
using namespace forge::verification;
using generator::SourceUnit;
using generator::UnitKind;
using Step = StubToolchain::Step;

namespace {

ReferenceModel simple_model(const std::string& name, const std::string& body = "// body\n") {
  ReferenceModel m;
  m.module_name = name;
  m.units = {SourceUnit{name + ".h", "#pragma once\n", UnitKind::Header},
             SourceUnit{name + ".cpp", "#include \"" + name + ".h\"\n" + body, UnitKind::Implementation}};
  return m;
}

ToolchainConfig stub_cfg(const forge::test::TempDir& dir) {
  ToolchainConfig cfg;
  cfg.kind = ToolchainKind::Stub;
  cfg.workdir = dir.path();
  return cfg;
}

ToolchainConfig shell_cfg(const forge::test::TempDir& dir) {
  ToolchainConfig cfg;
  cfg.kind = ToolchainKind::Command;
  cfg.workdir = dir.path();
  cfg.compile_cmd_template = "printf '%s\\n' {sources} {include_dirs} > {out_bin}";
  cfg.run_cmd_template = "cat {bin}; echo 'No mismatches found'";
  cfg.timeout_s = 10;
  return cfg;
}

planning::TaskSequence plan_of(std::vector<std::string> tasks) {
  planning::TaskSequence p;
  p.tasks = std::move(tasks);
  for (const auto& t : p.tasks) p.provenance[t] = {t};
  return p;
}

std::map<std::string, ReferenceModel> models_of(const std::vector<std::string>& names) {
  std::map<std::string, ReferenceModel> out;
  for (const auto& n : names) out[n] = simple_model(n);
  return out;
}

class NoFix final : public DebugHandle {
public:
  RepairResult repair(const ReferenceModel& model, const std::vector<ReferenceModel>&,
                      const std::vector<ValidationReport>& failed, Toolchain&) override {
    ++calls;
    return RepairResult{false, model, failed, 6};
  }
  int calls = 0;
};

}  // namespace

TEST(ParseSimLog, GrammarHandParse) {
  const auto r = parse_sim_log("MISMATCH time=500ns in=a=3,b=4 dut=6 ref=7\n");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0], (MismatchRecord{500, "a=3,b=4", "6", "7"}));
  EXPECT_TRUE(parse_sim_log("time=10ns ok\nNo mismatches found\n").empty());
  const auto same = parse_sim_log_detailed("MISMATCH time=1ns in= dut=5 ref=5\nMISMATCH garbage\n");
  EXPECT_TRUE(same.records.empty());
  EXPECT_EQ(same.skipped, 2u);
}

TEST(ParseSimLog, EmptyInputsAllowed) {
  const auto r = parse_sim_log("  MISMATCH time=0ns in= dut=x ref=y");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].time_ns, 0);
  EXPECT_EQ(r[0].inputs, "");
}

TEST(ParseSimLog, CustomPattern) {
  const auto r = parse_sim_log("MISMATCH @42 [x=1] got 3 want 4\n", R"(MISMATCH @(\d+) \[(.*)\] got (\S+) want (\S+))");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0], (MismatchRecord{42, "x=1", "3", "4"}));
}

TEST(Verdict, Lines) {
  EXPECT_TRUE(scan_verdict("No mismatches found\n").passed());
  EXPECT_FALSE(scan_verdict("No mismatches found\nHas mismatches: 2\n").passed());
  EXPECT_FALSE(scan_verdict("").passed());
}

TEST(TailTruncate, KeepsTail) {
  const std::string log(40000, 'x');
  EXPECT_EQ(tail_truncate(log).size(), kLogExcerptLimit);
  EXPECT_EQ(tail_truncate("abcdef", 3), "def");
  EXPECT_EQ(tail_truncate("abc", 3), "abc");
}

TEST(ToolchainConfig, Validation) {
  forge::test::TempDir dir;
  auto cfg = shell_cfg(dir);
  EXPECT_NO_THROW(cfg.validate());
  cfg.compile_cmd_template = "cc {sources} -o {out_bin}";
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = shell_cfg(dir);
  cfg.run_cmd_template = "run";
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = shell_cfg(dir);
  cfg.timeout_s = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = shell_cfg(dir);
  cfg.mismatch_regex = "(\\d+)";
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(CompileModel, StubOutcomes) {
  forge::test::TempDir dir;
  auto tc = StubToolchain::from_steps({{"Adder", {{1, "Adder.cpp:3: error: stray '@'\n", false}, {0, "", false}}}}, {},
                                      stub_cfg(dir));
  const auto bad = compile_model(simple_model("Adder"), {}, *tc);
  EXPECT_FALSE(bad.passed);
  EXPECT_EQ(bad.stage, Stage::Syntax);
  EXPECT_NE(bad.log_excerpt.find("stray '@'"), std::string::npos);
  EXPECT_TRUE(bad.mismatches.empty());
  EXPECT_TRUE(compile_model(simple_model("Adder"), {}, *tc).passed);
  EXPECT_TRUE(fs::exists(dir / "src/Adder/Adder.cpp"));
}

TEST(CompileModel, TimeoutIsAFailedReport) {
  forge::test::TempDir dir;
  auto tc = StubToolchain::from_steps({{"*", {{0, "", true}}}}, {}, stub_cfg(dir));
  const auto r = compile_model(simple_model("Adder"), {}, *tc);
  EXPECT_FALSE(r.passed);
  EXPECT_NE(r.note.find("timed out"), std::string::npos);
}

TEST(CommandToolchain, CompileAndRunThroughShell) {
  forge::test::TempDir dir;
  CommandToolchain tc(shell_cfg(dir));
  const auto syntax = compile_model(simple_model("Multi"), {simple_model("Adder")}, tc);
  ASSERT_TRUE(syntax.passed) << syntax.log_excerpt;
  const auto bin = binary_path(tc.config(), "Multi");
  const auto listed = forge::test::read_file(bin);
  EXPECT_NE(listed.find("Adder.cpp"), std::string::npos);
  EXPECT_NE(listed.find("-I"), std::string::npos);
  const auto run = run_testbench("Multi", bin, tc);
  EXPECT_TRUE(run.passed) << run.log_excerpt;
}

TEST(CommandToolchain, HungToolReportsTimeout) {
  forge::test::TempDir dir;
  auto cfg = shell_cfg(dir);
  cfg.compile_cmd_template = "sleep 5 # {sources} {out_bin} {include_dirs}";
  cfg.timeout_s = 0.3;
  CommandToolchain tc(cfg);
  const auto start = std::chrono::steady_clock::now();
  const auto r = compile_model(simple_model("Adder"), {}, tc);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 4.0);
  EXPECT_FALSE(r.passed);
  EXPECT_NE(r.note.find("timed out"), std::string::npos);
}

TEST(CommandToolchain, MissingToolThrows) {
  forge::test::TempDir dir;
  auto cfg = shell_cfg(dir);
  cfg.compile_cmd_template = "forge_no_such_compiler_xyz {sources} -o {out_bin} {include_dirs}";
  CommandToolchain tc(cfg);
  EXPECT_THROW(compile_model(simple_model("Adder"), {}, tc), ToolchainNotFoundError);
}

TEST(RunTestbench, Verdicts) {
  forge::test::TempDir dir;
  auto tc = StubToolchain::from_steps(
      {}, {{"P", {{0, "No mismatches found\n", false}}},
           {"F", {{1, "MISMATCH time=10ns in=a=1 dut=1 ref=2\nMISMATCH time=20ns in=a=2 dut=3 ref=4\nHas mismatches\n", false}}},
           {"E", {{0, "", false}}}},
      stub_cfg(dir));
  EXPECT_TRUE(run_testbench("P", "", *tc).passed);
  const auto f = run_testbench("F", "", *tc);
  EXPECT_FALSE(f.passed);
  EXPECT_EQ(f.stage, Stage::Functional);
  EXPECT_EQ(f.mismatches.size(), 2u);
  const auto e = run_testbench("E", "", *tc);
  EXPECT_FALSE(e.passed);
  EXPECT_EQ(e.note, "no verdict line");
}

TEST(RunTestbench, FuzzedLogsNeverFalsePass) {
  forge::test::TempDir dir;
  std::mt19937 rng(4242);
  const std::vector<std::string> pool{"No mismatches found",   "Has mismatches",    "no mismatches",
                                      "MISMATCH time=5ns in=a=1 dut=1 ref=0", "MISMATCH broken", "time=7ns x=1",
                                      "Mismatches: none",      "",                  "# No  mismatches"};
  for (int i = 0; i < 300; ++i) {
    std::string log;
    const int lines = std::uniform_int_distribution<int>(0, 6)(rng);
    for (int l = 0; l < lines; ++l) log += pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)] + "\n";
    auto tc = StubToolchain::from_steps({}, {{"M", {{0, log, false}}}}, stub_cfg(dir));
    const bool pass_line = log.find("No mismatches") != std::string::npos;
    const bool fail_line = log.find("Has mismatches") != std::string::npos;
    if (run_testbench("M", "", *tc).passed) {
      EXPECT_TRUE(pass_line && !fail_line) << log;
    }
  }
}

TEST(Reports, JsonRoundTrip) {
  ValidationReport r{"Multi", Stage::Functional, false, "log", {{500, "a=3", "14", "15"}}, 0.25, "1 mismatch record(s)"};
  const auto back = report_from_json(nlohmann::json::parse(r.to_json().dump()));
  EXPECT_EQ(back.module_name, r.module_name);
  EXPECT_EQ(back.mismatches, r.mismatches);
  EXPECT_EQ(back.note, r.note);
  EXPECT_THROW(report_from_json(nlohmann::json::parse(R"({"module_name": "x"})")), SchemaError);
}

TEST(StubToolchain, ScriptFileAndDefaults) {
  forge::test::TempDir dir;
  auto cfg = stub_cfg(dir);
  cfg.stub_script = forge::test::fixture("conv2d/stub_toolchain_abort.json").string();
  auto tc = make_toolchain(cfg);
  EXPECT_EQ(tc->run("Multi", "").exit_code, 1);
  EXPECT_EQ(tc->run("Adder", "").exit_code, 0);
  EXPECT_EQ(tc->compile("Adder", {}, {}, "").exit_code, 0);
  cfg.stub_script = (dir / "missing.json").string();
  EXPECT_THROW(make_toolchain(cfg), ConfigError);
}

TEST(IncrementalValidate, AllPassInPlanOrder) {
  forge::test::TempDir dir;
  auto tc = StubToolchain::from_steps({}, {}, stub_cfg(dir));
  const auto plan = plan_of({"Adder", "Multi", "Conv2D"});
  const auto result = incremental_validate(plan, models_of(plan.tasks), *tc, nullptr);
  ASSERT_EQ(result.reports.size(), 3u);
  for (const auto& [name, reports] : result.reports) {
    ASSERT_EQ(reports.size(), 2u) << name;
    EXPECT_TRUE(reports[0].passed && reports[1].passed);
  }

  const auto inv = tc->invocations();
  ASSERT_EQ(inv.size(), 6u);
  const std::vector<std::string> order{"Adder", "Adder", "Multi", "Multi", "Conv2D", "Conv2D"};
  for (std::size_t i = 0; i < inv.size(); ++i) {
    EXPECT_EQ(inv[i].module, order[i]);
    EXPECT_EQ(inv[i].stage, i % 2 == 0 ? Stage::Syntax : Stage::Functional);
  }
  // Later compiles carry every earlier validated model.
  EXPECT_EQ(inv[4].sources, (std::vector<std::string>{"Adder.cpp", "Multi.cpp", "Conv2D.cpp"}));
}

TEST(IncrementalValidate, AbortAtFirstUnfixableModule) {
  forge::test::TempDir dir;
  auto tc = StubToolchain::from_steps({}, {{"Multi", {{1, "MISMATCH time=500ns in=a=3 dut=14 ref=15\nHas mismatches\n", false}}}},
                                      stub_cfg(dir));
  const auto plan = plan_of({"Adder", "Multi", "Conv2D"});
  NoFix debugger;
  std::vector<std::string> seen;
  IncrementalOptions opts;
  opts.on_report = [&](const ValidationReport& r) { seen.push_back(r.module_name); };
  try {
    incremental_validate(plan, models_of(plan.tasks), *tc, &debugger, opts);
    FAIL() << "expected ValidationAbortError";
  } catch (const ValidationAbortError& e) {
    EXPECT_EQ(e.module(), "Multi");
  }
  EXPECT_EQ(debugger.calls, 1);
  for (const auto& inv : tc->invocations()) EXPECT_NE(inv.module, "Conv2D");
  EXPECT_EQ(seen, (std::vector<std::string>{"Adder", "Adder", "Multi", "Multi"}));
}

TEST(IncrementalValidate, SingleModule) {
  forge::test::TempDir dir;
  auto tc = StubToolchain::from_steps({}, {}, stub_cfg(dir));
  const auto result = incremental_validate(plan_of({"Solo"}), models_of({"Solo"}), *tc, nullptr);
  EXPECT_EQ(result.reports.at("Solo").size(), 2u);
}

TEST(IncrementalValidate, MissingModelRejected) {
  forge::test::TempDir dir;
  auto tc = StubToolchain::from_steps({}, {}, stub_cfg(dir));
  EXPECT_THROW(incremental_validate(plan_of({"A", "B"}), models_of({"A"}), *tc, nullptr), Error);
}

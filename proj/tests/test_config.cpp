#include <gtest/gtest.h>

#include "forge/config.hpp"
#include "forge/error.hpp"
#include "support.hpp"

using namespace forge;
using namespace forge::config;

TEST(ParseToml, ValuesAndSections) {
  const auto doc = parse_toml(R"(# top comment
spec = "a/spec.md"   # trailing
count = 1_000
ratio = 0.25
on = true

[toolchain]
mismatch_regex = 'MISMATCH time=(\d+)ns'
names = ["x", 'y']
escaped = "tab\there \"q\""
)");
  EXPECT_EQ(std::get<std::string>(doc.at("").at("spec")), "a/spec.md");
  EXPECT_EQ(std::get<std::int64_t>(doc.at("").at("count")), 1000);
  EXPECT_EQ(std::get<double>(doc.at("").at("ratio")), 0.25);
  EXPECT_TRUE(std::get<bool>(doc.at("").at("on")));
  EXPECT_EQ(std::get<std::string>(doc.at("toolchain").at("mismatch_regex")), R"(MISMATCH time=(\d+)ns)");
  EXPECT_EQ(std::get<std::vector<std::string>>(doc.at("toolchain").at("names")), (std::vector<std::string>{"x", "y"}));
  EXPECT_EQ(std::get<std::string>(doc.at("toolchain").at("escaped")), "tab\there \"q\"");
}

TEST(ParseToml, ErrorsCarryLineNumbers) {
  auto line_of = [](const std::string& text) {
    try {
      parse_toml(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(line_of("a = 1\nb = \"open\n").find("line 2"), std::string::npos);
  EXPECT_NE(line_of("[x]\n[x]\n").find("line 2"), std::string::npos);
  EXPECT_NE(line_of("a = 1\na = 2\n").find("duplicate"), std::string::npos);
  EXPECT_NE(line_of("novalue\n").find("line 1"), std::string::npos);
  EXPECT_NE(line_of("a = 1 2\n").find("trailing"), std::string::npos);
  EXPECT_NE(line_of("a = [1]\n").find("strings"), std::string::npos);
  EXPECT_NE(line_of("a = nope\n").find("cannot parse"), std::string::npos);
}

TEST(RunConfig, Defaults) {
  const RunConfig cfg;
  EXPECT_EQ(cfg.temperature, 0.3);
  EXPECT_EQ(cfg.max_debug_iters, 6);
  EXPECT_EQ(cfg.backend_handle().temperature, 0.3);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(RunConfig, Validation) {
  RunConfig cfg;
  cfg.temperature = 2.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.max_debug_iters = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.amg_max_attempts = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(ApplyToml, ResolvesRelativePaths) {
  RunConfig cfg;
  apply_toml(cfg, parse_toml("spec = \"s.md\"\n[backend]\nkind = \"mock\"\nscript = \"/abs/m.json\"\n[debugger]\nkb_path = \"kb.json\"\n"),
             "/base");
  EXPECT_EQ(cfg.spec_path, fs::path("/base/s.md"));
  EXPECT_EQ(cfg.backend.script_path, "/abs/m.json");
  EXPECT_EQ(cfg.kb_path, fs::path("/base/kb.json"));
}

TEST(ApplyToml, RejectsUnknownAndMistyped) {
  RunConfig cfg;
  EXPECT_THROW(apply_toml(cfg, parse_toml("[nope]\na = 1\n"), ""), ConfigError);
  EXPECT_THROW(apply_toml(cfg, parse_toml("[backend]\ncolour = 1\n"), ""), ConfigError);
  EXPECT_THROW(apply_toml(cfg, parse_toml("[backend]\nkind = \"grpc\"\n"), ""), ConfigError);
  EXPECT_THROW(apply_toml(cfg, parse_toml("[limits]\nmax_regen = \"three\"\n"), ""), ConfigError);
  EXPECT_THROW(apply_toml(cfg, parse_toml("[limits]\neval_workers = 0\n"), ""), ConfigError);
}

TEST(ApplyToml, IntegerAcceptedAsNumber) {
  RunConfig cfg;
  apply_toml(cfg, parse_toml("[backend]\ntemperature = 1\n[toolchain]\ntimeout_s = 5\n"), "");
  EXPECT_EQ(cfg.temperature, 1.0);
  EXPECT_EQ(cfg.toolchain.timeout_s, 5.0);
}

TEST(LoadRunConfig, FixtureFile) {
  const auto cfg = load_run_config(forge::test::fixture("conv2d/forge.toml"));
  EXPECT_EQ(cfg.spec_path, forge::test::fixture("conv2d/spec.md"));
  EXPECT_EQ(cfg.backend.kind, llm::BackendKind::Mock);
  EXPECT_EQ(cfg.toolchain.kind, verification::ToolchainKind::Stub);
  EXPECT_EQ(cfg.temperature, 0.3);
  EXPECT_EQ(cfg.max_debug_iters, 6);
  EXPECT_THROW(load_run_config("/nonexistent/forge.toml"), ConfigError);
}

TEST(RunConfig, JsonRoundTripAndWorkdir) {
  auto cfg = load_run_config(forge::test::fixture("conv2d/forge.toml"));
  cfg.out_dir = "/tmp/out";
  const auto back = run_config_from_json(nlohmann::json::parse(cfg.to_json().dump()));
  EXPECT_EQ(back.to_json(), cfg.to_json());
  EXPECT_EQ(back.toolchain_config().workdir, fs::path("/tmp/out/work"));
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse("{}")), CorruptArtifactError);
}

#include <algorithm>
#include <bitset>
#include <chrono>
#include <functional>
#include <iostream>
#include <random>
#include <set>

#include "forge/config.hpp"
#include "forge/debugger.hpp"
#include "forge/evaluation.hpp"
#include "forge/generator.hpp"
#include "forge/pipeline.hpp"
#include "forge/planning.hpp"
#include "forge/verification.hpp"
#include "support.hpp"

using namespace forge;

namespace {

struct Check {
  bool ok = true;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

verification::ToolchainConfig stub_cfg(const forge::test::TempDir& dir) {
  verification::ToolchainConfig cfg;
  cfg.kind = verification::ToolchainKind::Stub;
  cfg.workdir = dir.path();
  return cfg;
}

config::RunConfig conv2d_cfg(const fs::path& out) {
  auto cfg = config::load_run_config(forge::test::fixture("conv2d/forge.toml"));
  cfg.out_dir = out;
  return cfg;
}

std::map<std::string, std::string> model_files(const fs::path& out) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(out / "model")) files[e.path().filename().string()] = forge::test::read_file(e.path());
  return files;
}

Check hap_golden_path() {
  Check c;
  const auto dag = forge::test::conv2d_dag();
  const auto start = Clock::now();
  const auto plan = planning::hap_plan(dag);
  const double t = seconds_since(start);
  c.expect(plan.tasks == std::vector<std::string>{"Adder", "Multi", "Conv2D"}, "plan order differs");
  c.expect(t < 1.0, "took " + std::to_string(t) + " s");
  if (c.ok) c.detail = "plan [Adder, Multi, Conv2D] in " + std::to_string(t) + " s";
  return c;
}

Check hap_properties() {
  Check c;
  std::mt19937 rng(2024);
  const auto start = Clock::now();
  int with_duplicates = 0;
  for (int trial = 0; trial < 200 && c.ok; ++trial) {
    const auto g = forge::test::random_design(rng, std::uniform_int_distribution<int>(1, 50)(rng));
    const auto tasks = planning::hap_plan(g).tasks;
    std::set<std::string> keys, types_instanced;
    bool dup_types = false;
    for (const auto& [name, m] : g.module_irs) {
      keys.insert(planning::canonical_key(name));
      std::set<std::string> kids;
      for (const auto& ch : m.children_modules) {
        if (!kids.insert(ch.module_name).second || !types_instanced.insert(ch.module_name).second) dup_types = true;
        const auto child = std::find(tasks.begin(), tasks.end(), ch.module_name);
        const auto parent = std::find(tasks.begin(), tasks.end(), name);
        c.expect(child < parent, "child " + ch.module_name + " not before " + name);
      }
    }
    with_duplicates += dup_types;
    c.expect(tasks.size() == keys.size(), "task count differs from canonical module count");
    c.expect(std::set<std::string>(tasks.begin(), tasks.end()).size() == tasks.size(), "a task repeats");
  }
  const double t = seconds_since(start);
  c.expect(with_duplicates > 0, "no tree exercised duplicated module types");
  c.expect(t < 10.0, "took " + std::to_string(t) + " s");
  if (c.ok) c.detail = "200 trees (" + std::to_string(with_duplicates) + " with repeated types) in " + std::to_string(t) + " s";
  return c;
}

Check pass_at_k_oracle() {
  Check c;
  double worst = 0;
  for (int n = 1; n <= 8; ++n)
    for (int succ = 0; succ <= n; ++succ)
      for (int k = 1; k <= n; ++k) {
        int subsets = 0, hits = 0;
        for (unsigned mask = 0; mask < (1u << n); ++mask) {
          if (static_cast<int>(std::bitset<16>(mask).count()) != k) continue;
          ++subsets;
          hits += (mask & ((1u << succ) - 1)) != 0;
        }
        worst = std::max(worst, std::abs(evaluation::pass_at_k(n, succ, k) - static_cast<double>(hits) / subsets));
      }
  c.expect(worst <= 1e-12, "max deviation " + std::to_string(worst));
  c.expect(evaluation::pass_at_k(5, 3, 1) == 0.6, "pass@1(5,3) != 0.6");
  c.expect(evaluation::pass_at_k(5, 3, 2) == 0.9, "pass@2(5,3) != 0.9");
  if (c.ok) c.detail = "all n <= 8 match enumeration; 0.6 and 0.9 exact";
  return c;
}

Check scale_rows() {
  Check c;
  using evaluation::ScaleClass;
  const std::vector<std::tuple<int, int, ScaleClass>> rows{{45, 1, ScaleClass::Small},    {200, 3, ScaleClass::Medium},
                                                           {1814, 21, ScaleClass::Large}, {387, 3, ScaleClass::Large},
                                                           {320, 2, ScaleClass::Large},   {197, 1, ScaleClass::Medium}};
  for (const auto& [lines, subs, want] : rows)
    c.expect(evaluation::classify_scale(lines, subs) == want,
             "(" + std::to_string(lines) + "," + std::to_string(subs) + ") -> " +
                 evaluation::to_string(evaluation::classify_scale(lines, subs)));
  if (c.ok) c.detail = "six rows exact";
  return c;
}

Check debug_bounds() {
  Check c;
  forge::test::TempDir dir;
  generator::ReferenceModel m;
  m.module_name = "Adder";
  m.units = {{"Adder.h", "#pragma once\n", generator::UnitKind::Header},
             {"Adder.cpp", "int broken(\n", generator::UnitKind::Implementation}};
  std::vector<llm::ScriptEntry> fixes(10, {std::nullopt, forge::test::fence("cpp Adder.cpp", "int ok() { return 0; }")});

  auto always = verification::StubToolchain::from_steps({{"Adder", {{1, "Adder.cpp:1: error\n", false}}}}, {}, stub_cfg(dir));
  const auto a = debugger::debug_loop(m, {}, *always, forge::test::leaf_ir("Adder"), {}, forge::test::mock(fixes));
  c.expect(!a.fixed && a.iterations_used == 6, "always-fail gave fixed=" + std::to_string(a.fixed) + " iterations=" +
                                                    std::to_string(a.iterations_used));

  auto once = verification::StubToolchain::from_steps({{"Adder", {{1, "Adder.cpp:1: error\n", false}, {0, "", false}}}}, {},
                                                      stub_cfg(dir));
  const auto b = debugger::debug_loop(m, {}, *once, forge::test::leaf_ir("Adder"), {}, forge::test::mock(fixes));
  c.expect(b.fixed && b.iterations_used == 2, "fail-once gave iterations=" + std::to_string(b.iterations_used));
  if (c.ok) c.detail = "always-fail 6 iterations unfixed, fail-once fixed in 2";
  return c;
}

Check log_windows() {
  Check c;
  std::mt19937 rng(7);
  std::string log;
  for (int t = 0; t <= 3000; t += 10) log += "time=" + std::to_string(t) + "ns v=1\n";
  int clamped = 0;
  for (int i = 0; i < 100; ++i) {
    const double t = i < 10 ? std::uniform_int_distribution<int>(0, 99)(rng) : std::uniform_int_distribution<int>(0, 2900)(rng);
    const auto w = debugger::extract_log_windows(log, {{t, "", "0", "1"}});
    const double lo = std::max(0.0, t - 100), hi = t + 100;
    clamped += t < 100;
    c.expect(w.size() == 1 && w[0].start_ns == lo && w[0].end_ns == hi, "window for t=" + std::to_string(t));
  }
  if (c.ok) c.detail = "100 windows exact, " + std::to_string(clamped) + " clamped at 0";
  return c;
}

Check end_to_end() {
  Check c;
  forge::test::TempDir a, b;
  const auto start = Clock::now();
  const auto first = pipeline::run_pipeline(conv2d_cfg(a.path()));
  c.expect(first.exit_code == 0, "first run exit " + std::to_string(first.exit_code) + ": " + first.message);
  if (!c.ok) return c;
  const auto files = model_files(a.path());
  std::set<std::string> names;
  for (const auto& [name, _] : files) names.insert(name);
  c.expect(names == std::set<std::string>{"Adder.cpp", "Adder.h", "Conv2D.cpp", "Conv2D.h", "Multi.cpp", "Multi.h"},
           "unexpected model file set");
  const auto second = pipeline::run_pipeline(conv2d_cfg(b.path()));
  c.expect(second.exit_code == 0, "second run exit " + std::to_string(second.exit_code));
  c.expect(model_files(b.path()) == files, "model files differ between runs");
  c.expect(forge::test::read_file(a / "plan.json") == forge::test::read_file(b / "plan.json"), "plan.json differs");
  const double t = seconds_since(start);
  c.expect(t < 30.0, "took " + std::to_string(t) + " s");
  if (c.ok) c.detail = "exit 0, 6 files, byte-identical rerun, " + std::to_string(t) + " s for both";
  return c;
}

Check amg_feedback() {
  Check c;
  const auto dag = forge::test::conv2d_dag();
  const nlohmann::ordered_json first = {{"passed", false},
                                        {"missing_ports", nlohmann::json::array()},
                                        {"missing_functions", {"fp1"}},
                                        {"notes", "sum drops the carry"}};
  std::vector<llm::ScriptEntry> entries;
  for (const auto* check : {"first", "pass"}) {
    entries.push_back(forge::test::conv2d_entry(R"(^\[amg\.header\] module=Adder)"));
    entries.push_back(forge::test::conv2d_entry(R"(^\[amg\.pseudocode\] module=Adder)"));
    entries.push_back(forge::test::conv2d_entry(R"(^\[amg\.impl\] module=Adder)"));
    entries.push_back({R"(^\[amg\.check\] module=Adder\s)",
                       std::string(check) == "first"
                           ? forge::test::fence("json", first.dump())
                           : forge::test::fence("json", R"({"passed": true, "missing_ports": [], "missing_functions": [], "notes": ""})")});
  }
  auto backend = forge::test::mock(entries);
  const auto model = generator::amg_generate(dag.module_irs.at("Adder"), {}, backend);
  c.expect(model.attempts == 2, "attempts=" + std::to_string(model.attempts));
  std::vector<std::string> headers;
  for (const auto& p : forge::test::prompts_sent(*backend))
    if (p.rfind("[amg.header]", 0) == 0) headers.push_back(p);
  c.expect(headers.size() == 2, "header prompts=" + std::to_string(headers.size()));
  c.expect(headers.size() == 2 && headers[1].find(first.dump(2)) != std::string::npos,
           "second header prompt lacks the first result");
  if (c.ok) c.detail = "attempts=2, second header prompt carries the first result";
  return c;
}

Check verdict_fuzz() {
  Check c;
  forge::test::TempDir dir;
  std::mt19937 rng(1000);
  const std::vector<std::string> pool{"No mismatches found",
                                      "Has mismatches",
                                      "MISMATCH time=40ns in=a=1,b=2 dut=3 ref=4",
                                      "MISMATCH time=x",
                                      "time=10ns a=1",
                                      "no mismatches",
                                      "Has  mismatches",
                                      "mismatches: 0",
                                      "Simulation finished",
                                      "   No mismatches found   "};
  int passes = 0, false_passes = 0;
  for (int i = 0; i < 1000; ++i) {
    std::string log;
    const int lines = std::uniform_int_distribution<int>(0, 8)(rng);
    for (int l = 0; l < lines; ++l) log += pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)] + "\n";
    auto tc = verification::StubToolchain::from_steps({}, {{"M", {{0, log, false}}}}, stub_cfg(dir));
    const bool passed = verification::run_testbench("M", "", *tc).passed;
    const bool allowed = log.find("No mismatches") != std::string::npos && log.find("Has mismatches") == std::string::npos;
    passes += passed;
    false_passes += passed && !allowed;
  }
  c.expect(false_passes == 0, std::to_string(false_passes) + " false passes");
  c.expect(passes > 0, "no log passed at all");
  if (c.ok) c.detail = "1000 logs, " + std::to_string(passes) + " passes, 0 false passes";
  return c;
}

Check defaults_audit() {
  Check c;
  const config::RunConfig fresh;
  c.expect(fresh.temperature == 0.3, "default temperature " + std::to_string(fresh.temperature));
  c.expect(fresh.max_debug_iters == 6, "default max_debug_iters " + std::to_string(fresh.max_debug_iters));
  forge::test::TempDir out;
  const auto cfg = conv2d_cfg(out.path());
  auto backend = llm::make_backend(cfg.backend_handle());
  pipeline::PipelineOptions opts;
  opts.backend = backend;
  c.expect(pipeline::run_pipeline(cfg, opts).exit_code == 0, "pipeline run failed");
  const auto transcript = backend->transcript();
  c.expect(!transcript.empty(), "no requests recorded");
  for (const auto& x : transcript) {
    const auto& body = x.request_body;
    c.expect(body.contains("model") && body.contains("messages") && body.contains("temperature") &&
                 body["temperature"].get<double>() == 0.3,
             "request body without temperature 0.3");
  }
  if (c.ok) c.detail = "defaults 0.3 and 6; " + std::to_string(transcript.size()) + " request bodies at temperature 0.3";
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
      {"plan golden path", hap_golden_path},     {"plan properties", hap_properties},
      {"pass@k oracle", pass_at_k_oracle},       {"scale classes", scale_rows},
      {"debug loop bound", debug_bounds},        {"log windows", log_windows},
      {"end-to-end run", end_to_end},            {"generation feedback", amg_feedback},
      {"verdict parsing", verdict_fuzz},         {"defaults audit", defaults_audit},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check result;
    try {
      result = criteria[i].second();
    } catch (const std::exception& e) {
      result = {false, std::string("threw: ") + e.what()};
    }
    failed += !result.ok;
    std::cout << (result.ok ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << criteria[i].first << " ("
              << result.detail << ")" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "forge/config.hpp"
#include "forge/error.hpp"
#include "forge/evaluation.hpp"
#include "forge/pipeline.hpp"
#include "forge/planning.hpp"

namespace fs = std::filesystem;
using forge::config::RunConfig;
using forge::pipeline::Stage;

namespace {

struct GlobalFlags {
  std::string config_path;
  std::string backend;
  std::string mock_script;
  std::optional<int> max_debug_iters;
  std::optional<double> temperature;
};

/// Defaults, then the config file (or the run's recorded config), then flags.
RunConfig build_config(const GlobalFlags& g, const std::string& spec, const std::string& out) {
  RunConfig cfg;
  if (!g.config_path.empty()) {
    cfg = forge::config::load_run_config(g.config_path);
  } else if (!out.empty() && fs::exists(fs::path(out) / "run_config.json")) {
    std::ifstream in(fs::path(out) / "run_config.json");
    cfg = forge::config::run_config_from_json(nlohmann::json::parse(in, nullptr, false));
  }
  if (!spec.empty()) cfg.spec_path = spec;
  if (!out.empty()) cfg.out_dir = out;
  if (g.backend == "http") cfg.backend.kind = forge::llm::BackendKind::Http;
  else if (g.backend == "mock") cfg.backend.kind = forge::llm::BackendKind::Mock;
  if (!g.mock_script.empty()) {
    cfg.backend.script_path = g.mock_script;
    if (g.backend.empty()) cfg.backend.kind = forge::llm::BackendKind::Mock;
  }
  if (g.max_debug_iters) cfg.max_debug_iters = *g.max_debug_iters;
  if (g.temperature) cfg.temperature = *g.temperature;
  cfg.validate();
  return cfg;
}

std::vector<int> parse_ks(const std::string& text) {
  std::vector<int> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const int k = std::stoi(item, &used);
    if (used != item.size()) throw forge::ConfigError("bad k value \"" + item + "\"");
    ks.push_back(k);
  }
  return ks;
}

int report(const forge::pipeline::RunOutcome& outcome) {
  if (outcome.exit_code == forge::pipeline::kExitOk) {
    if (!outcome.message.empty()) std::cout << outcome.message << '\n';
  } else {
    std::cerr << "forge: " << outcome.message << '\n';
    if (outcome.abort_module) std::cerr << "forge: validation aborted at " << *outcome.abort_module << '\n';
  }
  return outcome.exit_code;
}

int plan_file(const std::string& ir_path, const std::string& plan_path) {
  std::ifstream in(ir_path, std::ios::binary);
  if (!in) throw forge::ConfigError("cannot read design IR " + ir_path);
  std::stringstream ss;
  ss << in.rdbuf();
  forge::ir::DesignArchitectureGraph dag;
  try {
    dag = forge::ir::parse_design_ir(ss.str());
  } catch (const forge::SchemaError& e) {
    throw forge::CorruptArtifactError(ir_path + ": " + e.what());
  } catch (const forge::ValidationError& e) {
    std::cerr << "forge: " << ir_path << ": " << e.what() << '\n';
    return forge::pipeline::kExitPlan;
  }
  forge::planning::TaskSequence seq;
  try {
    seq = forge::planning::hap_plan(dag);
  } catch (const forge::Error& e) {
    std::cerr << "forge: " << e.what() << '\n';
    return forge::pipeline::kExitPlan;
  }
  const fs::path target = plan_path;
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  std::ofstream(target, std::ios::binary) << forge::planning::to_json(seq).dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"forge: specification to reference model pipeline"};
  app.require_subcommand(1);

  GlobalFlags g;
  app.add_option("--config", g.config_path, "TOML config file");
  app.add_option("--backend", g.backend, "Backend kind")->check(CLI::IsMember({"http", "mock"}));
  app.add_option("--mock-script", g.mock_script, "Mock backend script (JSON)");
  app.add_option("--max-debug-iters", g.max_debug_iters, "Debug iteration threshold")->check(CLI::PositiveNumber);
  app.add_option("--temperature", g.temperature, "Sampling temperature")->check(CLI::Range(0.0, 2.0));

  std::string spec, out;
  auto* standardize = app.add_subcommand("standardize", "Spec to design IR (<out>/ir/design.json)");
  standardize->add_option("--spec", spec, "Design specification");
  standardize->add_option("--out", out, "Output directory")->required();

  std::string ir_path;
  auto* plan = app.add_subcommand("plan", "Design IR to task plan (<out>/plan.json)");
  plan->add_option("--ir", ir_path, "Plan this design IR file; --out then names the plan file");
  plan->add_option("--out", out, "Output directory")->required();

  auto* generate = app.add_subcommand("generate", "Plan to reference model sources (<out>/model)");
  generate->add_option("--out", out, "Output directory")->required();

  auto* verify = app.add_subcommand("verify", "Validate and debug the generated models");
  verify->add_option("--out", out, "Output directory")->required();

  auto* run = app.add_subcommand("run", "All stages, standardize through verify");
  run->add_option("--spec", spec, "Design specification");
  run->add_option("--out", out, "Output directory")->required();

  auto* resume = app.add_subcommand("resume", "Continue a prior run at its first incomplete stage");
  resume->add_option("out", out, "Output directory of the prior run")->required();

  std::string bench, ks_text = "1", results = "results.json", csv;
  int trials = 5;
  auto* eval = app.add_subcommand("eval", "Benchmark sweep with pass@k");
  eval->add_option("--bench", bench, "Benchmark directory")->required();
  eval->add_option("--trials", trials, "Trials per case")->check(CLI::PositiveNumber);
  eval->add_option("--k", ks_text, "Comma-separated k values");
  eval->add_option("--out", results, "Results JSON path");
  eval->add_option("--csv", csv, "Also write trial records as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return forge::pipeline::kExitConfig;
  }

  forge::pipeline::PipelineOptions options;
  options.progress = &std::cerr;
  try {
    if (*resume) return report(forge::pipeline::resume(out, options));

    if (*eval) {
      RunConfig base = build_config(g, "", "");
      const auto cases = forge::evaluation::load_benchmark_dir(bench);
      const fs::path results_path = results;
      const fs::path runs_dir = results_path.parent_path() / (results_path.stem().string() + "_runs");
      forge::evaluation::BenchmarkOptions bo;
      bo.trials_per_case = trials;
      bo.ks = parse_ks(ks_text);
      bo.workers = base.eval_workers;
      const auto result =
          forge::evaluation::run_benchmark(cases, bo, forge::pipeline::make_trial_runner(base, fs::absolute(runs_dir)));
      if (!results_path.parent_path().empty()) fs::create_directories(results_path.parent_path());
      std::ofstream(results_path) << result.to_json().dump(2) << '\n';
      if (!csv.empty()) std::ofstream(csv) << result.to_csv();
      std::cout << "SP " << result.summary.sp * 100 << "%  FP " << result.summary.fp * 100 << "%\n";
      for (const auto& [k, v] : result.summary.average_pass_at_k) std::cout << "Average Pass@" << k << " " << v << '\n';
      return 0;
    }

    if (*plan && !ir_path.empty()) return plan_file(ir_path, out);

    const RunConfig cfg = build_config(g, spec, out);
    Stage first = Stage::Standardize, last = Stage::Verify;
    if (*standardize) last = Stage::Standardize;
    if (*plan) first = last = Stage::Plan;
    if (*generate) first = last = Stage::Generate;
    if (*verify) first = last = Stage::Verify;
    return report(forge::pipeline::run_stages(cfg, first, last, options));
  } catch (const forge::CorruptArtifactError& e) {
    std::cerr << "forge: " << e.what() << '\n';
    return forge::pipeline::kExitCorruptArtifact;
  } catch (const forge::ConfigError& e) {
    std::cerr << "forge: " << e.what() << '\n';
    return forge::pipeline::kExitConfig;
  } catch (const forge::EmptySetError& e) {
    std::cerr << "forge: " << e.what() << '\n';
    return forge::pipeline::kExitConfig;
  } catch (const forge::DomainError& e) {
    std::cerr << "forge: " << e.what() << '\n';
    return forge::pipeline::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "forge: " << e.what() << '\n';
    return forge::pipeline::kExitFailure;
  }
}

#include "forge/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>

#include "forge/debugger.hpp"
#include "forge/design_ir.hpp"
#include "forge/error.hpp"
#include "forge/generator.hpp"
#include "forge/planning.hpp"
#include "forge/prompts.hpp"
#include "forge/standardization.hpp"
#include "forge/verification.hpp"

namespace forge::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string to_string(Stage s) {
  switch (s) {
    case Stage::Standardize: return "standardize";
    case Stage::Plan: return "plan";
    case Stage::Generate: return "generate";
    case Stage::Verify: return "verify";
  }
  return "verify";
}

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

fs::path design_path(const fs::path& out) { return out / "ir" / "design.json"; }
fs::path plan_path(const fs::path& out) { return out / "plan.json"; }
fs::path model_dir(const fs::path& out) { return out / "model"; }
fs::path reports_dir(const fs::path& out) { return out / "reports"; }
fs::path trace_path(const fs::path& out) { return reports_dir(out) / "amg_trace.json"; }
fs::path validation_path(const fs::path& out) { return reports_dir(out) / "validation.json"; }
fs::path run_log_path(const fs::path& out) { return out / "run_log.jsonl"; }
fs::path run_config_path(const fs::path& out) { return out / "run_config.json"; }

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw Error("cannot write " + path.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptArtifactError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json_artifact(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw CorruptArtifactError(path.string() + " is not valid JSON: " + e.what());
  }
}

ir::DesignArchitectureGraph load_design(const fs::path& out) {
  const auto path = design_path(out);
  if (!fs::exists(path)) throw CorruptArtifactError("missing " + path.string());
  try {
    return ir::parse_design_ir(read_text(path));
  } catch (const CorruptArtifactError&) {
    throw;
  } catch (const Error& e) {
    throw CorruptArtifactError(path.string() + ": " + e.what());
  }
}

planning::TaskSequence load_plan(const fs::path& out, const ir::DesignArchitectureGraph& dag) {
  const auto path = plan_path(out);
  if (!fs::exists(path)) throw CorruptArtifactError("missing " + path.string());
  planning::TaskSequence plan;
  try {
    plan = planning::plan_from_json(read_json_artifact(path));
  } catch (const SchemaError& e) {
    throw CorruptArtifactError(path.string() + ": " + e.what());
  }
  if (plan.tasks.empty()) throw CorruptArtifactError(path.string() + ": empty task list");
  for (const auto& t : plan.tasks)
    if (!dag.module_irs.count(t)) throw CorruptArtifactError(path.string() + ": task " + t + " is not in the design");
  return plan;
}

std::map<std::string, generator::ReferenceModel> load_models(const fs::path& out, const planning::TaskSequence& plan) {
  std::map<std::string, generator::ReferenceModel> models;
  for (const auto& t : plan.tasks) models[t] = generator::read_sources(t, model_dir(out));
  return models;
}

int stage_exit_code(Stage s) {
  switch (s) {
    case Stage::Standardize: return kExitStandardize;
    case Stage::Plan: return kExitPlan;
    case Stage::Generate: return kExitGenerate;
    case Stage::Verify: return kExitValidationAbort;
  }
  return kExitFailure;
}

class Run {
public:
  Run(config::RunConfig cfg, const PipelineOptions& options) : cfg_(std::move(cfg)), options_(options) {
    backend_ = options.backend;
  }

  ~Run() {
    if (backend_ && observing_) backend_->set_observer(nullptr);
  }

  void event(ojson e) {
    std::lock_guard lock(log_mutex_);
    if (!log_.is_open()) {
      fs::create_directories(cfg_.out_dir);
      log_.open(run_log_path(cfg_.out_dir), std::ios::app);
    }
    log_ << e.dump() << '\n';
    log_.flush();
  }

  void progress(const std::string& line) {
    if (options_.progress) *options_.progress << line << '\n';
  }

  RunOutcome execute(Stage first, Stage last, const std::string& mode) {
    RunOutcome outcome;
    ojson start{{"event", "run_start"}, {"mode", mode}, {"first_stage", to_string(first)}, {"last_stage", to_string(last)}};
    event(start);
    Stage current = first;
    try {
      cfg_.validate();
      if (!cfg_.prompt_dir.empty()) prompts::load_overrides(cfg_.prompt_dir);
      write_text(run_config_path(cfg_.out_dir), cfg_.to_json().dump(2) + "\n");

      if (first > Stage::Standardize) dag_ = load_design(cfg_.out_dir);
      if (first > Stage::Plan) plan_ = load_plan(cfg_.out_dir, *dag_);
      if (first > Stage::Generate) models_ = load_models(cfg_.out_dir, *plan_);
      if (first > Stage::Generate) outcome.generation_complete = true;

      for (int s = static_cast<int>(first); s <= static_cast<int>(last); ++s) {
        current = static_cast<Stage>(s);
        event({{"event", "stage_start"}, {"stage", to_string(current)}});
        outcome.executed.push_back(current);
        switch (current) {
          case Stage::Standardize: standardize(); break;
          case Stage::Plan: plan(); break;
          case Stage::Generate:
            generate();
            outcome.generation_complete = true;
            break;
          case Stage::Verify: verify(outcome); break;
        }
        event({{"event", "stage_end"}, {"stage", to_string(current)}, {"status", "ok"}});
        progress(to_string(current) + ": ok");
      }
      outcome.exit_code = kExitOk;
      if (last == Stage::Verify) outcome.message = "top module " + plan_->tasks.back() + " validated";
    } catch (const ValidationAbortError& e) {
      fail(outcome, current, kExitValidationAbort, e.what());
      outcome.abort_module = e.module();
    } catch (const ConfigError& e) {
      fail(outcome, current, kExitConfig, e.what());
    } catch (const BackendUnavailableError& e) {
      fail(outcome, current, kExitConfig, e.what());
    } catch (const ToolchainNotFoundError& e) {
      fail(outcome, current, kExitConfig, e.what());
    } catch (const CorruptArtifactError& e) {
      fail(outcome, current, kExitCorruptArtifact, e.what());
    } catch (const std::exception& e) {
      fail(outcome, current, stage_exit_code(current), e.what());
    }
    event({{"event", "run_end"}, {"exit_code", outcome.exit_code}});
    return outcome;
  }

private:
  void fail(RunOutcome& outcome, Stage stage, int code, const std::string& message) {
    outcome.exit_code = code;
    outcome.message = message;
    const bool started = !outcome.executed.empty() && outcome.executed.back() == stage;
    if (started) event({{"event", "stage_end"}, {"stage", to_string(stage)}, {"status", "failed"}, {"message", message}});
    progress((started ? to_string(stage) : std::string("setup")) + ": failed (exit " + std::to_string(code) + "): " + message);
  }

  const std::shared_ptr<llm::Backend>& backend() {
    if (!backend_) {
      auto handle = cfg_.backend_handle();
      handle.apply_environment();
      backend_ = llm::make_backend(handle);
    }
    if (!observing_) {
      backend_->set_observer([this](const llm::Exchange& x) {
        event({{"event", "exchange"},
               {"stage", to_string(current_stage_)},
               {"role", llm::to_string(x.role)},
               {"session", x.session_id},
               {"prompt_hash", fnv1a_hex(x.request_body.dump())},
               {"reply_hash", fnv1a_hex(x.reply)}});
      });
      observing_ = true;
    }
    return backend_;
  }

  void standardize() {
    current_stage_ = Stage::Standardize;
    if (!fs::exists(cfg_.spec_path)) throw ConfigError("spec file not found: " + cfg_.spec_path.string());
    const auto spec = standardization::load_spec(cfg_.spec_path.string());
    dag_ = standardization::standardize(spec, backend(), {cfg_.max_regen});
    write_text(design_path(cfg_.out_dir), ir::serialize_design_ir(*dag_));
  }

  void plan() {
    current_stage_ = Stage::Plan;
    plan_ = planning::hap_plan(*dag_);
    write_text(plan_path(cfg_.out_dir), planning::to_json(*plan_).dump(2) + "\n");
  }

  void generate() {
    current_stage_ = Stage::Generate;
    fs::remove(trace_path(cfg_.out_dir));
    ojson trace = ojson::array();
    models_.clear();
    for (const auto& task : plan_->tasks) {
      const auto& ir = dag_->module_irs.at(task);
      try {
        auto model = generator::amg_generate(ir, ir::edges_for_parent(*dag_, task), backend(), cfg_.amg_max_attempts);
        generator::write_sources(model, model_dir(cfg_.out_dir));
        trace.push_back(generator::trace_json(model));
        models_[task] = std::move(model);
      } catch (const generator::GenerationExhaustedError& e) {
        write_text(reports_dir(cfg_.out_dir) / "generation_failure.json",
                   ojson{{"module", e.module()}, {"last_result", e.last_result().to_json()}}.dump(2) + "\n");
        throw;
      }
    }
    write_text(trace_path(cfg_.out_dir), trace.dump(2) + "\n");
  }

  void verify(RunOutcome& outcome) {
    current_stage_ = Stage::Verify;
    fs::remove(validation_path(cfg_.out_dir));
    auto tc = verification::make_toolchain(cfg_.toolchain_config());
    const auto kb = cfg_.kb_path.empty() ? debugger::KnowledgeBase{} : debugger::load_knowledge_base(cfg_.kb_path);
    debugger::Debugger dbg(backend(), dag_->module_irs, kb, cfg_.max_debug_iters);

    std::map<std::string, std::vector<verification::ValidationReport>> reports;
    verification::IncrementalOptions hooks;
    hooks.on_report = [&](const verification::ValidationReport& r) {
      reports[r.module_name].push_back(r);
      event({{"event", "validation"},
             {"module", r.module_name},
             {"stage", verification::to_string(r.stage)},
             {"passed", r.passed}});
    };
    hooks.on_patched = [&](const generator::ReferenceModel& m) {
      generator::write_sources(m, model_dir(cfg_.out_dir));
      event({{"event", "model_patched"}, {"module", m.module_name}});
    };

    std::optional<std::string> abort_module;
    std::string abort_message;
    try {
      verification::incremental_validate(*plan_, models_, *tc, &dbg, hooks);
    } catch (const ValidationAbortError& e) {
      abort_module = e.module();
      abort_message = e.what();
    }

    write_reports(reports, dbg, abort_module);
    outcome.syntax_pass = !reports.empty();
    for (const auto& [module, list] : reports) {
      for (auto it = list.rbegin(); it != list.rend(); ++it) {
        if (it->stage != verification::Stage::Syntax) continue;
        outcome.syntax_pass = outcome.syntax_pass && it->passed;
        break;
      }
    }
    if (abort_module) throw ValidationAbortError(*abort_module, abort_message);
    outcome.functional_pass = true;
  }

  void write_reports(const std::map<std::string, std::vector<verification::ValidationReport>>& reports,
                     const debugger::Debugger& dbg, const std::optional<std::string>& abort_module) {
    ojson summary;
    summary["status"] = abort_module ? "aborted" : "passed";
    summary["abort_module"] = abort_module ? ojson(*abort_module) : ojson(nullptr);
    summary["modules"] = ojson::object();
    for (const auto& task : plan_->tasks) {
      const auto it = reports.find(task);
      if (it == reports.end()) continue;
      ojson list = ojson::array();
      for (const auto& r : it->second) list.push_back(r.to_json());
      write_text(reports_dir(cfg_.out_dir) / (task + ".json"), list.dump(2) + "\n");
      summary["modules"][task] = {{"passed", it->second.back().passed && it->second.back().stage == verification::Stage::Functional},
                                  {"reports", it->second.size()}};
    }
    ojson debug = ojson::object();
    for (const auto& [module, outcome] : dbg.outcomes()) {
      ojson history = ojson::array();
      for (const auto& h : outcome.history)
        history.push_back({{"stage", verification::to_string(h.stage)},
                           {"retrieved_entry_ids", h.retrieved_entry_ids},
                           {"diff_summary", h.diff_summary}});
      debug[module] = {{"fixed", outcome.fixed}, {"iterations_used", outcome.iterations_used}, {"history", history}};
    }
    write_text(reports_dir(cfg_.out_dir) / "debug.json", debug.dump(2) + "\n");
    write_text(validation_path(cfg_.out_dir), summary.dump(2) + "\n");
  }

  config::RunConfig cfg_;
  PipelineOptions options_;
  std::shared_ptr<llm::Backend> backend_;
  bool observing_ = false;
  Stage current_stage_ = Stage::Standardize;
  std::mutex log_mutex_;
  std::ofstream log_;
  std::optional<ir::DesignArchitectureGraph> dag_;
  std::optional<planning::TaskSequence> plan_;
  std::map<std::string, generator::ReferenceModel> models_;
};

}  // namespace

RunOutcome run_stages(const config::RunConfig& cfg, Stage first, Stage last, const PipelineOptions& options) {
  if (first > last) throw Error("first stage after last stage");
  if (cfg.out_dir.empty()) {
    RunOutcome outcome;
    outcome.exit_code = kExitConfig;
    outcome.message = "no output directory configured";
    return outcome;
  }
  Run run(cfg, options);
  return run.execute(first, last, "run");
}

RunOutcome run_pipeline(const config::RunConfig& cfg, const PipelineOptions& options) {
  return run_stages(cfg, Stage::Standardize, Stage::Verify, options);
}

std::optional<Stage> first_incomplete_stage(const fs::path& out_dir) {
  if (!fs::exists(design_path(out_dir))) return Stage::Standardize;
  const auto dag = load_design(out_dir);
  if (!fs::exists(plan_path(out_dir))) return Stage::Plan;
  const auto plan = load_plan(out_dir, dag);
  if (!fs::exists(trace_path(out_dir))) return Stage::Generate;
  read_json_artifact(trace_path(out_dir));
  load_models(out_dir, plan);
  if (!fs::exists(validation_path(out_dir))) return Stage::Verify;
  const auto summary = read_json_artifact(validation_path(out_dir));
  if (!summary.is_object() || !summary.contains("status") || !summary["status"].is_string())
    throw CorruptArtifactError(validation_path(out_dir).string() + ": missing status");
  if (summary["status"] != "passed") return Stage::Verify;
  return std::nullopt;
}

RunOutcome resume(const fs::path& out_dir, const PipelineOptions& options) {
  RunOutcome outcome;
  try {
    if (!fs::exists(run_log_path(out_dir))) throw ConfigError("no prior run in " + out_dir.string());
    auto cfg = config::run_config_from_json(read_json_artifact(run_config_path(out_dir)));
    cfg.out_dir = out_dir;
    const auto first = first_incomplete_stage(out_dir);
    if (!first) {
      outcome.exit_code = kExitOk;
      outcome.generation_complete = outcome.syntax_pass = outcome.functional_pass = true;
      outcome.message = "run already complete";
      std::ofstream(run_log_path(out_dir), std::ios::app)
          << ojson{{"event", "resume"}, {"first_stage", nullptr}}.dump() << '\n';
      if (options.progress) *options.progress << "resume: nothing to do\n";
      return outcome;
    }
    Run run(cfg, options);
    run.event({{"event", "resume"}, {"first_stage", to_string(*first)}});
    return run.execute(*first, Stage::Verify, "resume");
  } catch (const ConfigError& e) {
    outcome.exit_code = kExitConfig;
    outcome.message = e.what();
  } catch (const CorruptArtifactError& e) {
    outcome.exit_code = kExitCorruptArtifact;
    outcome.message = e.what();
  }
  if (options.progress) *options.progress << "resume: failed (exit " << outcome.exit_code << "): " << outcome.message << '\n';
  return outcome;
}

evaluation::TrialRunner make_trial_runner(const config::RunConfig& base, const fs::path& eval_out) {
  return [base, eval_out](const evaluation::BenchmarkCase& c, int trial) {
    config::RunConfig cfg = base;
    cfg.spec_path = c.spec_path;
    cfg.out_dir = eval_out / c.name / ("trial_" + std::to_string(trial));
    cfg.toolchain.testbench_dir = c.testbench_path.string();
    cfg.toolchain.workdir.clear();
    fs::remove_all(cfg.out_dir);
    const auto outcome = run_pipeline(cfg);
    evaluation::TrialOutcome t;
    t.syntax_pass = outcome.syntax_pass || outcome.exit_code == kExitOk;
    t.functional_pass = outcome.exit_code == kExitOk;
    t.note = outcome.message;
    return t;
  };
}

}  // namespace forge::pipeline

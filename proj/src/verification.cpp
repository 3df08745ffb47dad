#include "forge/verification.hpp"

#include <fstream>
#include <regex>
#include <sstream>

#include "forge/error.hpp"

namespace forge::verification {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string to_string(Stage s) { return s == Stage::Syntax ? "syntax" : "functional"; }

void ToolchainConfig::validate() const {
  if (timeout_s <= 0) throw ConfigError("toolchain timeout_s must be > 0");
  try {
    std::regex probe(mismatch_regex);
    if (probe.mark_count() < 4) throw ConfigError("mismatch_regex needs 4 capture groups (time, inputs, dut, ref)");
  } catch (const std::regex_error& e) {
    throw ConfigError(std::string("bad mismatch_regex: ") + e.what());
  }
  if (kind == ToolchainKind::Stub) return;
  for (const char* ph : {"{sources}", "{out_bin}", "{include_dirs}"})
    if (compile_cmd_template.find(ph) == std::string::npos)
      throw ConfigError(std::string("compile_cmd_template lacks ") + ph);
  if (run_cmd_template.find("{bin}") == std::string::npos) throw ConfigError("run_cmd_template lacks {bin}");
}

ojson ValidationReport::to_json() const {
  ojson j;
  j["module_name"] = module_name;
  j["stage"] = to_string(stage);
  j["passed"] = passed;
  j["log_excerpt"] = log_excerpt;
  j["mismatches"] = ojson::array();
  for (const auto& m : mismatches)
    j["mismatches"].push_back(
        {{"time_ns", m.time_ns}, {"inputs", m.inputs}, {"dut_value", m.dut_value}, {"ref_value", m.ref_value}});
  j["duration_s"] = duration_s;
  j["note"] = note;
  return j;
}

ValidationReport report_from_json(const json& j) {
  try {
    ValidationReport r;
    r.module_name = j.at("module_name").get<std::string>();
    const auto stage = j.at("stage").get<std::string>();
    if (stage != "syntax" && stage != "functional") throw SchemaError("bad stage \"" + stage + "\"");
    r.stage = stage == "syntax" ? Stage::Syntax : Stage::Functional;
    r.passed = j.at("passed").get<bool>();
    r.log_excerpt = j.at("log_excerpt").get<std::string>();
    for (const auto& m : j.at("mismatches"))
      r.mismatches.push_back({m.at("time_ns").get<double>(), m.at("inputs").get<std::string>(),
                              m.at("dut_value").get<std::string>(), m.at("ref_value").get<std::string>()});
    r.duration_s = j.at("duration_s").get<double>();
    r.note = j.value("note", std::string{});
    return r;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed validation report: ") + e.what());
  }
}

std::string tail_truncate(const std::string& log, std::size_t limit) {
  return log.size() <= limit ? log : log.substr(log.size() - limit);
}

SimLogParse parse_sim_log_detailed(const std::string& log, const std::string& pattern) {
  const std::regex re(pattern);
  SimLogParse out;
  std::istringstream in(log);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find("MISMATCH") == std::string::npos) continue;
    std::smatch m;
    if (!std::regex_search(line, m, re) || m.size() < 5) {
      ++out.skipped;
      continue;
    }
    MismatchRecord r{std::stod(m[1].str()), m[2].str(), m[3].str(), m[4].str()};
    if (r.dut_value == r.ref_value) {
      ++out.skipped;
      continue;
    }
    out.records.push_back(std::move(r));
  }
  return out;
}

std::vector<MismatchRecord> parse_sim_log(const std::string& log, const std::string& pattern) {
  return parse_sim_log_detailed(log, pattern).records;
}

Verdict scan_verdict(const std::string& log) {
  Verdict v;
  std::istringstream in(log);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find("No mismatches") != std::string::npos) v.has_pass = true;
    if (line.find("Has mismatches") != std::string::npos) v.has_fail = true;
  }
  return v;
}

process::Result Toolchain::compile(const std::string& module, const std::vector<fs::path>& sources,
                                   const std::vector<fs::path>& include_dirs, const fs::path& out_bin) {
  {
    std::lock_guard lock(mutex_);
    Invocation inv{Stage::Syntax, module, {}};
    for (const auto& s : sources) inv.sources.push_back(s.filename().string());
    invocations_.push_back(std::move(inv));
  }
  return do_compile(module, sources, include_dirs, out_bin);
}

process::Result Toolchain::run(const std::string& module, const fs::path& bin) {
  {
    std::lock_guard lock(mutex_);
    invocations_.push_back({Stage::Functional, module, {}});
  }
  return do_run(module, bin);
}

std::vector<Invocation> Toolchain::invocations() const {
  std::lock_guard lock(mutex_);
  return invocations_;
}

namespace {

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) s.replace(pos, from.size(), to);
  return s;
}

std::string instantiate(std::string tmpl, const std::map<std::string, std::string>& values) {
  for (const auto& [k, v] : values) tmpl = replace_all(tmpl, "{" + k + "}", v);
  return tmpl;
}

void check_tool_found(const process::Result& r, const std::string& command) {
  if (r.exit_code == 127 && (r.output.find("not found") != std::string::npos ||
                             r.output.find("No such file") != std::string::npos))
    throw ToolchainNotFoundError("toolchain command not found: " + command + "\n" + r.output);
}

}  // namespace

CommandToolchain::CommandToolchain(ToolchainConfig cfg) : Toolchain(std::move(cfg)) { config().validate(); }

process::Result CommandToolchain::do_compile(const std::string& module, const std::vector<fs::path>& sources,
                                             const std::vector<fs::path>& include_dirs, const fs::path& out_bin) {
  std::string srcs, incs;
  for (const auto& s : sources) srcs += (srcs.empty() ? "" : " ") + process::shell_quote(s.string());
  for (const auto& d : include_dirs) incs += (incs.empty() ? "" : " ") + process::shell_quote("-I" + d.string());
  const auto cmd = instantiate(config().compile_cmd_template, {{"sources", srcs},
                                                               {"include_dirs", incs},
                                                               {"out_bin", process::shell_quote(out_bin.string())},
                                                               {"testbench", process::shell_quote(config().testbench_dir)},
                                                               {"module", module}});
  auto r = process::run_shell(cmd, config().workdir, std::chrono::duration<double>(config().timeout_s));
  check_tool_found(r, cmd);
  return r;
}

process::Result CommandToolchain::do_run(const std::string& module, const fs::path& bin) {
  const auto cmd = instantiate(config().run_cmd_template, {{"bin", process::shell_quote(bin.string())},
                                                           {"testbench", process::shell_quote(config().testbench_dir)},
                                                           {"module", module}});
  auto r = process::run_shell(cmd, config().workdir, std::chrono::duration<double>(config().timeout_s));
  check_tool_found(r, cmd);
  return r;
}

namespace {

std::map<std::string, std::vector<StubToolchain::Step>> parse_steps(const json& table, const char* section) {
  std::map<std::string, std::vector<StubToolchain::Step>> out;
  if (table.is_null()) return out;
  if (!table.is_object()) throw ConfigError(std::string("stub script \"") + section + "\" must be an object");
  for (const auto& [module, steps] : table.items()) {
    if (!steps.is_array()) throw ConfigError(std::string("stub script ") + section + "/" + module + " must be an array");
    auto& dst = out[module];
    for (const auto& s : steps) {
      dst.push_back({s.value("exit", 0), s.value("log", std::string{}), s.value("timeout", false)});
    }
  }
  return out;
}

}  // namespace

StubToolchain::StubToolchain(ToolchainConfig cfg, const json& script) : Toolchain(std::move(cfg)) {
  if (!script.is_object()) throw ConfigError("stub toolchain script must be a JSON object");
  compile_ = parse_steps(script.value("compile", json()), "compile");
  run_ = parse_steps(script.value("run", json()), "run");
}

std::unique_ptr<StubToolchain> StubToolchain::from_steps(std::map<std::string, std::vector<Step>> compile,
                                                         std::map<std::string, std::vector<Step>> run,
                                                         ToolchainConfig cfg) {
  cfg.kind = ToolchainKind::Stub;
  std::unique_ptr<StubToolchain> tc(new StubToolchain(std::move(cfg)));
  tc->compile_ = std::move(compile);
  tc->run_ = std::move(run);
  return tc;
}

process::Result StubToolchain::next(std::map<std::string, std::vector<Step>>& table,
                                    std::map<std::string, std::size_t>& cursor, const std::string& module,
                                    const Step& fallback) {
  std::lock_guard lock(step_mutex_);
  const std::vector<Step>* steps = nullptr;
  std::string key = module;
  if (auto it = table.find(module); it != table.end() && !it->second.empty()) {
    steps = &it->second;
  } else if (auto star = table.find("*"); star != table.end() && !star->second.empty()) {
    steps = &star->second;
    key = "*:" + module;
  }
  Step step = fallback;
  if (steps) {
    auto& pos = cursor[key];
    step = (*steps)[std::min(pos, steps->size() - 1)];
    ++pos;
  }
  process::Result r;
  r.timed_out = step.timeout;
  r.exit_code = step.timeout ? -1 : step.exit_code;
  r.output = step.log;
  return r;
}

process::Result StubToolchain::do_compile(const std::string& module, const std::vector<fs::path>&,
                                          const std::vector<fs::path>&, const fs::path&) {
  return next(compile_, compile_cursor_, module, Step{0, "", false});
}

process::Result StubToolchain::do_run(const std::string& module, const fs::path&) {
  return next(run_, run_cursor_, module, Step{0, "No mismatches found\n", false});
}

std::unique_ptr<Toolchain> make_toolchain(const ToolchainConfig& cfg) {
  cfg.validate();
  if (cfg.kind == ToolchainKind::Command) return std::make_unique<CommandToolchain>(cfg);
  if (cfg.stub_script.empty()) return StubToolchain::from_steps({}, {}, cfg);
  std::ifstream in(cfg.stub_script);
  if (!in) throw ConfigError("cannot read stub toolchain script " + cfg.stub_script);
  json script;
  try {
    script = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("stub toolchain script is not valid JSON: ") + e.what());
  }
  return std::make_unique<StubToolchain>(cfg, script);
}

fs::path binary_path(const ToolchainConfig& cfg, const std::string& module) {
  return cfg.workdir / "bin" / (module + "_tb");
}

ValidationReport compile_model(const ReferenceModel& model, const std::vector<ReferenceModel>& deps, Toolchain& tc) {
  const auto& cfg = tc.config();
  std::vector<fs::path> sources, includes;
  auto stage_sources = [&](const ReferenceModel& m) {
    const fs::path dir = cfg.workdir / "src" / m.module_name;
    generator::write_sources(m, dir);
    includes.push_back(dir);
    for (const auto& u : m.units)
      if (u.kind == generator::UnitKind::Implementation) sources.push_back(dir / u.file_name);
  };
  for (const auto& d : deps) stage_sources(d);
  stage_sources(model);
  const fs::path bin = binary_path(cfg, model.module_name);
  fs::create_directories(bin.parent_path());

  const auto r = tc.compile(model.module_name, sources, includes, bin);
  ValidationReport report;
  report.module_name = model.module_name;
  report.stage = Stage::Syntax;
  report.log_excerpt = tail_truncate(r.output);
  report.duration_s = r.duration_s;
  if (r.timed_out) {
    report.note = "compile timed out after " + std::to_string(cfg.timeout_s) + " s";
  } else {
    report.passed = r.exit_code == 0;
    if (!report.passed) report.note = "compiler exited with code " + std::to_string(r.exit_code);
  }
  return report;
}

ValidationReport run_testbench(const std::string& module, const fs::path& binary, Toolchain& tc) {
  const auto& cfg = tc.config();
  if (cfg.kind == ToolchainKind::Command && !fs::exists(binary))
    throw Error("testbench binary " + binary.string() + " does not exist");
  const auto r = tc.run(module, binary);
  ValidationReport report;
  report.module_name = module;
  report.stage = Stage::Functional;
  report.log_excerpt = tail_truncate(r.output);
  report.duration_s = r.duration_s;
  if (r.timed_out) {
    report.note = "testbench timed out after " + std::to_string(cfg.timeout_s) + " s";
    return report;
  }
  const auto verdict = scan_verdict(r.output);
  const auto parsed = parse_sim_log_detailed(r.output, cfg.mismatch_regex);
  if (verdict.passed() && parsed.records.empty()) {
    report.passed = true;
    return report;
  }
  report.mismatches = parsed.records;
  if (!verdict.has_pass && !verdict.has_fail) report.note = "no verdict line";
  else if (verdict.passed()) report.note = "mismatch records despite a passing verdict";
  else report.note = std::to_string(parsed.records.size()) + " mismatch record(s)";
  if (parsed.skipped) report.note += "; " + std::to_string(parsed.skipped) + " malformed MISMATCH line(s) skipped";
  return report;
}

ValidationResult incremental_validate(const planning::TaskSequence& plan, const std::map<std::string, ReferenceModel>& models,
                                      Toolchain& tc, DebugHandle* debugger, const IncrementalOptions& options) {
  for (const auto& t : plan.tasks)
    if (!models.count(t)) throw Error("no reference model for plan task " + t);

  ValidationResult result;
  std::vector<ReferenceModel> validated;
  auto emit = [&](const ValidationReport& r) {
    result.reports[r.module_name].push_back(r);
    if (options.on_report) options.on_report(r);
  };

  for (const auto& task : plan.tasks) {
    ReferenceModel model = models.at(task);
    std::vector<ValidationReport> reports;
    auto syntax = compile_model(model, validated, tc);
    reports.push_back(syntax);
    if (syntax.passed) reports.push_back(run_testbench(task, binary_path(tc.config(), task), tc));

    if (!reports.back().passed) {
      if (!debugger) {
        for (const auto& r : reports) emit(r);
        throw ValidationAbortError(task, "validation of " + task + " failed and no debugger is configured");
      }
      auto repaired = debugger->repair(model, validated, reports, tc);
      reports = repaired.reports;
      if (!repaired.fixed) {
        for (const auto& r : reports) emit(r);
        throw ValidationAbortError(task, "debugger could not fix " + task + " within " +
                                             std::to_string(repaired.iterations) + " iteration(s)");
      }
      model = std::move(repaired.model);
      if (options.on_patched) options.on_patched(model);
    }
    for (const auto& r : reports) emit(r);
    result.models[task] = model;
    validated.push_back(std::move(model));
  }
  return result;
}

}  // namespace forge::verification

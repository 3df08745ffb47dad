#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/generator.hpp"
#include "forge/planning.hpp"
#include "forge/process.hpp"

namespace forge::verification {

using generator::ReferenceModel;

inline constexpr const char* kDefaultMismatchRegex = R"(MISMATCH time=(\d+)ns in=(\S*) dut=(\S+) ref=(\S+))";
inline constexpr std::size_t kLogExcerptLimit = 32 * 1024;

enum class Stage { Syntax, Functional };
std::string to_string(Stage s);

enum class ToolchainKind { Command, Stub };

struct ToolchainConfig {
  ToolchainKind kind = ToolchainKind::Command;
  std::string compile_cmd_template;  // {sources} {out_bin} {include_dirs}; optional {testbench} {module}
  std::string run_cmd_template;      // {bin}; optional {testbench} {module}
  double timeout_s = 120;
  std::filesystem::path workdir;
  std::string testbench_dir;
  std::string mismatch_regex = kDefaultMismatchRegex;
  std::string stub_script;  // stub kind: JSON replay script

  /// Throws ConfigError when a template lacks a required placeholder.
  void validate() const;
};

struct MismatchRecord {
  double time_ns = 0;
  std::string inputs;
  std::string dut_value;
  std::string ref_value;

  bool operator==(const MismatchRecord&) const = default;
};

struct ValidationReport {
  std::string module_name;
  Stage stage = Stage::Syntax;
  bool passed = false;
  std::string log_excerpt;
  std::vector<MismatchRecord> mismatches;
  double duration_s = 0;
  std::string note;

  nlohmann::ordered_json to_json() const;
};

ValidationReport report_from_json(const nlohmann::json& j);

/// Keeps the last kLogExcerptLimit bytes.
std::string tail_truncate(const std::string& log, std::size_t limit = kLogExcerptLimit);

struct SimLogParse {
  std::vector<MismatchRecord> records;
  std::size_t skipped = 0;  // MISMATCH lines that did not parse, or dut == ref
};

SimLogParse parse_sim_log_detailed(const std::string& log, const std::string& pattern = kDefaultMismatchRegex);
std::vector<MismatchRecord> parse_sim_log(const std::string& log, const std::string& pattern = kDefaultMismatchRegex);

struct Verdict {
  bool has_pass = false;  // a line containing "No mismatches"
  bool has_fail = false;  // a line containing "Has mismatches"
  bool passed() const { return has_pass && !has_fail; }
};

Verdict scan_verdict(const std::string& log);

/// One toolchain invocation, recorded for ordering audits.
struct Invocation {
  Stage stage;
  std::string module;
  std::vector<std::string> sources;
};

/// Executes compile and run steps. Command toolchains shell out with the
/// configured templates; stub toolchains replay a script.
class Toolchain {
public:
  explicit Toolchain(ToolchainConfig cfg) : cfg_(std::move(cfg)) {}
  virtual ~Toolchain() = default;

  const ToolchainConfig& config() const noexcept { return cfg_; }

  process::Result compile(const std::string& module, const std::vector<std::filesystem::path>& sources,
                          const std::vector<std::filesystem::path>& include_dirs,
                          const std::filesystem::path& out_bin);
  process::Result run(const std::string& module, const std::filesystem::path& bin);

  std::vector<Invocation> invocations() const;

protected:
  virtual process::Result do_compile(const std::string& module, const std::vector<std::filesystem::path>& sources,
                                     const std::vector<std::filesystem::path>& include_dirs,
                                     const std::filesystem::path& out_bin) = 0;
  virtual process::Result do_run(const std::string& module, const std::filesystem::path& bin) = 0;

private:
  ToolchainConfig cfg_;
  mutable std::mutex mutex_;
  std::vector<Invocation> invocations_;
};

class CommandToolchain final : public Toolchain {
public:
  explicit CommandToolchain(ToolchainConfig cfg);

protected:
  process::Result do_compile(const std::string& module, const std::vector<std::filesystem::path>& sources,
                             const std::vector<std::filesystem::path>& include_dirs,
                             const std::filesystem::path& out_bin) override;
  process::Result do_run(const std::string& module, const std::filesystem::path& bin) override;
};

/// Stub script: {"compile": {"<Module>"|"*": [step...]}, "run": {...}} with
/// step = {"exit": int, "log": text, "timeout": bool}. Each module's steps
/// are consumed in order and the last one repeats. Without a step, compile
/// succeeds silently and run prints "No mismatches found".
class StubToolchain final : public Toolchain {
public:
  struct Step {
    int exit_code = 0;
    std::string log;
    bool timeout = false;
  };

  StubToolchain(ToolchainConfig cfg, const nlohmann::json& script);
  static std::unique_ptr<StubToolchain> from_steps(std::map<std::string, std::vector<Step>> compile,
                                                   std::map<std::string, std::vector<Step>> run,
                                                   ToolchainConfig cfg = {});

protected:
  process::Result do_compile(const std::string& module, const std::vector<std::filesystem::path>& sources,
                             const std::vector<std::filesystem::path>& include_dirs,
                             const std::filesystem::path& out_bin) override;
  process::Result do_run(const std::string& module, const std::filesystem::path& bin) override;

private:
  StubToolchain(ToolchainConfig cfg) : Toolchain(std::move(cfg)) {}
  process::Result next(std::map<std::string, std::vector<Step>>& table, std::map<std::string, std::size_t>& cursor,
                       const std::string& module, const Step& fallback);

  std::mutex step_mutex_;
  std::map<std::string, std::vector<Step>> compile_, run_;
  std::map<std::string, std::size_t> compile_cursor_, run_cursor_;
};

/// Builds the toolchain named by cfg.kind (reads the stub script file).
std::unique_ptr<Toolchain> make_toolchain(const ToolchainConfig& cfg);

std::filesystem::path binary_path(const ToolchainConfig& cfg, const std::string& module);

/// Writes model and dependency sources under the workdir and compiles them.
/// A hung tool yields a failed report noting the timeout.
ValidationReport compile_model(const ReferenceModel& model, const std::vector<ReferenceModel>& deps, Toolchain& tc);

/// Runs the testbench binary and judges its log.
ValidationReport run_testbench(const std::string& module, const std::filesystem::path& binary, Toolchain& tc);

struct RepairResult {
  bool fixed = false;
  ReferenceModel model;
  std::vector<ValidationReport> reports;  // last syntax (+ functional) report
  int iterations = 0;
};

/// Repairs a model that failed validation. Implemented by the debugger.
class DebugHandle {
public:
  virtual ~DebugHandle() = default;
  virtual RepairResult repair(const ReferenceModel& model, const std::vector<ReferenceModel>& deps,
                              const std::vector<ValidationReport>& failed_reports, Toolchain& tc) = 0;
};

struct ValidationResult {
  std::map<std::string, std::vector<ValidationReport>> reports;
  std::map<std::string, ReferenceModel> models;  // final (possibly patched) models
};

struct IncrementalOptions {
  std::function<void(const ValidationReport&)> on_report;
  std::function<void(const ReferenceModel&)> on_patched;
};

/// Validates modules in plan order. Each compile includes every model
/// validated before it. Throws ValidationAbortError naming the first module
/// the debugger could not fix.
ValidationResult incremental_validate(const planning::TaskSequence& plan,
                                      const std::map<std::string, ReferenceModel>& models, Toolchain& tc,
                                      DebugHandle* debugger, const IncrementalOptions& options = {});

}  // namespace forge::verification

#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "forge/config.hpp"
#include "forge/evaluation.hpp"
#include "forge/llm_backend.hpp"

namespace forge::pipeline {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitStandardize = 2;
inline constexpr int kExitPlan = 3;
inline constexpr int kExitGenerate = 4;
inline constexpr int kExitValidationAbort = 5;
inline constexpr int kExitConfig = 6;
inline constexpr int kExitCorruptArtifact = 7;

enum class Stage { Standardize, Plan, Generate, Verify };
std::string to_string(Stage s);

struct RunOutcome {
  int exit_code = kExitOk;
  std::string message;
  std::vector<Stage> executed;
  std::optional<std::string> abort_module;
  bool generation_complete = false;
  bool syntax_pass = false;      // every attempted module's final compile passed
  bool functional_pass = false;  // the top module passed its testbench
};

struct PipelineOptions {
  /// Used instead of building one from the config.
  std::shared_ptr<llm::Backend> backend;
  /// Progress lines, one per stage.
  std::ostream* progress = nullptr;
};

/// Runs stages first..last. Earlier stages are loaded from the artifacts in
/// cfg.out_dir. Never throws for stage failures; they map to exit codes.
RunOutcome run_stages(const config::RunConfig& cfg, Stage first, Stage last, const PipelineOptions& options = {});

/// standardize through verify.
RunOutcome run_pipeline(const config::RunConfig& cfg, const PipelineOptions& options = {});

/// The first stage whose artifacts are absent, or nullopt for a finished run.
/// Throws CorruptArtifactError when an artifact exists but does not parse.
std::optional<Stage> first_incomplete_stage(const std::filesystem::path& out_dir);

/// Re-enters a prior run at its first incomplete stage, using the config it
/// recorded.
RunOutcome resume(const std::filesystem::path& out_dir, const PipelineOptions& options = {});

/// One pipeline run per trial under <eval_out>/<case>/trial_<i>, with the
/// case's spec and testbench.
evaluation::TrialRunner make_trial_runner(const config::RunConfig& base, const std::filesystem::path& eval_out);

/// FNV-1a 64-bit, as 16 hex digits.
std::string fnv1a_hex(const std::string& data);

}  // namespace forge::pipeline

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace forge::evaluation {

struct BenchmarkCase {
  std::string name;
  std::filesystem::path spec_path;
  std::filesystem::path testbench_path;
  std::optional<std::filesystem::path> golden_path;
  std::int64_t code_lines = 0;
  std::int64_t submodule_count = 1;
};

enum class ScaleClass { Small, Medium, Large };
std::string to_string(ScaleClass s);

/// small: < 100 lines. medium: one module with 100..400 lines, or several
/// modules with < 300 lines. large: everything else.
ScaleClass classify_scale(std::int64_t code_lines, std::int64_t submodule_count);

/// 1 - C(n-c, k) / C(n, k) as a running product.
double pass_at_k(int n, int c, int k);

double average_pass_at_k(const std::vector<double>& per_case);

struct TrialOutcome {
  bool syntax_pass = false;
  bool functional_pass = false;
  std::string note;
};

struct TrialRecord {
  std::string case_name;
  int trial_index = 0;
  bool syntax_pass = false;
  bool functional_pass = false;
  double wall_s = 0;
  std::string note;
};

using TrialRunner = std::function<TrialOutcome(const BenchmarkCase&, int trial_index)>;

struct CaseSummary {
  std::string name;
  ScaleClass scale = ScaleClass::Small;
  int trials = 0;
  int syntax_passes = 0;
  int functional_passes = 0;
  std::map<int, double> pass_at_k;  // over functional passes
};

struct BenchmarkSummary {
  double sp = 0;  // fraction of trials passing syntax
  double fp = 0;  // fraction of trials passing function
  std::vector<CaseSummary> cases;
  std::map<int, double> average_pass_at_k;
  std::map<ScaleClass, std::map<int, double>> average_pass_at_k_by_scale;
};

struct BenchmarkResult {
  std::vector<TrialRecord> records;  // ordered by case, then trial
  BenchmarkSummary summary;

  nlohmann::ordered_json to_json() const;
  std::string to_csv() const;
};

struct BenchmarkOptions {
  int trials_per_case = 5;
  std::vector<int> ks;  // empty: 1..trials_per_case
  unsigned workers = 1;
};

/// Runs every trial through `runner` on a worker pool. A throwing runner
/// counts as a failed trial.
BenchmarkResult run_benchmark(const std::vector<BenchmarkCase>& cases, const BenchmarkOptions& options,
                              const TrialRunner& runner);

/// Aggregates finished records; `cases` fixes the order of the summary.
BenchmarkSummary summarize(const std::vector<BenchmarkCase>& cases, const std::vector<TrialRecord>& records,
                           const std::vector<int>& ks);

/// <dir>/<case>/{spec.md, testbench/, meta.json}, cases sorted by name.
/// meta.json: {"code_lines": N, "submodule_count": M, "golden": "relative path"?}
std::vector<BenchmarkCase> load_benchmark_dir(const std::filesystem::path& dir);

}  // namespace forge::evaluation

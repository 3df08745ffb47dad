#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/design_ir.hpp"
#include "forge/llm_backend.hpp"
#include "forge/verification.hpp"

namespace forge::debugger {

using generator::ReferenceModel;
using verification::Stage;
using verification::ValidationReport;

inline constexpr int kDefaultThreshold = 6;
inline constexpr std::size_t kDefaultRetrieveK = 3;
inline constexpr std::size_t kDefaultMaxWindows = 3;
inline constexpr double kWindowHalfWidthNs = 100;

struct KnowledgeEntry {
  std::string id;
  std::string symptom;
  std::string explanation;
  std::string fix_hint;
  std::vector<std::string> tags;

  bool operator==(const KnowledgeEntry&) const = default;
};

using KnowledgeBase = std::vector<KnowledgeEntry>;

KnowledgeBase parse_knowledge_base(const nlohmann::json& j);
/// JSON array of entries. Throws ConfigError when unreadable or malformed.
KnowledgeBase load_knowledge_base(const std::filesystem::path& path);

/// Lowercased [a-z0-9_]+ runs.
std::vector<std::string> tokenize(const std::string& text);

/// Top-k entries by TF-IDF cosine between the query and symptom +
/// explanation. Entries sharing no term with the query are dropped; ties go
/// to the lower id.
std::vector<KnowledgeEntry> retrieve_knowledge(const std::string& query, const KnowledgeBase& kb,
                                               std::size_t k = kDefaultRetrieveK);

struct LogWindow {
  double center_ns = 0;
  double start_ns = 0;
  double end_ns = 0;
  std::vector<std::string> lines;

  bool operator==(const LogWindow&) const = default;
};

/// The number in a "time=<t>ns" stamp, if the line carries one.
std::optional<double> line_timestamp(const std::string& line);

/// One window per mismatch, [max(0, t-100), t+100], holding the stamped
/// lines inside it. Windows are never merged.
std::vector<LogWindow> extract_log_windows(const std::string& log,
                                           const std::vector<verification::MismatchRecord>& mismatches);

struct FixRecord {
  Stage stage = Stage::Syntax;
  std::vector<std::string> retrieved_entry_ids;
  std::string diff_summary;
};

struct FixResult {
  ReferenceModel model;
  FixRecord record;
};

/// Replaces the units named in the compiler log (all units when none is
/// named) with the backend's corrected versions.
FixResult fix_syntax(const ReferenceModel& model, const ValidationReport& report, const KnowledgeBase& kb,
                     llm::ChatSession& session, std::size_t k = kDefaultRetrieveK);

/// Sends up to `max_windows` log windows with the IR. Throws
/// NoMismatchDataError when the report carries no mismatches.
FixResult fix_functional(const ReferenceModel& model, const ValidationReport& report, const ir::ModuleIR& ir,
                         const KnowledgeBase& kb, llm::ChatSession& session, std::size_t max_windows = kDefaultMaxWindows,
                         std::size_t k = kDefaultRetrieveK);

struct DebugOutcome {
  bool fixed = false;
  int iterations_used = 0;
  ReferenceModel patched_model;
  std::vector<FixRecord> history;
  std::vector<ValidationReport> reports;  // from the last validation
};

struct DebugOptions {
  int threshold = kDefaultThreshold;
  std::size_t retrieve_k = kDefaultRetrieveK;
  std::size_t max_windows = kDefaultMaxWindows;
  /// Reports already produced for the first iteration; skips revalidating.
  std::vector<ValidationReport> initial_reports;
  /// Called after each validation and each fix, before any error propagates.
  std::function<void(const DebugOutcome&)> on_progress;
};

/// Revalidate, then fix the failing stage, until both stages pass or the
/// threshold of iterations is spent.
DebugOutcome debug_loop(const ReferenceModel& model, const std::vector<ReferenceModel>& deps,
                        verification::Toolchain& tc, const ir::ModuleIR& ir, const KnowledgeBase& kb,
                        const std::shared_ptr<llm::Backend>& backend, const DebugOptions& options = {});

/// Debugger used by incremental validation.
class Debugger final : public verification::DebugHandle {
public:
  Debugger(std::shared_ptr<llm::Backend> backend, std::map<std::string, ir::ModuleIR> irs, KnowledgeBase kb,
           int threshold = kDefaultThreshold);

  verification::RepairResult repair(const ReferenceModel& model, const std::vector<ReferenceModel>& deps,
                                    const std::vector<ValidationReport>& failed_reports,
                                    verification::Toolchain& tc) override;

  const std::map<std::string, DebugOutcome>& outcomes() const noexcept { return outcomes_; }

private:
  std::shared_ptr<llm::Backend> backend_;
  std::map<std::string, ir::ModuleIR> irs_;
  KnowledgeBase kb_;
  int threshold_;
  std::map<std::string, DebugOutcome> outcomes_;
};

}  // namespace forge::debugger

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/design_ir.hpp"
#include "forge/error.hpp"
#include "forge/llm_backend.hpp"

namespace forge::generator {

/// Modules at or under both limits are generated as one block without
/// asking the backend.
inline constexpr std::uint32_t kSingleBlockMaxLines = 500;
inline constexpr std::size_t kSingleBlockMaxPoints = 4;

struct FunctionalBlock {
  std::string block_id;
  std::vector<std::string> member_points;
  std::string summary;

  bool operator==(const FunctionalBlock&) const = default;
};

struct InteractionNote {
  std::string child_instance;
  std::string child_port;
  std::string parent_logic;

  bool operator==(const InteractionNote&) const = default;
};

struct InteractionNotes {
  std::vector<InteractionNote> entries;
};

enum class UnitKind { Header, Implementation };

struct SourceUnit {
  std::string file_name;
  std::string content;
  UnitKind kind = UnitKind::Implementation;

  bool operator==(const SourceUnit&) const = default;
};

struct CompletenessResult {
  bool passed = true;
  std::vector<std::string> missing_ports;
  std::vector<std::string> missing_functions;
  std::string notes;

  nlohmann::ordered_json to_json() const;
  bool operator==(const CompletenessResult&) const = default;
};

struct ReferenceModel {
  std::string module_name;
  std::vector<SourceUnit> units;
  std::map<std::string, std::string> pseudocode;  // block_id -> text
  std::vector<FunctionalBlock> blocks;
  int attempts = 0;

  const SourceUnit& header() const;
  const SourceUnit* find_unit(const std::string& file_name) const;
  bool operator==(const ReferenceModel&) const = default;
};

class GenerationExhaustedError : public Error {
public:
  GenerationExhaustedError(std::string module, CompletenessResult last, const std::string& message)
      : Error(message), module_(std::move(module)), last_(std::move(last)) {}
  const std::string& module() const noexcept { return module_; }
  const CompletenessResult& last_result() const noexcept { return last_; }

private:
  std::string module_;
  CompletenessResult last_;
};

std::string header_file_name(const std::string& module);
std::string implementation_file_name(const std::string& module);
/// "// ---- block: <block_id> ----"
std::string block_banner(const std::string& block_id);

/// Throws PartitionError unless `blocks` is an exact cover of the IR's
/// functional points.
void check_partition(const ir::ModuleIR& ir, const std::vector<FunctionalBlock>& blocks);

std::vector<FunctionalBlock> partition_functional_blocks(const ir::ModuleIR& ir, llm::ChatSession& session);

/// One note per kind=inter edge into one of this module's children. Leaf
/// modules and modules without inter edges never reach the backend.
InteractionNotes analyze_parent_interactions(const ir::ModuleIR& ir, const std::vector<ir::ConnectionEdge>& edges,
                                             llm::ChatSession& session);

SourceUnit gen_header(const ir::ModuleIR& ir, const std::vector<FunctionalBlock>& blocks,
                      const InteractionNotes& notes, const std::optional<CompletenessResult>& feedback,
                      llm::ChatSession& session);

struct BlockImpl {
  std::string pseudocode;
  std::string code;
};

/// Pseudocode round, then implementation round, on the header's session.
BlockImpl gen_block_impl(const ir::ModuleIR& ir, const FunctionalBlock& block, const SourceUnit& header,
                         const InteractionNotes& notes, const std::optional<CompletenessResult>& feedback,
                         llm::ChatSession& session);

/// Lexical pass only: ports must occur in the header text, every signal of
/// a functional point must occur in the implementations.
CompletenessResult lexical_completeness(const SourceUnit& header, const std::vector<std::string>& impls,
                                        const ir::ModuleIR& ir);

/// Lexical pass first; the backend judges only lexically complete models.
CompletenessResult completeness_check(const SourceUnit& header, const std::vector<std::string>& impls,
                                      const ir::ModuleIR& ir, const std::vector<ir::ConnectionEdge>& edges,
                                      llm::ChatSession& session);

/// Partition, interaction analysis, then header/blocks/check until the check
/// passes or `max_attempts` runs out (GenerationExhaustedError).
ReferenceModel amg_generate(const ir::ModuleIR& ir, const std::vector<ir::ConnectionEdge>& edges,
                            const std::shared_ptr<llm::Backend>& backend, int max_attempts = 3);

/// {module, attempts, blocks, pseudocode}
nlohmann::ordered_json trace_json(const ReferenceModel& model);

/// Writes <dir>/<M>.h and <dir>/<M>.cpp.
void write_sources(const ReferenceModel& model, const std::filesystem::path& dir);
/// Reads the two source files back; throws CorruptArtifactError when absent.
ReferenceModel read_sources(const std::string& module, const std::filesystem::path& dir);

}  // namespace forge::generator

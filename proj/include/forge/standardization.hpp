#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/design_ir.hpp"
#include "forge/error.hpp"
#include "forge/llm_backend.hpp"

namespace forge::standardization {

struct SpecDocument {
  std::string design_name;
  std::string body;
  std::map<std::string, std::string> hints;  // "top", "estimated_lines.<Module>"

  /// hints["top"] when present, otherwise the design name.
  std::string top_module() const;
};

/// Reads a plain-text or markdown spec; design name defaults to the file stem.
/// A leading "design: <name>" / "top: <name>" line block is read as hints.
SpecDocument load_spec(const std::string& path);

enum class IssueCategory { MissingPort, WrongWidth, MissingFunction, ExtraContent, WrongChild };

std::string to_string(IssueCategory c);

struct IrIssue {
  IssueCategory category;
  std::string detail;

  bool operator==(const IrIssue&) const = default;
};

struct IrCheckResult {
  bool passed = true;
  std::vector<IrIssue> issues;

  nlohmann::ordered_json to_json() const;
};

class StandardizationError : public Error {
public:
  StandardizationError(std::string module, IrCheckResult last, const std::string& message)
      : Error(message), module_(std::move(module)), last_(std::move(last)) {}
  const std::string& module() const noexcept { return module_; }
  const IrCheckResult& last_result() const noexcept { return last_; }

private:
  std::string module_;
  IrCheckResult last_;
};

/// A port line from an ```interface [Module] fenced block in the spec.
struct InterfacePort {
  std::string name;
  ir::PortDirection direction;
  std::uint32_t width;
};

/// Ports quoted for `module`. Blocks without a module name belong to the
/// top module. Empty when the spec quotes no interface for it.
std::vector<InterfacePort> interface_ports(const SpecDocument& spec, const std::string& module);

/// Line count stated for `module` via hints or a "<Module> ... N lines" line.
std::uint32_t estimated_lines_hint(const SpecDocument& spec, const std::string& module);

/// Three-round dialogue on `session`: ports/parameters, children, functional
/// points. Throws ExtractionError when a round stays unparseable.
ir::ModuleIR generate_module_ir(const SpecDocument& spec, const std::string& target_module,
                                const std::optional<IrCheckResult>& feedback, llm::ChatSession& session);

/// Deterministic checks against the spec text (interface ports, widths,
/// child names). Never calls a backend.
IrCheckResult local_structural_check(const SpecDocument& spec, const ir::ModuleIR& ir);

/// Local checks first; the backend is asked only if they pass.
IrCheckResult check_ir_equivalence(const SpecDocument& spec, const ir::ModuleIR& ir, llm::ChatSession& session);

/// One agent-3 dialogue per parent module, top-down. Throws
/// EdgeValidationError for an edge naming an unknown instance or port.
std::vector<ir::ConnectionEdge> construct_dag(const std::map<std::string, ir::ModuleIR>& irs,
                                              const std::shared_ptr<llm::Backend>& backend);

/// Marks edges that interact with parent internal logic as kind=inter.
std::vector<ir::ConnectionEdge> refine_inter_edges(const std::vector<ir::ConnectionEdge>& edges,
                                                   const std::map<std::string, ir::ModuleIR>& irs,
                                                   const std::shared_ptr<llm::Backend>& backend);

struct StandardizeOptions {
  int max_regen = 3;
};

/// Top-down IR generation with equivalence-check regeneration, followed by
/// DAG construction and Inter refinement. Returns a validated graph.
ir::DesignArchitectureGraph standardize(const SpecDocument& spec, const std::shared_ptr<llm::Backend>& backend,
                                        const StandardizeOptions& options = {});

}  // namespace forge::standardization

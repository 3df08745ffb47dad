#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace forge::ir {

enum class PortDirection { Input, Output, Inout };
enum class Timing { Combinational, Sequential };
enum class EdgeKind { Port, Inter };

struct PortDecl {
  std::string name;
  PortDirection direction = PortDirection::Input;
  std::uint32_t width = 1;
  std::string description;

  bool operator==(const PortDecl&) const = default;
};

struct ParameterDecl {
  std::string name;
  std::variant<std::int64_t, std::string> value;
  std::string description;

  bool operator==(const ParameterDecl&) const = default;
};

struct FunctionalPoint {
  std::string id;
  std::string title;
  std::string behavior;
  Timing timing = Timing::Combinational;
  std::vector<std::string> signals;

  bool operator==(const FunctionalPoint&) const = default;
};

struct ChildRef {
  std::string instance_name;
  std::string module_name;

  bool operator==(const ChildRef&) const = default;
};

struct ModuleIR {
  std::string module_name;
  std::string description;
  std::vector<ParameterDecl> parameters;
  std::vector<PortDecl> ports;
  std::vector<ChildRef> children_modules;
  std::vector<FunctionalPoint> functional_points;
  std::uint32_t estimated_lines = 0;  // 0 = unknown

  const PortDecl* find_port(std::string_view port) const;
  const ChildRef* find_child(std::string_view instance) const;
  bool is_parent() const { return !children_modules.empty(); }

  bool operator==(const ModuleIR&) const = default;
};

struct ConnectionEdge {
  std::string parent_instance_path;  // "Conv2D" or "Top/mid_inst"
  std::string child_instance;
  EdgeKind kind = EdgeKind::Port;
  std::string parent_endpoint;
  std::string child_port;
  std::string note;

  bool operator==(const ConnectionEdge&) const = default;
};

struct DesignArchitectureGraph {
  std::string design_name;
  std::map<std::string, ModuleIR> module_irs;
  std::vector<ConnectionEdge> edges;

  bool operator==(const DesignArchitectureGraph&) const = default;
};

struct ParentChildPair {
  std::string parent;
  ChildRef child;

  bool operator==(const ParentChildPair&) const = default;
};

struct DesignTree {
  std::string root;
  std::vector<ParentChildPair> parent_child_pairs;
};

std::string to_string(PortDirection d);
std::string to_string(Timing t);
std::string to_string(EdgeKind k);

// JSON mapping. Readers reject unknown keys and report the offending
// location relative to `path`.
nlohmann::ordered_json to_json(const ModuleIR& m);
nlohmann::ordered_json to_json(const ConnectionEdge& e);
ModuleIR module_ir_from_json(const nlohmann::json& j, const std::string& path = "");
ConnectionEdge edge_from_json(const nlohmann::json& j, const std::string& path = "");

/// Parses and validates a Design IR document. Throws SchemaError for
/// malformed documents and ValidationError (or a subclass) for invariant
/// violations.
DesignArchitectureGraph parse_design_ir(std::string_view text);

/// Canonical pretty-printed document; parse_design_ir(serialize(g)) == g.
std::string serialize_design_ir(const DesignArchitectureGraph& dag);

/// Checks every graph invariant. Throws ValidationError, CycleError,
/// MultiRootError or EmptyDesignError.
void validate_design(const DesignArchitectureGraph& dag);

/// Checks the per-module invariants only (used on freshly generated IRs).
void validate_module(const ModuleIR& m, const std::string& path = "");

/// One pair per ChildRef of every module; root set via identify_root.
/// Throws CycleError or MultiRootError.
DesignTree extract_parent_child_pairs(const DesignArchitectureGraph& dag);

/// The unique module never appearing in a child position.
std::string identify_root(const std::vector<ParentChildPair>& pairs,
                          const std::set<std::string>& modules);

/// Module type at a slash-separated instance path, or nullopt.
std::optional<std::string> resolve_instance_path(const DesignArchitectureGraph& dag,
                                                 std::string_view path);

/// Every instance path (from the root) at which `module` is instantiated,
/// in depth-first child order. The root's own path is its module name.
std::vector<std::string> instance_paths_of(const DesignArchitectureGraph& dag,
                                           const std::string& root,
                                           const std::string& module);

/// Edges whose parent instance resolves to `module`.
std::vector<ConnectionEdge> edges_for_parent(const DesignArchitectureGraph& dag,
                                             const std::string& module);

}  // namespace forge::ir

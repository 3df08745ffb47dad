#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/design_ir.hpp"

namespace forge::planning {

struct TaskSequence {
  std::vector<std::string> tasks;  // children strictly before parents; root last
  std::map<std::string, std::vector<std::string>> provenance;  // task -> instance paths covered

  bool operator==(const TaskSequence&) const = default;
};

/// lowercase(module_name) with trailing "_<digits>" and "[<digits>]"
/// suffixes removed, repeatedly.
std::string canonical_key(const std::string& module_name);

/// Keeps the first child of each canonical key, order preserved.
std::vector<ir::ChildRef> normalize_children(const std::vector<ir::ChildRef>& children);

/// Post-order emission from `node`. `visited` holds canonical keys; a node
/// already visited yields nothing, so repeated subtrees are bypassed.
std::vector<std::string> build_seq(const ir::DesignTree& tree, const std::string& node, std::set<std::string>& visited);

/// Tree extraction, root identification and sequence construction.
/// Propagates CycleError / MultiRootError.
TaskSequence hap_plan(const ir::DesignArchitectureGraph& dag);

nlohmann::ordered_json to_json(const TaskSequence& plan);
/// Throws SchemaError on a malformed plan document.
TaskSequence plan_from_json(const nlohmann::json& j);

}  // namespace forge::planning

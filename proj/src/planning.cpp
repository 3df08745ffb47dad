#include "forge/planning.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <unordered_set>

#include "forge/error.hpp"

namespace forge::planning {

std::string canonical_key(const std::string& module_name) {
  static const std::regex suffix(R"((_\d+|\[\d+\])$)");
  std::string key = module_name;
  std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (std::string next = std::regex_replace(key, suffix, ""); next != key && !next.empty();
       next = std::regex_replace(key, suffix, "")) {
    key = next;
  }
  return key;
}

std::vector<ir::ChildRef> normalize_children(const std::vector<ir::ChildRef>& children) {
  std::vector<ir::ChildRef> out;
  std::unordered_set<std::string> keys;
  for (const auto& c : children) {
    if (keys.insert(canonical_key(c.module_name)).second) out.push_back(c);
  }
  return out;
}

std::vector<std::string> build_seq(const ir::DesignTree& tree, const std::string& node, std::set<std::string>& visited) {
  if (!visited.insert(canonical_key(node)).second) return {};

  std::vector<ir::ChildRef> children;
  for (const auto& p : tree.parent_child_pairs)
    if (p.parent == node) children.push_back(p.child);

  std::vector<std::string> seq;
  for (const auto& c : normalize_children(children)) {
    auto sub = build_seq(tree, c.module_name, visited);
    seq.insert(seq.end(), sub.begin(), sub.end());
  }
  // Emitted once, after every child (also covers leaves).
  seq.push_back(node);
  return seq;
}

TaskSequence hap_plan(const ir::DesignArchitectureGraph& dag) {
  const ir::DesignTree tree = ir::extract_parent_child_pairs(dag);
  std::set<std::string> visited;
  TaskSequence plan;
  plan.tasks = build_seq(tree, tree.root, visited);

  std::map<std::string, std::string> task_of_key;
  for (const auto& t : plan.tasks) {
    task_of_key.emplace(canonical_key(t), t);
    plan.provenance[t];
  }
  for (const auto& [name, _] : dag.module_irs) {
    auto it = task_of_key.find(canonical_key(name));
    if (it == task_of_key.end()) continue;
    auto paths = ir::instance_paths_of(dag, tree.root, name);
    auto& dst = plan.provenance[it->second];
    dst.insert(dst.end(), paths.begin(), paths.end());
  }
  for (auto& [_, paths] : plan.provenance) std::sort(paths.begin(), paths.end());
  return plan;
}

nlohmann::ordered_json to_json(const TaskSequence& plan) {
  nlohmann::ordered_json j;
  j["tasks"] = plan.tasks;
  j["provenance"] = nlohmann::ordered_json::object();
  for (const auto& [task, paths] : plan.provenance) j["provenance"][task] = paths;
  return j;
}

TaskSequence plan_from_json(const nlohmann::json& j) {
  try {
    TaskSequence plan;
    if (!j.is_object() || j.size() != 2) throw SchemaError("plan must hold exactly tasks and provenance");
    plan.tasks = j.at("tasks").get<std::vector<std::string>>();
    plan.provenance = j.at("provenance").get<std::map<std::string, std::vector<std::string>>>();
    std::unordered_set<std::string> seen;
    for (const auto& t : plan.tasks) {
      if (!seen.insert(t).second) throw SchemaError("duplicate task \"" + t + "\"");
      if (!plan.provenance.count(t)) throw SchemaError("task \"" + t + "\" has no provenance entry");
    }
    if (plan.tasks.empty()) throw SchemaError("plan has no tasks");
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed plan: ") + e.what());
  }
}

}  // namespace forge::planning

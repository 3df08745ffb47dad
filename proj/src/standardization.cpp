#include "forge/standardization.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <functional>
#include <regex>
#include <set>
#include <sstream>

#include "forge/extraction.hpp"
#include "forge/prompts.hpp"

namespace forge::standardization {

using json = nlohmann::json;
using ir::ConnectionEdge;
using ir::ModuleIR;

std::string SpecDocument::top_module() const {
  auto it = hints.find("top");
  return it != hints.end() && !it->second.empty() ? it->second : design_name;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool mentions_word(const std::string& text, const std::string& word) {
  const auto t = lower(text);
  const auto w = lower(word);
  auto is_ident = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  for (auto pos = t.find(w); pos != std::string::npos; pos = t.find(w, pos + 1)) {
    const bool left = pos == 0 || !is_ident(t[pos - 1]);
    const bool right = pos + w.size() >= t.size() || !is_ident(t[pos + w.size()]);
    if (left && right) return true;
  }
  return false;
}

std::string feedback_text(const std::optional<IrCheckResult>& feedback) {
  if (!feedback) return "";
  return "\nYour previous IR for this module was rejected by the reviewer:\n```json\n" +
         feedback->to_json().dump(2) + "\n```\nRegenerate the IR and fix every issue listed.\n";
}

IssueCategory category_from_string(const std::string& s) {
  static const std::pair<const char*, IssueCategory> table[] = {
      {"missing_port", IssueCategory::MissingPort},         {"wrong_width", IssueCategory::WrongWidth},
      {"missing_function", IssueCategory::MissingFunction}, {"extra_content", IssueCategory::ExtraContent},
      {"wrong_child", IssueCategory::WrongChild}};
  for (const auto& [name, c] : table)
    if (s == name) return c;
  throw SchemaError("unknown issue category \"" + s + "\"");
}

std::string json_block(const nlohmann::ordered_json& j) { return j.dump(2); }

// Top-down module order starting at `root`; each module once.
std::vector<std::string> top_down_order(const std::map<std::string, ModuleIR>& irs, const std::string& root) {
  std::vector<std::string> order;
  std::set<std::string> seen;
  std::function<void(const std::string&)> walk = [&](const std::string& m) {
    if (!seen.insert(m).second) return;
    order.push_back(m);
    auto it = irs.find(m);
    if (it == irs.end()) return;
    for (const auto& c : it->second.children_modules) walk(c.module_name);
  };
  walk(root);
  return order;
}

std::string root_of(const std::map<std::string, ModuleIR>& irs) {
  std::set<std::string> modules;
  std::vector<ir::ParentChildPair> pairs;
  for (const auto& [name, m] : irs) {
    modules.insert(name);
    for (const auto& c : m.children_modules) pairs.push_back({name, c});
  }
  return ir::identify_root(pairs, modules);
}

}  // namespace

SpecDocument load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read spec file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  SpecDocument spec;
  spec.design_name = std::filesystem::path(path).stem().string();
  std::string text = ss.str();

  // Optional front matter: "---\nkey: value\n---\n".
  if (text.rfind("---\n", 0) == 0) {
    const auto end = text.find("\n---", 4);
    if (end != std::string::npos) {
      std::istringstream fm(text.substr(4, end - 4));
      std::string line;
      while (std::getline(fm, line)) {
        const auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        const auto key = trim(line.substr(0, colon));
        const auto value = trim(line.substr(colon + 1));
        if (key == "design") spec.design_name = value;
        else spec.hints[key] = value;
      }
      const auto body_start = text.find('\n', end + 1);
      text = body_start == std::string::npos ? "" : text.substr(body_start + 1);
    }
  }
  spec.body = text;
  if (trim(spec.body).empty()) throw ConfigError("spec file " + path + " is empty");
  return spec;
}

std::string to_string(IssueCategory c) {
  switch (c) {
    case IssueCategory::MissingPort: return "missing_port";
    case IssueCategory::WrongWidth: return "wrong_width";
    case IssueCategory::MissingFunction: return "missing_function";
    case IssueCategory::ExtraContent: return "extra_content";
    case IssueCategory::WrongChild: return "wrong_child";
  }
  return "extra_content";
}

nlohmann::ordered_json IrCheckResult::to_json() const {
  nlohmann::ordered_json j;
  j["passed"] = passed;
  j["issues"] = nlohmann::ordered_json::array();
  for (const auto& i : issues) j["issues"].push_back({{"category", to_string(i.category)}, {"detail", i.detail}});
  return j;
}

std::vector<InterfacePort> interface_ports(const SpecDocument& spec, const std::string& module) {
  static const std::regex port_re(
      R"(^\s*(input|output|inout)\s+(?:(?:wire|reg|logic|signed)\s+)*(?:\[\s*(\d+)\s*:\s*(\d+)\s*\]\s*)?(.*)$)");
  std::vector<InterfacePort> out;
  for (const auto& block : extract::fenced_blocks(spec.body)) {
    std::istringstream info(block.info);
    std::string tag, owner;
    info >> tag >> owner;
    if (tag != "interface") continue;
    if (owner.empty()) owner = spec.top_module();
    if (owner != module) continue;

    // "input [15:0] a,b," continues with further names on the same line.
    std::istringstream lines(block.body);
    std::string line;
    while (std::getline(lines, line)) {
      std::smatch m;
      if (!std::regex_match(line, m, port_re)) continue;
      const auto dir = m[1].str() == "input"    ? ir::PortDirection::Input
                       : m[1].str() == "output" ? ir::PortDirection::Output
                                                : ir::PortDirection::Inout;
      std::uint32_t width = 1;
      if (m[2].matched) {
        const long hi = std::stol(m[2].str()), lo = std::stol(m[3].str());
        width = static_cast<std::uint32_t>(std::labs(hi - lo) + 1);
      }
      std::string names = m[4].str();
      std::replace(names.begin(), names.end(), ';', ',');
      std::istringstream ns(names);
      std::string name;
      while (std::getline(ns, name, ',')) {
        name = trim(name);
        if (!name.empty()) out.push_back({name, dir, width});
      }
    }
  }
  return out;
}

std::uint32_t estimated_lines_hint(const SpecDocument& spec, const std::string& module) {
  if (auto it = spec.hints.find("estimated_lines." + module); it != spec.hints.end()) {
    try {
      return static_cast<std::uint32_t>(std::stoul(it->second));
    } catch (const std::exception&) {
      return 0;
    }
  }
  static const std::regex lines_re(R"((\d+)\s+lines)", std::regex::icase);
  std::istringstream in(spec.body);
  std::string line;
  while (std::getline(in, line)) {
    if (!mentions_word(line, module)) continue;
    std::smatch m;
    if (std::regex_search(line, m, lines_re)) return static_cast<std::uint32_t>(std::stoul(m[1].str()));
  }
  return 0;
}

ModuleIR generate_module_ir(const SpecDocument& spec, const std::string& target_module,
                            const std::optional<IrCheckResult>& feedback, llm::ChatSession& session) {
  const auto ports_prompt = prompts::render("agent1_ports", {{"module", target_module},
                                                             {"design", spec.design_name},
                                                             {"spec", spec.body},
                                                             {"feedback", feedback_text(feedback)}});
  ModuleIR m = extract::request_json<ModuleIR>(session, ports_prompt, [&](const json& j) {
    if (!j.is_object()) throw SchemaError("expected an object");
    json copy = j;
    copy["module_name"] = target_module;
    for (const char* k : {"children_modules", "functional_points", "estimated_lines"}) copy.erase(k);
    ModuleIR partial = ir::module_ir_from_json(copy);
    ir::validate_module(partial);
    return partial;
  });

  const auto children_prompt = prompts::render("agent1_children", {{"module", target_module}});
  m.children_modules = extract::request_json<std::vector<ir::ChildRef>>(session, children_prompt, [&](const json& j) {
    if (!j.is_object() || !j.contains("children_modules") || j.size() != 1)
      throw SchemaError("expected {\"children_modules\": [...]}");
    json probe = ir::to_json(m);
    probe["children_modules"] = j["children_modules"];
    ModuleIR trial = ir::module_ir_from_json(probe);
    ir::validate_module(trial);
    return trial.children_modules;
  });

  const auto points_prompt = prompts::render("agent1_points", {{"module", target_module}});
  m.functional_points =
      extract::request_json<std::vector<ir::FunctionalPoint>>(session, points_prompt, [&](const json& j) {
        if (!j.is_object() || !j.contains("functional_points") || j.size() != 1)
          throw SchemaError("expected {\"functional_points\": [...]}");
        json probe = ir::to_json(m);
        probe["functional_points"] = j["functional_points"];
        ModuleIR trial = ir::module_ir_from_json(probe);
        ir::validate_module(trial);
        return trial.functional_points;
      });

  m.estimated_lines = estimated_lines_hint(spec, target_module);
  return m;
}

IrCheckResult local_structural_check(const SpecDocument& spec, const ModuleIR& m) {
  IrCheckResult result;
  const auto quoted = interface_ports(spec, m.module_name);
  if (!quoted.empty()) {
    std::set<std::string> spec_names;
    for (const auto& p : quoted) {
      spec_names.insert(p.name);
      const auto* got = m.find_port(p.name);
      if (!got) {
        result.issues.push_back({IssueCategory::MissingPort, p.name});
        continue;
      }
      if (got->width != p.width)
        result.issues.push_back({IssueCategory::WrongWidth, p.name + ": specified " + std::to_string(p.width) +
                                                                " bits, IR has " + std::to_string(got->width)});
      if (got->direction != p.direction)
        result.issues.push_back({IssueCategory::MissingPort, p.name + ": specified as " + ir::to_string(p.direction) +
                                                                 ", IR has " + ir::to_string(got->direction)});
    }
    for (const auto& p : m.ports) {
      if (!spec_names.count(p.name))
        result.issues.push_back({IssueCategory::ExtraContent, "port " + p.name + " is not in the specified interface"});
    }
  }
  for (const auto& c : m.children_modules) {
    if (!mentions_word(spec.body, c.module_name))
      result.issues.push_back({IssueCategory::WrongChild, "submodule " + c.module_name + " is not in the specification"});
  }
  result.passed = result.issues.empty();
  return result;
}

IrCheckResult check_ir_equivalence(const SpecDocument& spec, const ModuleIR& m, llm::ChatSession& session) {
  IrCheckResult local = local_structural_check(spec, m);
  if (!local.passed) return local;

  const auto prompt = prompts::render(
      "agent2_check", {{"module", m.module_name}, {"ir", json_block(ir::to_json(m))}, {"spec", spec.body}});
  IrCheckResult remote = extract::request_json<IrCheckResult>(session, prompt, [](const json& j) {
    if (!j.is_object() || !j.contains("passed") || !j["passed"].is_boolean())
      throw SchemaError("expected {\"passed\": bool, \"issues\": [...]}");
    IrCheckResult r;
    r.passed = j["passed"].get<bool>();
    for (const auto& i : j.value("issues", json::array())) {
      r.issues.push_back({category_from_string(i.at("category").get<std::string>()),
                          i.value("detail", std::string{})});
    }
    return r;
  });
  remote.passed = remote.passed && remote.issues.empty();
  return remote;
}

std::vector<ConnectionEdge> construct_dag(const std::map<std::string, ModuleIR>& irs,
                                          const std::shared_ptr<llm::Backend>& backend) {
  std::vector<ConnectionEdge> edges;
  if (irs.empty()) return edges;
  const auto root = root_of(irs);
  ir::DesignArchitectureGraph probe{"probe", irs, {}};

  for (const auto& name : top_down_order(irs, root)) {
    const auto& parent = irs.at(name);
    if (!parent.is_parent()) continue;
    const auto paths = ir::instance_paths_of(probe, root, name);
    const std::string path = paths.empty() ? name : paths.front();

    std::string children;
    std::set<std::string> listed;
    for (const auto& c : parent.children_modules) {
      if (!listed.insert(c.module_name).second) continue;
      children += "```json\n" + json_block(ir::to_json(irs.at(c.module_name))) + "\n```\n";
    }
    auto session = llm::open_session(backend, llm::AgentRole::Agent3, prompts::get("agent3_system"));
    const auto prompt = prompts::render(
        "agent3_connect",
        {{"module", name}, {"path", path}, {"ir", json_block(ir::to_json(parent))}, {"children", children}});

    auto proposed = extract::request_json<std::vector<ConnectionEdge>>(session, prompt, [&](const json& j) {
      if (!j.is_array()) throw SchemaError("expected an array of connections");
      std::vector<ConnectionEdge> out;
      for (std::size_t i = 0; i < j.size(); ++i) {
        json e = j[i];
        if (!e.is_object()) throw SchemaError("connection " + std::to_string(i) + " is not an object");
        e["parent_instance_path"] = path;
        if (!e.contains("kind")) e["kind"] = "port";
        out.push_back(ir::edge_from_json(e, std::to_string(i)));
      }
      return out;
    });

    for (const auto& e : proposed) {
      const auto* child = parent.find_child(e.child_instance);
      if (!child) throw EdgeValidationError(name + ": unknown child instance \"" + e.child_instance + "\"");
      if (!irs.at(child->module_name).find_port(e.child_port))
        throw EdgeValidationError(name + ": " + child->module_name + " has no port \"" + e.child_port + "\"");
      if (e.kind == ir::EdgeKind::Port && !parent.find_port(e.parent_endpoint))
        throw EdgeValidationError(name + ": parent has no port \"" + e.parent_endpoint + "\"");
      edges.push_back(e);
    }
  }
  return edges;
}

std::vector<ConnectionEdge> refine_inter_edges(const std::vector<ConnectionEdge>& edges,
                                               const std::map<std::string, ModuleIR>& irs,
                                               const std::shared_ptr<llm::Backend>& backend) {
  std::vector<ConnectionEdge> out = edges;
  if (edges.empty()) return out;
  ir::DesignArchitectureGraph probe{"probe", irs, {}};

  // Group by parent instance path, keeping first-appearance order.
  std::vector<std::string> parents;
  for (const auto& e : edges)
    if (std::find(parents.begin(), parents.end(), e.parent_instance_path) == parents.end())
      parents.push_back(e.parent_instance_path);

  for (const auto& path : parents) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < out.size(); ++i)
      if (out[i].parent_instance_path == path && out[i].kind == ir::EdgeKind::Port) members.push_back(i);
    if (members.empty()) continue;
    const auto module = ir::resolve_instance_path(probe, path);
    if (!module) throw EdgeValidationError("unresolvable parent instance path \"" + path + "\"");

    std::string listing;
    for (std::size_t n = 0; n < members.size(); ++n) {
      const auto& e = out[members[n]];
      listing += std::to_string(n) + ". " + e.parent_endpoint + " <-> " + e.child_instance + "." + e.child_port + "\n";
    }
    auto session = llm::open_session(backend, llm::AgentRole::Agent4, prompts::get("agent4_system"));
    const auto prompt = prompts::render(
        "agent4_refine", {{"module", *module}, {"edges", listing}, {"ir", json_block(ir::to_json(irs.at(*module)))}});
    using Marks = std::vector<std::pair<std::size_t, std::string>>;
    const auto marks = extract::request_json<Marks>(session, prompt, [&](const json& j) {
      if (!j.is_array()) throw SchemaError("expected an array");
      Marks r;
      for (const auto& m : j) {
        const auto idx = m.at("index").get<std::size_t>();
        if (idx >= members.size()) throw SchemaError("index " + std::to_string(idx) + " out of range");
        r.emplace_back(idx, m.value("note", std::string{}));
      }
      return r;
    });
    for (const auto& [idx, note] : marks) {
      auto& e = out[members[idx]];
      e.kind = ir::EdgeKind::Inter;
      e.note = note;
    }
  }
  return out;
}

ir::DesignArchitectureGraph standardize(const SpecDocument& spec, const std::shared_ptr<llm::Backend>& backend,
                                        const StandardizeOptions& options) {
  if (options.max_regen < 1) throw ConfigError("max_regen must be >= 1");
  std::map<std::string, ModuleIR> irs;
  std::vector<std::string> pending{spec.top_module()};
  std::set<std::string> scheduled{spec.top_module()};

  // Depth-first, top-down: a child is generated only after its parent's IR
  // has named it.
  while (!pending.empty()) {
    const std::string name = pending.back();
    pending.pop_back();

    std::optional<IrCheckResult> feedback;
    std::optional<ModuleIR> accepted;
    for (int attempt = 0; attempt < options.max_regen && !accepted; ++attempt) {
      ModuleIR candidate;
      try {
        auto gen = llm::open_session(backend, llm::AgentRole::Agent1, prompts::get("agent1_system"));
        candidate = generate_module_ir(spec, name, feedback, gen);
      } catch (const ExtractionError& e) {
        throw StandardizationError(name, feedback.value_or(IrCheckResult{}),
                                   "IR generation for " + name + " failed: " + e.what());
      }
      auto check = llm::open_session(backend, llm::AgentRole::Agent2, prompts::get("agent2_system"));
      IrCheckResult result;
      try {
        result = check_ir_equivalence(spec, candidate, check);
      } catch (const ExtractionError& e) {
        throw StandardizationError(name, feedback.value_or(IrCheckResult{}),
                                   "IR check for " + name + " failed: " + e.what());
      }
      if (result.passed) accepted = std::move(candidate);
      else feedback = std::move(result);
    }
    if (!accepted) {
      throw StandardizationError(name, *feedback,
                                 "IR for " + name + " failed the equivalence check " +
                                     std::to_string(options.max_regen) + " times");
    }

    // Push in reverse so children are visited in declaration order.
    const auto& children = accepted->children_modules;
    for (auto it = children.rbegin(); it != children.rend(); ++it) {
      if (scheduled.insert(it->module_name).second) pending.push_back(it->module_name);
    }
    irs.emplace(name, std::move(*accepted));
  }

  ir::DesignArchitectureGraph dag;
  dag.design_name = spec.design_name;
  dag.module_irs = std::move(irs);
  try {
    ir::validate_design(dag);
    dag.edges = refine_inter_edges(construct_dag(dag.module_irs, backend), dag.module_irs, backend);
    ir::validate_design(dag);
  } catch (const ValidationError& e) {
    throw StandardizationError("", {}, std::string("standardized design is invalid: ") + e.what());
  } catch (const ExtractionError& e) {
    throw StandardizationError("", {}, std::string("DAG construction failed: ") + e.what());
  }
  return dag;
}

}  // namespace forge::standardization

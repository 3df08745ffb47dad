#include "forge/design_ir.hpp"

#include <algorithm>
#include <functional>
#include <unordered_map>
#include <unordered_set>

#include "forge/error.hpp"

namespace forge::ir {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

const PortDecl* ModuleIR::find_port(std::string_view port) const {
  auto it = std::find_if(ports.begin(), ports.end(), [&](const PortDecl& p) { return p.name == port; });
  return it == ports.end() ? nullptr : &*it;
}

const ChildRef* ModuleIR::find_child(std::string_view instance) const {
  auto it = std::find_if(children_modules.begin(), children_modules.end(),
                         [&](const ChildRef& c) { return c.instance_name == instance; });
  return it == children_modules.end() ? nullptr : &*it;
}

std::string to_string(PortDirection d) {
  switch (d) {
    case PortDirection::Input: return "input";
    case PortDirection::Output: return "output";
    case PortDirection::Inout: return "inout";
  }
  return "input";
}

std::string to_string(Timing t) {
  return t == Timing::Sequential ? "sequential" : "combinational";
}

std::string to_string(EdgeKind k) {
  return k == EdgeKind::Inter ? "inter" : "port";
}

namespace {

std::string join_path(const std::string& base, const std::string& leaf) {
  return base.empty() ? leaf : base + "/" + leaf;
}

// Strict object reader: every key must be declared, required keys must be
// present, and types are checked with a located error message.
class ObjectReader {
public:
  ObjectReader(const json& j, std::string path, std::initializer_list<const char*> allowed)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw SchemaError(where() + "expected an object");
    std::unordered_set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j_.items()) {
      if (!ok.count(key)) throw SchemaError(where() + "unknown key \"" + key + "\"");
    }
  }

  const json* get(const char* key, bool required) const {
    auto it = j_.find(key);
    if (it == j_.end()) {
      if (required) throw SchemaError(where() + "missing key \"" + key + "\"");
      return nullptr;
    }
    return &*it;
  }

  std::string str(const char* key, bool required = true) const {
    const json* v = get(key, required);
    if (!v) return {};
    if (!v->is_string()) throw SchemaError(at(key) + "expected a string");
    return v->get<std::string>();
  }

  std::int64_t integer(const char* key, bool required = true) const {
    const json* v = get(key, required);
    if (!v) return 0;
    if (!v->is_number_integer()) throw SchemaError(at(key) + "expected an integer");
    return v->get<std::int64_t>();
  }

  const json& array(const char* key, bool required = true) const {
    static const json empty = json::array();
    const json* v = get(key, required);
    if (!v) return empty;
    if (!v->is_array()) throw SchemaError(at(key) + "expected an array");
    return *v;
  }

  std::vector<std::string> str_list(const char* key, bool required = true) const {
    std::vector<std::string> out;
    const json& a = array(key, required);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_string()) throw SchemaError(at(key) + std::to_string(i) + ": expected a string");
      out.push_back(a[i].get<std::string>());
    }
    return out;
  }

  std::string child_path(const char* key) const { return join_path(path_, key); }

private:
  std::string where() const { return path_.empty() ? "" : path_ + ": "; }
  std::string at(const char* key) const { return join_path(path_, key) + ": "; }

  const json& j_;
  std::string path_;
};

template <typename Enum>
Enum parse_enum(const std::string& value, const std::string& path,
                std::initializer_list<std::pair<const char*, Enum>> table) {
  for (const auto& [name, e] : table) {
    if (value == name) return e;
  }
  throw SchemaError(path + ": unexpected value \"" + value + "\"");
}

PortDecl port_from_json(const json& j, const std::string& path) {
  ObjectReader r(j, path, {"name", "direction", "width", "description"});
  PortDecl p;
  p.name = r.str("name");
  p.direction = parse_enum<PortDirection>(r.str("direction"), r.child_path("direction"),
                                          {{"input", PortDirection::Input},
                                           {"output", PortDirection::Output},
                                           {"inout", PortDirection::Inout}});
  const auto width = r.integer("width");
  if (width < 1 || width > (1 << 20)) throw ValidationError(r.child_path("width"), "width must be >= 1");
  p.width = static_cast<std::uint32_t>(width);
  p.description = r.str("description", false);
  return p;
}

ParameterDecl parameter_from_json(const json& j, const std::string& path) {
  ObjectReader r(j, path, {"name", "value", "description"});
  ParameterDecl p;
  p.name = r.str("name");
  const json* v = r.get("value", true);
  if (v->is_number_integer()) {
    p.value = v->get<std::int64_t>();
  } else if (v->is_string()) {
    p.value = v->get<std::string>();
  } else {
    throw SchemaError(r.child_path("value") + ": expected an integer or a string");
  }
  p.description = r.str("description", false);
  return p;
}

FunctionalPoint point_from_json(const json& j, const std::string& path) {
  ObjectReader r(j, path, {"id", "title", "behavior", "timing", "signals"});
  FunctionalPoint f;
  f.id = r.str("id");
  f.title = r.str("title", false);
  f.behavior = r.str("behavior");
  f.timing = parse_enum<Timing>(r.str("timing"), r.child_path("timing"),
                                {{"combinational", Timing::Combinational},
                                 {"sequential", Timing::Sequential}});
  f.signals = r.str_list("signals", false);
  return f;
}

ChildRef child_from_json(const json& j, const std::string& path) {
  ObjectReader r(j, path, {"instance_name", "module_name"});
  return ChildRef{r.str("instance_name"), r.str("module_name")};
}

template <typename T, typename F>
std::vector<T> list_from_json(const json& a, const std::string& path, F&& one) {
  std::vector<T> out;
  out.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(one(a[i], join_path(path, std::to_string(i))));
  return out;
}

ojson to_json(const PortDecl& p) {
  return ojson{{"name", p.name},
               {"direction", to_string(p.direction)},
               {"width", p.width},
               {"description", p.description}};
}

ojson to_json(const ParameterDecl& p) {
  ojson j;
  j["name"] = p.name;
  std::visit([&](const auto& v) { j["value"] = v; }, p.value);
  j["description"] = p.description;
  return j;
}

ojson to_json(const FunctionalPoint& f) {
  return ojson{{"id", f.id},
               {"title", f.title},
               {"behavior", f.behavior},
               {"timing", to_string(f.timing)},
               {"signals", f.signals}};
}

// Rejects duplicate object keys anywhere in the document; nlohmann would
// otherwise silently keep the last one.
json parse_strict(std::string_view text) {
  std::vector<std::set<std::string>> keys;
  std::string duplicate;
  auto cb = [&](int, json::parse_event_t event, json& parsed) {
    switch (event) {
      case json::parse_event_t::object_start: keys.emplace_back(); break;
      case json::parse_event_t::object_end: keys.pop_back(); break;
      case json::parse_event_t::key: {
        const auto k = parsed.get<std::string>();
        if (!keys.empty() && !keys.back().insert(k).second && duplicate.empty()) duplicate = k;
        break;
      }
      default: break;
    }
    return true;
  };
  json j;
  try {
    j = json::parse(text.begin(), text.end(), cb);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("malformed JSON: ") + e.what());
  }
  if (!duplicate.empty()) throw SchemaError("duplicate key \"" + duplicate + "\"");
  return j;
}

std::set<std::string> child_module_names(const DesignArchitectureGraph& dag) {
  std::set<std::string> out;
  for (const auto& [_, m] : dag.module_irs)
    for (const auto& c : m.children_modules) out.insert(c.module_name);
  return out;
}

void check_acyclic(const DesignArchitectureGraph& dag) {
  enum class Mark { None, Active, Done };
  std::unordered_map<std::string, Mark> mark;
  std::vector<std::string> stack;
  std::function<void(const std::string&)> visit = [&](const std::string& name) {
    auto& m = mark[name];
    if (m == Mark::Done) return;
    if (m == Mark::Active) {
      auto it = std::find(stack.begin(), stack.end(), name);
      std::string cycle;
      for (; it != stack.end(); ++it) cycle += *it + " -> ";
      throw CycleError("module_irs", "instance hierarchy is cyclic: " + cycle + name);
    }
    m = Mark::Active;
    stack.push_back(name);
    auto found = dag.module_irs.find(name);
    if (found != dag.module_irs.end()) {
      for (const auto& c : found->second.children_modules) visit(c.module_name);
    }
    stack.pop_back();
    mark[name] = Mark::Done;
  };
  for (const auto& [name, _] : dag.module_irs) visit(name);
}

}  // namespace

ojson to_json(const ModuleIR& m) {
  ojson j;
  j["module_name"] = m.module_name;
  j["description"] = m.description;
  j["parameters"] = ojson::array();
  for (const auto& p : m.parameters) j["parameters"].push_back(to_json(p));
  j["ports"] = ojson::array();
  for (const auto& p : m.ports) j["ports"].push_back(to_json(p));
  j["children_modules"] = ojson::array();
  for (const auto& c : m.children_modules)
    j["children_modules"].push_back(ojson{{"instance_name", c.instance_name}, {"module_name", c.module_name}});
  j["functional_points"] = ojson::array();
  for (const auto& f : m.functional_points) j["functional_points"].push_back(to_json(f));
  j["estimated_lines"] = m.estimated_lines;
  return j;
}

ojson to_json(const ConnectionEdge& e) {
  return ojson{{"parent_instance_path", e.parent_instance_path},
               {"child_instance", e.child_instance},
               {"kind", to_string(e.kind)},
               {"parent_endpoint", e.parent_endpoint},
               {"child_port", e.child_port},
               {"note", e.note}};
}

ModuleIR module_ir_from_json(const json& j, const std::string& path) {
  ObjectReader r(j, path, {"module_name", "description", "parameters", "ports", "children_modules",
                           "functional_points", "estimated_lines"});
  ModuleIR m;
  m.module_name = r.str("module_name");
  m.description = r.str("description", false);
  m.parameters = list_from_json<ParameterDecl>(r.array("parameters", false), r.child_path("parameters"),
                                               parameter_from_json);
  m.ports = list_from_json<PortDecl>(r.array("ports"), r.child_path("ports"), port_from_json);
  m.children_modules = list_from_json<ChildRef>(r.array("children_modules", false),
                                                r.child_path("children_modules"), child_from_json);
  m.functional_points = list_from_json<FunctionalPoint>(r.array("functional_points", false),
                                                        r.child_path("functional_points"), point_from_json);
  const auto lines = r.integer("estimated_lines", false);
  if (lines < 0) throw ValidationError(r.child_path("estimated_lines"), "must be nonnegative");
  m.estimated_lines = static_cast<std::uint32_t>(lines);
  return m;
}

ConnectionEdge edge_from_json(const json& j, const std::string& path) {
  ObjectReader r(j, path, {"parent_instance_path", "child_instance", "kind", "parent_endpoint", "child_port", "note"});
  ConnectionEdge e;
  e.parent_instance_path = r.str("parent_instance_path");
  e.child_instance = r.str("child_instance");
  e.kind = parse_enum<EdgeKind>(r.str("kind"), r.child_path("kind"),
                                {{"port", EdgeKind::Port}, {"inter", EdgeKind::Inter}});
  e.parent_endpoint = r.str("parent_endpoint");
  e.child_port = r.str("child_port");
  e.note = r.str("note", false);
  return e;
}

void validate_module(const ModuleIR& m, const std::string& path) {
  if (m.module_name.empty()) throw ValidationError(join_path(path, "module_name"), "must be nonempty");
  if (m.ports.empty()) throw ValidationError(join_path(path, "ports"), "module declares no ports");

  std::set<std::string> port_names;
  for (std::size_t i = 0; i < m.ports.size(); ++i) {
    const auto& p = m.ports[i];
    const auto at = join_path(path, "ports/" + std::to_string(i));
    if (p.name.empty()) throw ValidationError(at + "/name", "must be nonempty");
    if (p.width < 1) throw ValidationError(at + "/width", "width must be >= 1");
    if (!port_names.insert(p.name).second) throw ValidationError(at + "/name", "duplicate port \"" + p.name + "\"");
  }

  std::set<std::string> seen;
  for (std::size_t i = 0; i < m.parameters.size(); ++i) {
    if (!seen.insert(m.parameters[i].name).second)
      throw ValidationError(join_path(path, "parameters/" + std::to_string(i) + "/name"),
                            "duplicate parameter \"" + m.parameters[i].name + "\"");
  }

  seen.clear();
  for (std::size_t i = 0; i < m.functional_points.size(); ++i) {
    const auto& f = m.functional_points[i];
    const auto at = join_path(path, "functional_points/" + std::to_string(i));
    if (f.id.empty()) throw ValidationError(at + "/id", "must be nonempty");
    if (!seen.insert(f.id).second) throw ValidationError(at + "/id", "duplicate functional point \"" + f.id + "\"");
  }

  seen.clear();
  for (std::size_t i = 0; i < m.children_modules.size(); ++i) {
    const auto& c = m.children_modules[i];
    const auto at = join_path(path, "children_modules/" + std::to_string(i));
    if (c.instance_name.empty()) throw ValidationError(at + "/instance_name", "must be nonempty");
    if (c.module_name.empty()) throw ValidationError(at + "/module_name", "must be nonempty");
    if (!seen.insert(c.instance_name).second)
      throw ValidationError(at + "/instance_name", "duplicate instance \"" + c.instance_name + "\"");
    if (port_names.count(c.instance_name))
      throw ValidationError(at + "/instance_name", "instance \"" + c.instance_name + "\" collides with a port name");
  }
}

void validate_design(const DesignArchitectureGraph& dag) {
  if (dag.design_name.empty()) throw ValidationError("design_name", "must be nonempty");
  if (dag.module_irs.empty()) throw EmptyDesignError("module_irs", "design has no modules");

  for (const auto& [key, m] : dag.module_irs) {
    const auto at = "module_irs/" + key;
    if (key != m.module_name)
      throw ValidationError(at + "/module_name", "module_name \"" + m.module_name + "\" does not match its key");
    validate_module(m, at);
    for (std::size_t i = 0; i < m.children_modules.size(); ++i) {
      const auto& ref = m.children_modules[i].module_name;
      if (!dag.module_irs.count(ref))
        throw ValidationError(at + "/children_modules/" + std::to_string(i) + "/module_name",
                              "references unknown module \"" + ref + "\"");
    }
  }

  check_acyclic(dag);

  std::set<std::string> modules;
  for (const auto& [name, _] : dag.module_irs) modules.insert(name);
  std::vector<ParentChildPair> pairs;
  for (const auto& [name, m] : dag.module_irs)
    for (const auto& c : m.children_modules) pairs.push_back({name, c});
  identify_root(pairs, modules);

  for (std::size_t i = 0; i < dag.edges.size(); ++i) {
    const auto& e = dag.edges[i];
    const auto at = "edges/" + std::to_string(i);
    const auto parent = resolve_instance_path(dag, e.parent_instance_path);
    if (!parent)
      throw ValidationError(at + "/parent_instance_path", "unresolvable instance path \"" + e.parent_instance_path + "\"");
    const auto& pm = dag.module_irs.at(*parent);
    const ChildRef* child = pm.find_child(e.child_instance);
    if (!child)
      throw ValidationError(at + "/child_instance",
                            "\"" + e.child_instance + "\" is not an instance inside " + *parent);
    if (e.parent_endpoint.empty()) throw ValidationError(at + "/parent_endpoint", "must be nonempty");
    if (e.kind == EdgeKind::Port && !pm.find_port(e.parent_endpoint))
      throw ValidationError(at + "/parent_endpoint",
                            "\"" + e.parent_endpoint + "\" is not a port of " + *parent);
    if (!dag.module_irs.at(child->module_name).find_port(e.child_port))
      throw ValidationError(at + "/child_port",
                            "\"" + e.child_port + "\" is not a port of " + child->module_name);
  }
}

DesignArchitectureGraph parse_design_ir(std::string_view text) {
  const json doc = parse_strict(text);
  ObjectReader r(doc, "", {"design_name", "module_irs", "edges"});
  DesignArchitectureGraph dag;
  dag.design_name = r.str("design_name");
  const json* irs = r.get("module_irs", true);
  if (!irs->is_object()) throw SchemaError("module_irs: expected an object");
  for (const auto& [key, value] : irs->items()) {
    dag.module_irs.emplace(key, module_ir_from_json(value, "module_irs/" + key));
  }
  dag.edges = list_from_json<ConnectionEdge>(r.array("edges"), "edges", edge_from_json);
  validate_design(dag);
  return dag;
}

std::string serialize_design_ir(const DesignArchitectureGraph& dag) {
  ojson doc;
  doc["design_name"] = dag.design_name;
  doc["module_irs"] = ojson::object();
  for (const auto& [name, m] : dag.module_irs) doc["module_irs"][name] = to_json(m);
  doc["edges"] = ojson::array();
  for (const auto& e : dag.edges) doc["edges"].push_back(to_json(e));
  return doc.dump(2) + "\n";
}

std::string identify_root(const std::vector<ParentChildPair>& pairs, const std::set<std::string>& modules) {
  if (modules.empty()) throw EmptyDesignError("", "design has no modules");
  std::set<std::string> children;
  for (const auto& p : pairs) children.insert(p.child.module_name);
  std::vector<std::string> roots;
  for (const auto& m : modules)
    if (!children.count(m)) roots.push_back(m);
  if (roots.empty()) throw CycleError("", "every module is instantiated by another; no root exists");
  if (roots.size() > 1) {
    std::string names;
    for (const auto& r : roots) names += (names.empty() ? "" : ", ") + r;
    throw MultiRootError("", "design has " + std::to_string(roots.size()) + " roots: " + names);
  }
  return roots.front();
}

DesignTree extract_parent_child_pairs(const DesignArchitectureGraph& dag) {
  check_acyclic(dag);
  DesignTree tree;
  std::set<std::string> modules;
  for (const auto& [name, m] : dag.module_irs) {
    modules.insert(name);
    for (const auto& c : m.children_modules) tree.parent_child_pairs.push_back({name, c});
  }
  tree.root = identify_root(tree.parent_child_pairs, modules);
  return tree;
}

std::optional<std::string> resolve_instance_path(const DesignArchitectureGraph& dag, std::string_view path) {
  if (path.empty()) return std::nullopt;
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto slash = path.find('/', start);
    parts.emplace_back(path.substr(start, slash == std::string_view::npos ? std::string_view::npos : slash - start));
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  const auto& top = parts.front();
  if (!dag.module_irs.count(top) || child_module_names(dag).count(top)) return std::nullopt;
  std::string current = top;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const ChildRef* c = dag.module_irs.at(current).find_child(parts[i]);
    if (!c || !dag.module_irs.count(c->module_name)) return std::nullopt;
    current = c->module_name;
  }
  return current;
}

std::vector<std::string> instance_paths_of(const DesignArchitectureGraph& dag, const std::string& root,
                                           const std::string& module) {
  std::vector<std::string> out;
  std::function<void(const std::string&, const std::string&, int)> walk =
      [&](const std::string& type, const std::string& path, int depth) {
        if (depth > static_cast<int>(dag.module_irs.size())) return;  // cyclic input guard
        if (type == module) out.push_back(path);
        auto it = dag.module_irs.find(type);
        if (it == dag.module_irs.end()) return;
        for (const auto& c : it->second.children_modules) walk(c.module_name, path + "/" + c.instance_name, depth + 1);
      };
  walk(root, root, 0);
  return out;
}

std::vector<ConnectionEdge> edges_for_parent(const DesignArchitectureGraph& dag, const std::string& module) {
  std::vector<ConnectionEdge> out;
  for (const auto& e : dag.edges) {
    if (resolve_instance_path(dag, e.parent_instance_path) == module) out.push_back(e);
  }
  return out;
}

}  // namespace forge::ir

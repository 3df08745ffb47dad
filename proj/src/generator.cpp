#include "forge/generator.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "forge/extraction.hpp"
#include "forge/prompts.hpp"

namespace forge::generator {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

nlohmann::ordered_json CompletenessResult::to_json() const {
  return ojson{{"passed", passed},
               {"missing_ports", missing_ports},
               {"missing_functions", missing_functions},
               {"notes", notes}};
}

const SourceUnit& ReferenceModel::header() const {
  for (const auto& u : units)
    if (u.kind == UnitKind::Header) return u;
  throw Error("reference model " + module_name + " has no header unit");
}

const SourceUnit* ReferenceModel::find_unit(const std::string& file_name) const {
  for (const auto& u : units)
    if (u.file_name == file_name) return &u;
  return nullptr;
}

std::string header_file_name(const std::string& module) { return module + ".h"; }
std::string implementation_file_name(const std::string& module) { return module + ".cpp"; }
std::string block_banner(const std::string& block_id) { return "// ---- block: " + block_id + " ----"; }

namespace {

std::string ir_text(const ir::ModuleIR& m) { return ir::to_json(m).dump(2); }

std::string feedback_text(const std::optional<CompletenessResult>& feedback) {
  if (!feedback) return "";
  return "\nThe previous model failed the completeness check:\n```json\n" + feedback->to_json().dump(2) +
         "\n```\nFix every omission listed.\n";
}

std::string blocks_text(const std::vector<FunctionalBlock>& blocks) {
  std::string out;
  for (const auto& b : blocks) {
    out += "- " + b.block_id + " [";
    for (std::size_t i = 0; i < b.member_points.size(); ++i) out += (i ? ", " : "") + b.member_points[i];
    out += "]: " + b.summary + "\n";
  }
  return out.empty() ? "(none)\n" : out;
}

std::string notes_text(const InteractionNotes& notes) {
  std::string out;
  for (const auto& e : notes.entries) out += "- " + e.child_instance + "." + e.child_port + ": " + e.parent_logic + "\n";
  return out.empty() ? "(none)\n" : out;
}

std::vector<FunctionalBlock> blocks_from_json(const json& j) {
  if (!j.is_array()) throw SchemaError("expected an array of blocks");
  std::vector<FunctionalBlock> out;
  for (const auto& b : j) {
    if (!b.is_object()) throw SchemaError("block is not an object");
    out.push_back({b.at("block_id").get<std::string>(), b.at("member_points").get<std::vector<std::string>>(),
                   b.value("summary", std::string{})});
  }
  return out;
}

void append_unique(std::vector<std::string>& dst, const std::vector<std::string>& src) {
  for (const auto& s : src)
    if (std::find(dst.begin(), dst.end(), s) == dst.end()) dst.push_back(s);
}

}  // namespace

void check_partition(const ir::ModuleIR& m, const std::vector<FunctionalBlock>& blocks) {
  std::set<std::string> ids;
  for (const auto& f : m.functional_points) ids.insert(f.id);
  std::set<std::string> seen_blocks;
  std::map<std::string, std::string> owner;
  for (const auto& b : blocks) {
    if (b.block_id.empty()) throw PartitionError(m.module_name + ": block with empty id");
    if (!seen_blocks.insert(b.block_id).second) throw PartitionError(m.module_name + ": duplicate block " + b.block_id);
    if (b.member_points.empty() && !ids.empty())
      throw PartitionError(m.module_name + ": block " + b.block_id + " has no member points");
    for (const auto& p : b.member_points) {
      if (!ids.count(p)) throw PartitionError(m.module_name + ": block " + b.block_id + " names unknown point " + p);
      auto [it, fresh] = owner.emplace(p, b.block_id);
      if (!fresh) throw PartitionError(m.module_name + ": point " + p + " is in both " + it->second + " and " + b.block_id);
    }
  }
  std::string missing;
  for (const auto& id : ids)
    if (!owner.count(id)) missing += (missing.empty() ? "" : ", ") + id;
  if (!missing.empty()) throw PartitionError(m.module_name + ": functional points not covered: " + missing);
}

std::vector<FunctionalBlock> partition_functional_blocks(const ir::ModuleIR& m, llm::ChatSession& session) {
  if (m.estimated_lines <= kSingleBlockMaxLines && m.functional_points.size() <= kSingleBlockMaxPoints) {
    FunctionalBlock all{"blk1", {}, m.description};
    for (const auto& f : m.functional_points) all.member_points.push_back(f.id);
    return {all};
  }

  const std::function<std::vector<FunctionalBlock>(const json&)> convert = blocks_from_json;
  auto blocks = extract::request_json(
      session, prompts::render("agent4_partition", {{"module", m.module_name}, {"ir", ir_text(m)}, {"feedback", ""}}),
      convert);
  try {
    check_partition(m, blocks);
    return blocks;
  } catch (const PartitionError& first) {
    const auto retry = prompts::render(
        "agent4_partition",
        {{"module", m.module_name},
         {"ir", ir_text(m)},
         {"feedback", std::string("\nYour previous grouping was invalid: ") + first.what() + "\n"}});
    blocks = extract::request_json(session, retry, convert);
    check_partition(m, blocks);
    return blocks;
  }
}

InteractionNotes analyze_parent_interactions(const ir::ModuleIR& m, const std::vector<ir::ConnectionEdge>& edges,
                                             llm::ChatSession& session) {
  InteractionNotes notes;
  if (!m.is_parent()) return notes;
  std::vector<ir::ConnectionEdge> inter;
  for (const auto& e : edges)
    if (e.kind == ir::EdgeKind::Inter && m.find_child(e.child_instance)) inter.push_back(e);
  if (inter.empty()) return notes;

  std::string listing;
  for (const auto& e : inter)
    listing += "- " + e.child_instance + "." + e.child_port + " <-> " + e.parent_endpoint +
               (e.note.empty() ? "" : " (" + e.note + ")") + "\n";
  using Reply = std::vector<InteractionNote>;
  const auto reply = extract::request_json<Reply>(
      session, prompts::render("agent4_interactions", {{"module", m.module_name}, {"edges", listing}, {"ir", ir_text(m)}}),
      [](const json& j) {
        if (!j.is_array()) throw SchemaError("expected an array");
        Reply r;
        for (const auto& e : j)
          r.push_back({e.value("child_instance", std::string{}), e.at("child_port").get<std::string>(),
                       e.at("parent_logic").get<std::string>()});
        return r;
      });

  for (const auto& e : inter) {
    InteractionNote note{e.child_instance, e.child_port, e.note};
    for (const auto& r : reply) {
      if (r.child_port == e.child_port && (r.child_instance.empty() || r.child_instance == e.child_instance)) {
        note.parent_logic = r.parent_logic;
        break;
      }
    }
    notes.entries.push_back(std::move(note));
  }
  return notes;
}

SourceUnit gen_header(const ir::ModuleIR& m, const std::vector<FunctionalBlock>& blocks, const InteractionNotes& notes,
                      const std::optional<CompletenessResult>& feedback, llm::ChatSession& session) {
  const auto prompt = prompts::render("agent5_header", {{"module", m.module_name},
                                                        {"blocks", blocks_text(blocks)},
                                                        {"notes", notes_text(notes)},
                                                        {"ir", ir_text(m)},
                                                        {"feedback", feedback_text(feedback)}});
  return SourceUnit{header_file_name(m.module_name), extract::request_code(session, prompt), UnitKind::Header};
}

BlockImpl gen_block_impl(const ir::ModuleIR& m, const FunctionalBlock& block, const SourceUnit&,
                         const InteractionNotes& notes, const std::optional<CompletenessResult>& feedback,
                         llm::ChatSession& session) {
  std::string points;
  for (const auto& id : block.member_points) {
    auto it = std::find_if(m.functional_points.begin(), m.functional_points.end(),
                           [&](const ir::FunctionalPoint& f) { return f.id == id; });
    if (it != m.functional_points.end()) points += "\n  - " + id + " (" + ir::to_string(it->timing) + "): " + it->behavior;
  }
  BlockImpl out;
  out.pseudocode = extract::request_text(session, prompts::render("agent5_pseudocode", {{"module", m.module_name},
                                                                                       {"block", block.block_id},
                                                                                       {"points", points},
                                                                                       {"summary", block.summary},
                                                                                       {"notes", notes_text(notes)},
                                                                                       {"feedback", feedback_text(feedback)}}));
  out.code = extract::request_code(
      session, prompts::render("agent5_impl", {{"module", m.module_name}, {"block", block.block_id}}));
  return out;
}

CompletenessResult lexical_completeness(const SourceUnit& header, const std::vector<std::string>& impls,
                                        const ir::ModuleIR& m) {
  CompletenessResult r;
  for (const auto& p : m.ports)
    if (header.content.find(p.name) == std::string::npos) r.missing_ports.push_back(p.name);
  std::string all;
  for (const auto& s : impls) all += s + "\n";
  for (const auto& f : m.functional_points) {
    const bool covered = std::all_of(f.signals.begin(), f.signals.end(),
                                     [&](const std::string& s) { return all.find(s) != std::string::npos; });
    if (!covered) r.missing_functions.push_back(f.id);
  }
  r.passed = r.missing_ports.empty() && r.missing_functions.empty();
  if (!r.passed) r.notes = "lexical check failed";
  return r;
}

CompletenessResult completeness_check(const SourceUnit& header, const std::vector<std::string>& impls,
                                      const ir::ModuleIR& m, const std::vector<ir::ConnectionEdge>&,
                                      llm::ChatSession& session) {
  CompletenessResult local = lexical_completeness(header, impls, m);
  if (!local.passed) return local;

  std::string impl_text;
  for (const auto& s : impls) impl_text += s;
  auto remote = extract::request_json<CompletenessResult>(
      session,
      prompts::render("agent6_check",
                      {{"module", m.module_name}, {"ir", ir_text(m)}, {"header", header.content}, {"impl", impl_text}}),
      [](const json& j) {
        if (!j.is_object() || !j.contains("passed") || !j["passed"].is_boolean())
          throw SchemaError("expected {\"passed\": bool, ...}");
        CompletenessResult r;
        r.passed = j["passed"].get<bool>();
        r.missing_ports = j.value("missing_ports", std::vector<std::string>{});
        r.missing_functions = j.value("missing_functions", std::vector<std::string>{});
        r.notes = j.value("notes", std::string{});
        return r;
      });
  append_unique(local.missing_ports, remote.missing_ports);
  append_unique(local.missing_functions, remote.missing_functions);
  local.notes = remote.notes;
  local.passed = remote.passed && local.missing_ports.empty() && local.missing_functions.empty();
  return local;
}

ReferenceModel amg_generate(const ir::ModuleIR& m, const std::vector<ir::ConnectionEdge>& edges,
                            const std::shared_ptr<llm::Backend>& backend, int max_attempts) {
  if (max_attempts < 1) throw ConfigError("amg max_attempts must be >= 1");
  auto planner = llm::open_session(backend, llm::AgentRole::Agent4, prompts::get("agent4_system"));
  const auto blocks = partition_functional_blocks(m, planner);
  const auto notes = analyze_parent_interactions(m, edges, planner);

  std::optional<CompletenessResult> feedback;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    auto writer = llm::open_session(backend, llm::AgentRole::Agent5, prompts::get("agent5_system"));
    const SourceUnit header = gen_header(m, blocks, notes, feedback, writer);
    std::vector<std::string> impls;
    std::map<std::string, std::string> pseudocode;
    for (const auto& block : blocks) {
      auto impl = gen_block_impl(m, block, header, notes, feedback, writer);
      pseudocode[block.block_id] = std::move(impl.pseudocode);
      impls.push_back(std::move(impl.code));
    }

    auto checker = llm::open_session(backend, llm::AgentRole::Agent6, prompts::get("agent6_system"));
    CompletenessResult result = completeness_check(header, impls, m, edges, checker);
    if (!result.passed) {
      feedback = std::move(result);
      continue;
    }

    std::string cpp;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      cpp += block_banner(blocks[i].block_id) + "\n" + impls[i];
      if (!impls[i].empty() && impls[i].back() != '\n') cpp += '\n';
    }
    ReferenceModel model;
    model.module_name = m.module_name;
    model.units = {header, SourceUnit{implementation_file_name(m.module_name), cpp, UnitKind::Implementation}};
    model.pseudocode = std::move(pseudocode);
    model.blocks = blocks;
    model.attempts = attempt;
    return model;
  }
  throw GenerationExhaustedError(m.module_name, *feedback,
                                 "model for " + m.module_name + " still incomplete after " +
                                     std::to_string(max_attempts) + " attempts");
}

nlohmann::ordered_json trace_json(const ReferenceModel& model) {
  ojson j;
  j["module"] = model.module_name;
  j["attempts"] = model.attempts;
  j["blocks"] = ojson::array();
  for (const auto& b : model.blocks)
    j["blocks"].push_back({{"block_id", b.block_id}, {"member_points", b.member_points}, {"summary", b.summary}});
  j["pseudocode"] = ojson::object();
  for (const auto& [id, text] : model.pseudocode) j["pseudocode"][id] = text;
  return j;
}

void write_sources(const ReferenceModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& u : model.units) {
    std::ofstream out(dir / u.file_name, std::ios::binary);
    out << u.content;
    if (!out) throw Error("cannot write " + (dir / u.file_name).string());
  }
}

ReferenceModel read_sources(const std::string& module, const std::filesystem::path& dir) {
  ReferenceModel model;
  model.module_name = module;
  for (const auto& [name, kind] : {std::pair{header_file_name(module), UnitKind::Header},
                                   std::pair{implementation_file_name(module), UnitKind::Implementation}}) {
    std::ifstream in(dir / name, std::ios::binary);
    if (!in) throw CorruptArtifactError("missing model source " + (dir / name).string());
    std::stringstream ss;
    ss << in.rdbuf();
    model.units.push_back({name, ss.str(), kind});
  }
  return model;
}

}  // namespace forge::generator

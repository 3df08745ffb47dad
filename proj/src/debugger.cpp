#include "forge/debugger.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

#include "forge/error.hpp"
#include "forge/extraction.hpp"
#include "forge/prompts.hpp"

namespace forge::debugger {

namespace fs = std::filesystem;
using json = nlohmann::json;

KnowledgeBase parse_knowledge_base(const json& j) {
  if (!j.is_array()) throw ConfigError("knowledge base must be a JSON array");
  KnowledgeBase kb;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    const std::string where = "knowledge base entry " + std::to_string(i);
    try {
      KnowledgeEntry entry;
      entry.id = e.at("id").get<std::string>();
      entry.symptom = e.at("symptom").get<std::string>();
      entry.explanation = e.value("explanation", std::string{});
      entry.fix_hint = e.value("fix_hint", std::string{});
      entry.tags = e.value("tags", std::vector<std::string>{});
      if (entry.id.empty()) throw ConfigError(where + ": empty id");
      if (entry.symptom.empty()) throw ConfigError(where + ": empty symptom");
      if (!ids.insert(entry.id).second) throw ConfigError(where + ": duplicate id \"" + entry.id + "\"");
      kb.push_back(std::move(entry));
    } catch (const json::exception& ex) {
      throw ConfigError(where + ": " + ex.what());
    }
  }
  return kb;
}

KnowledgeBase load_knowledge_base(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read knowledge base " + path.string());
  try {
    return parse_knowledge_base(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("knowledge base " + path.string() + " is not valid JSON: " + e.what());
  }
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isalnum(c) || c == '_') {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace {

using TermCounts = std::map<std::string, double>;

TermCounts count_terms(const std::string& text) {
  TermCounts tf;
  for (auto& t : tokenize(text)) tf[t] += 1;
  return tf;
}

std::map<std::string, double> weigh(const TermCounts& tf, const std::map<std::string, double>& idf) {
  std::map<std::string, double> w;
  for (const auto& [term, n] : tf) {
    const auto it = idf.find(term);
    if (it != idf.end()) w[term] = n * it->second;
  }
  return w;
}

double norm(const std::map<std::string, double>& v) {
  double s = 0;
  for (const auto& [_, x] : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

std::vector<KnowledgeEntry> retrieve_knowledge(const std::string& query, const KnowledgeBase& kb, std::size_t k) {
  if (k < 1) throw DomainError("retrieve_knowledge needs k >= 1");
  if (kb.empty()) return {};

  std::vector<TermCounts> docs;
  std::map<std::string, double> df;
  for (const auto& e : kb) {
    docs.push_back(count_terms(e.symptom + " " + e.explanation));
    for (const auto& [term, _] : docs.back()) df[term] += 1;
  }
  const double n = static_cast<double>(kb.size());
  std::map<std::string, double> idf;
  for (const auto& [term, d] : df) idf[term] = std::log((1 + n) / (1 + d)) + 1;

  const auto q = weigh(count_terms(query), idf);
  const double qn = norm(q);
  if (qn == 0) return {};

  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 0; i < kb.size(); ++i) {
    const auto d = weigh(docs[i], idf);
    double dot = 0;
    for (const auto& [term, w] : q)
      if (auto it = d.find(term); it != d.end()) dot += w * it->second;
    if (dot > 0) scored.emplace_back(dot / (qn * norm(d)), i);
  }
  std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return kb[a.second].id < kb[b.second].id;
  });
  std::vector<KnowledgeEntry> out;
  for (std::size_t i = 0; i < scored.size() && i < k; ++i) out.push_back(kb[scored[i].second]);
  return out;
}

std::optional<double> line_timestamp(const std::string& line) {
  static const std::regex stamp(R"(time=(\d+(?:\.\d+)?)ns)");
  std::smatch m;
  if (!std::regex_search(line, m, stamp)) return std::nullopt;
  return std::stod(m[1].str());
}

std::vector<LogWindow> extract_log_windows(const std::string& log,
                                           const std::vector<verification::MismatchRecord>& mismatches) {
  std::vector<std::pair<double, std::string>> stamped;
  std::istringstream in(log);
  std::string line;
  while (std::getline(in, line)) {
    if (auto t = line_timestamp(line)) stamped.emplace_back(*t, line);
  }
  std::vector<LogWindow> out;
  for (const auto& m : mismatches) {
    LogWindow w;
    w.center_ns = m.time_ns;
    w.start_ns = std::max(0.0, m.time_ns - kWindowHalfWidthNs);
    w.end_ns = m.time_ns + kWindowHalfWidthNs;
    for (const auto& [t, text] : stamped)
      if (t >= w.start_ns && t <= w.end_ns) w.lines.push_back(text);
    out.push_back(std::move(w));
  }
  return out;
}

namespace {

std::string render_units(const std::vector<const generator::SourceUnit*>& units) {
  std::string out;
  for (const auto* u : units) {
    out += "```cpp " + u->file_name + "\n" + u->content;
    if (!u->content.empty() && u->content.back() != '\n') out += '\n';
    out += "```\n";
  }
  return out;
}

std::string render_knowledge(const std::vector<KnowledgeEntry>& entries) {
  if (entries.empty()) return "(none)\n";
  std::string out;
  for (const auto& e : entries) {
    out += "- [" + e.id + "] " + e.symptom + "\n";
    if (!e.explanation.empty()) out += "  why: " + e.explanation + "\n";
    if (!e.fix_hint.empty()) out += "  fix: " + e.fix_hint + "\n";
  }
  return out;
}

std::vector<std::string> ids_of(const std::vector<KnowledgeEntry>& entries) {
  std::vector<std::string> ids;
  for (const auto& e : entries) ids.push_back(e.id);
  return ids;
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

/// Lines removed and added between two texts (LCS-based).
std::pair<std::size_t, std::size_t> line_delta(const std::string& before, const std::string& after) {
  const auto a = split_lines(before), b = split_lines(after);
  std::vector<std::vector<std::size_t>> lcs(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = a.size(); i-- > 0;)
    for (std::size_t j = b.size(); j-- > 0;)
      lcs[i][j] = a[i] == b[j] ? lcs[i + 1][j + 1] + 1 : std::max(lcs[i + 1][j], lcs[i][j + 1]);
  return {a.size() - lcs[0][0], b.size() - lcs[0][0]};
}

std::string file_of(const extract::FencedBlock& block) {
  std::istringstream in(block.info);
  std::string tok, last;
  while (in >> tok) last = tok;
  return last.find('.') != std::string::npos ? last : std::string{};
}

/// Maps reply blocks onto the target units. An unnamed block is accepted
/// only when a single unit is targeted.
std::map<std::string, std::string> match_replacements(const std::string& reply, const std::set<std::string>& targets) {
  std::map<std::string, std::string> out;
  std::optional<std::string> unnamed;
  for (const auto& b : extract::fenced_blocks(reply)) {
    if (b.body.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    const auto name = file_of(b);
    if (name.empty()) {
      if (!unnamed) unnamed = b.body;
    } else if (targets.count(name) && !out.count(name)) {
      out[name] = b.body;
    }
  }
  if (out.empty() && unnamed && targets.size() == 1) out[*targets.begin()] = *unnamed;
  return out;
}

FixResult apply_fix(const ReferenceModel& model, const std::set<std::string>& targets, const std::string& prompt,
                    llm::ChatSession& session, FixRecord record) {
  auto replacements = match_replacements(session.send(prompt), targets);
  for (int attempt = 0; replacements.empty(); ++attempt) {
    if (attempt >= extract::kCodeRepairRetries)
      throw ExtractionError("debugger reply for " + model.module_name + " contained none of the requested files");
    std::string wanted;
    for (const auto& t : targets) wanted += (wanted.empty() ? "" : ", ") + t;
    const auto repair = prompts::render("repair_code", {{"error", "expected one fenced block per file, info string "
                                                                  "naming the file (" + wanted + ")"}});
    replacements = match_replacements(session.send(repair), targets);
  }

  FixResult result{model, std::move(record)};
  for (auto& unit : result.model.units) {
    const auto it = replacements.find(unit.file_name);
    if (it == replacements.end()) continue;
    const auto [removed, added] = line_delta(unit.content, it->second);
    if (!result.record.diff_summary.empty()) result.record.diff_summary += "; ";
    result.record.diff_summary +=
        unit.file_name + " -" + std::to_string(removed) + " +" + std::to_string(added) + " lines";
    unit.content = it->second;
  }
  return result;
}

}  // namespace

FixResult fix_syntax(const ReferenceModel& model, const ValidationReport& report, const KnowledgeBase& kb,
                     llm::ChatSession& session, std::size_t k) {
  if (report.stage != Stage::Syntax || report.passed)
    throw Error("fix_syntax needs a failed syntax report for " + model.module_name);
  std::set<std::string> targets;
  for (const auto& u : model.units)
    if (report.log_excerpt.find(u.file_name) != std::string::npos) targets.insert(u.file_name);
  if (targets.empty())
    for (const auto& u : model.units) targets.insert(u.file_name);

  std::vector<const generator::SourceUnit*> shown;
  for (const auto& u : model.units)
    if (targets.count(u.file_name)) shown.push_back(&u);

  const auto hits = retrieve_knowledge(report.log_excerpt + "\n" + report.note, kb, k);
  const auto prompt = prompts::render("agent7_syntax", {{"module", model.module_name},
                                                        {"log", report.log_excerpt.empty() ? report.note : report.log_excerpt},
                                                        {"knowledge", render_knowledge(hits)},
                                                        {"units", render_units(shown)}});
  return apply_fix(model, targets, prompt, session, FixRecord{Stage::Syntax, ids_of(hits), {}});
}

FixResult fix_functional(const ReferenceModel& model, const ValidationReport& report, const ir::ModuleIR& ir,
                         const KnowledgeBase& kb, llm::ChatSession& session, std::size_t max_windows, std::size_t k) {
  if (report.stage != Stage::Functional || report.passed)
    throw Error("fix_functional needs a failed functional report for " + model.module_name);
  if (report.mismatches.empty())
    throw NoMismatchDataError("no mismatch data for " + model.module_name +
                              (report.note.empty() ? std::string{} : " (" + report.note + ")"));

  std::vector<verification::MismatchRecord> firsts(
      report.mismatches.begin(), report.mismatches.begin() + std::min(max_windows, report.mismatches.size()));
  const auto windows = extract_log_windows(report.log_excerpt, firsts);
  std::string windows_text, query;
  for (const auto& w : windows) {
    std::ostringstream head;
    head << "window [" << w.start_ns << ", " << w.end_ns << "] ns around " << w.center_ns << " ns:\n";
    windows_text += head.str() + "```text\n";
    for (const auto& line : w.lines) {
      windows_text += line + "\n";
      query += line + "\n";
    }
    windows_text += "```\n";
  }

  std::set<std::string> targets;
  std::vector<const generator::SourceUnit*> shown;
  for (const auto& u : model.units) {
    targets.insert(u.file_name);
    shown.push_back(&u);
  }
  const auto hits = retrieve_knowledge(query, kb, k);
  const auto prompt = prompts::render("agent7_functional", {{"module", model.module_name},
                                                            {"windows", windows_text},
                                                            {"knowledge", render_knowledge(hits)},
                                                            {"ir", ir::to_json(ir).dump(2)},
                                                            {"units", render_units(shown)}});
  return apply_fix(model, targets, prompt, session, FixRecord{Stage::Functional, ids_of(hits), {}});
}

namespace {

std::vector<ValidationReport> validate(const ReferenceModel& model, const std::vector<ReferenceModel>& deps,
                                       verification::Toolchain& tc) {
  std::vector<ValidationReport> reports{verification::compile_model(model, deps, tc)};
  if (reports.back().passed)
    reports.push_back(verification::run_testbench(model.module_name, verification::binary_path(tc.config(), model.module_name), tc));
  return reports;
}

}  // namespace

DebugOutcome debug_loop(const ReferenceModel& model, const std::vector<ReferenceModel>& deps,
                        verification::Toolchain& tc, const ir::ModuleIR& ir, const KnowledgeBase& kb,
                        const std::shared_ptr<llm::Backend>& backend, const DebugOptions& options) {
  if (options.threshold < 1) throw DomainError("debug threshold must be >= 1");
  DebugOutcome outcome;
  outcome.patched_model = model;
  auto progress = [&] {
    if (options.on_progress) options.on_progress(outcome);
  };
  std::optional<llm::ChatSession> session;

  for (int iteration = 1; iteration <= options.threshold; ++iteration) {
    outcome.iterations_used = iteration;
    outcome.reports = iteration == 1 && !options.initial_reports.empty() ? options.initial_reports
                                                                         : validate(outcome.patched_model, deps, tc);
    const auto& last = outcome.reports.back();
    if (last.passed && last.stage == Stage::Functional) {
      outcome.fixed = true;
      progress();
      return outcome;
    }
    progress();
    if (iteration == options.threshold) break;

    if (!session) session.emplace(llm::open_session(backend, llm::AgentRole::Agent7, prompts::get("agent7_system")));
    try {
      auto fix = last.stage == Stage::Syntax
                     ? fix_syntax(outcome.patched_model, last, kb, *session, options.retrieve_k)
                     : fix_functional(outcome.patched_model, last, ir, kb, *session, options.max_windows,
                                      options.retrieve_k);
      outcome.patched_model = std::move(fix.model);
      outcome.history.push_back(std::move(fix.record));
    } catch (const ExtractionError& e) {
      outcome.history.push_back(FixRecord{last.stage, {}, std::string("no fix applied: ") + e.what()});
    } catch (const NoMismatchDataError& e) {
      outcome.history.push_back(FixRecord{last.stage, {}, std::string("no fix applied: ") + e.what()});
    } catch (...) {
      outcome.history.push_back(FixRecord{last.stage, {}, "fix aborted by error"});
      progress();
      throw;
    }
    progress();
  }
  return outcome;
}

Debugger::Debugger(std::shared_ptr<llm::Backend> backend, std::map<std::string, ir::ModuleIR> irs, KnowledgeBase kb,
                   int threshold)
    : backend_(std::move(backend)), irs_(std::move(irs)), kb_(std::move(kb)), threshold_(threshold) {
  if (threshold_ < 1) throw DomainError("debug threshold must be >= 1");
}

verification::RepairResult Debugger::repair(const ReferenceModel& model, const std::vector<ReferenceModel>& deps,
                                            const std::vector<ValidationReport>& failed_reports,
                                            verification::Toolchain& tc) {
  const auto it = irs_.find(model.module_name);
  if (it == irs_.end()) throw Error("no module IR for " + model.module_name);
  DebugOptions options;
  options.threshold = threshold_;
  options.initial_reports = failed_reports;
  auto outcome = debug_loop(model, deps, tc, it->second, kb_, backend_, options);
  verification::RepairResult result{outcome.fixed, outcome.patched_model, outcome.reports, outcome.iterations_used};
  outcomes_[model.module_name] = std::move(outcome);
  return result;
}

}  // namespace forge::debugger

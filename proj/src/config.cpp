#include "forge/config.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "forge/error.hpp"

namespace forge::config {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

struct Cursor {
  const std::string& s;
  std::size_t pos = 0;
  int line_no;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("config line " + std::to_string(line_no) + ": " + msg);
  }
  void skip_ws() {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  }
  bool at_end_or_comment() {
    skip_ws();
    return pos >= s.size() || s[pos] == '#';
  }
};

bool bare_key_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }

std::string parse_basic_string(Cursor& c) {
  ++c.pos;  // opening quote
  std::string out;
  while (c.pos < c.s.size()) {
    const char ch = c.s[c.pos++];
    if (ch == '"') return out;
    if (ch != '\\') {
      out += ch;
      continue;
    }
    if (c.pos >= c.s.size()) c.fail("unterminated escape");
    switch (const char e = c.s[c.pos++]) {
      case '"': out += '"'; break;
      case '\\': out += '\\'; break;
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case 'r': out += '\r'; break;
      default: c.fail(std::string("unsupported escape \\") + e);
    }
  }
  c.fail("unterminated string");
}

std::string parse_literal_string(Cursor& c) {
  const auto close = c.s.find('\'', c.pos + 1);
  if (close == std::string::npos) c.fail("unterminated literal string");
  std::string out = c.s.substr(c.pos + 1, close - c.pos - 1);
  c.pos = close + 1;
  return out;
}

std::string parse_string(Cursor& c) {
  if (c.s[c.pos] == '"') return parse_basic_string(c);
  return parse_literal_string(c);
}

TomlValue parse_scalar(Cursor& c) {
  if (c.pos >= c.s.size()) c.fail("missing value");
  const char first = c.s[c.pos];
  if (first == '"' || first == '\'') return parse_string(c);
  const auto start = c.pos;
  while (c.pos < c.s.size() && c.s[c.pos] != ' ' && c.s[c.pos] != '\t' && c.s[c.pos] != '#' && c.s[c.pos] != ',' &&
         c.s[c.pos] != ']')
    ++c.pos;
  std::string tok = c.s.substr(start, c.pos - start);
  if (tok == "true") return true;
  if (tok == "false") return false;
  std::string digits;
  for (char ch : tok)
    if (ch != '_') digits += ch;
  if (digits.empty()) c.fail("missing value");
  const bool is_float = digits.find_first_of(".eE") != std::string::npos;
  try {
    std::size_t used = 0;
    if (is_float) {
      const double v = std::stod(digits, &used);
      if (used == digits.size()) return v;
    } else {
      const long long v = std::stoll(digits, &used, 10);
      if (used == digits.size()) return static_cast<std::int64_t>(v);
    }
  } catch (const std::exception&) {
  }
  c.fail("cannot parse value \"" + tok + "\"");
}

TomlValue parse_value(Cursor& c) {
  if (c.pos < c.s.size() && c.s[c.pos] == '[') {
    ++c.pos;
    std::vector<std::string> items;
    while (true) {
      c.skip_ws();
      if (c.pos >= c.s.size()) c.fail("unterminated array");
      if (c.s[c.pos] == ']') {
        ++c.pos;
        return items;
      }
      if (c.s[c.pos] != '"' && c.s[c.pos] != '\'') c.fail("arrays may only hold strings");
      items.push_back(parse_string(c));
      c.skip_ws();
      if (c.pos < c.s.size() && c.s[c.pos] == ',') ++c.pos;
      else if (c.pos < c.s.size() && c.s[c.pos] != ']') c.fail("expected ',' or ']' in array");
    }
  }
  return parse_scalar(c);
}

}  // namespace

TomlDocument parse_toml(const std::string& text) {
  TomlDocument doc;
  doc[""];
  std::string section;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    Cursor c{line, 0, line_no};
    if (c.at_end_or_comment()) continue;
    if (line[c.pos] == '[') {
      const auto close = line.find(']', c.pos);
      if (close == std::string::npos) c.fail("unterminated section header");
      section = line.substr(c.pos + 1, close - c.pos - 1);
      if (section.empty()) c.fail("empty section name");
      for (char ch : section)
        if (!bare_key_char(ch)) c.fail("bad section name \"" + section + "\"");
      if (doc.count(section) && section != "") c.fail("duplicate section [" + section + "]");
      doc[section];
      c.pos = close + 1;
      if (!c.at_end_or_comment()) c.fail("trailing text after section header");
      continue;
    }
    const auto key_start = c.pos;
    while (c.pos < line.size() && bare_key_char(line[c.pos])) ++c.pos;
    const std::string key = line.substr(key_start, c.pos - key_start);
    if (key.empty()) c.fail("expected a key");
    c.skip_ws();
    if (c.pos >= line.size() || line[c.pos] != '=') c.fail("expected '=' after key \"" + key + "\"");
    ++c.pos;
    c.skip_ws();
    TomlValue value = parse_value(c);
    if (!c.at_end_or_comment()) c.fail("trailing text after value of \"" + key + "\"");
    if (!doc[section].emplace(key, std::move(value)).second) c.fail("duplicate key \"" + key + "\"");
  }
  return doc;
}

void RunConfig::validate() const {
  if (max_debug_iters < 1) throw ConfigError("max_debug_iters must be >= 1");
  if (max_regen < 1) throw ConfigError("max_regen must be >= 1");
  if (amg_max_attempts < 1) throw ConfigError("amg_max_attempts must be >= 1");
  if (eval_workers < 1) throw ConfigError("eval workers must be >= 1");
  if (!(temperature >= 0.0 && temperature <= 2.0)) throw ConfigError("temperature must be in [0, 2]");
}

llm::BackendHandle RunConfig::backend_handle() const {
  auto h = backend;
  h.temperature = temperature;
  return h;
}

verification::ToolchainConfig RunConfig::toolchain_config() const {
  auto t = toolchain;
  if (t.workdir.empty()) t.workdir = out_dir / "work";
  return t;
}

ojson RunConfig::to_json() const {
  ojson j;
  j["spec_path"] = spec_path.string();
  j["out_dir"] = out_dir.string();
  j["backend"] = {{"kind", backend.kind == llm::BackendKind::Http ? "http" : "mock"},
                  {"endpoint", backend.endpoint},
                  {"model", backend.model_name},
                  {"max_retries", backend.max_retries},
                  {"timeout_s", backend.timeout_s},
                  {"backoff_ms", backend.backoff_ms},
                  {"script", backend.script_path}};
  j["toolchain"] = {{"kind", toolchain.kind == verification::ToolchainKind::Stub ? "stub" : "command"},
                    {"compile_cmd", toolchain.compile_cmd_template},
                    {"run_cmd", toolchain.run_cmd_template},
                    {"timeout_s", toolchain.timeout_s},
                    {"workdir", toolchain.workdir.string()},
                    {"testbench_dir", toolchain.testbench_dir},
                    {"mismatch_regex", toolchain.mismatch_regex},
                    {"stub_script", toolchain.stub_script}};
  j["kb_path"] = kb_path.string();
  j["prompt_dir"] = prompt_dir.string();
  j["max_debug_iters"] = max_debug_iters;
  j["max_regen"] = max_regen;
  j["amg_max_attempts"] = amg_max_attempts;
  j["temperature"] = temperature;
  j["eval_workers"] = eval_workers;
  return j;
}

RunConfig run_config_from_json(const json& j) {
  try {
    RunConfig c;
    c.spec_path = j.at("spec_path").get<std::string>();
    c.out_dir = j.at("out_dir").get<std::string>();
    const auto& b = j.at("backend");
    c.backend.kind = b.at("kind").get<std::string>() == "http" ? llm::BackendKind::Http : llm::BackendKind::Mock;
    c.backend.endpoint = b.at("endpoint").get<std::string>();
    c.backend.model_name = b.at("model").get<std::string>();
    c.backend.max_retries = b.at("max_retries").get<int>();
    c.backend.timeout_s = b.at("timeout_s").get<double>();
    c.backend.backoff_ms = b.at("backoff_ms").get<int>();
    c.backend.script_path = b.at("script").get<std::string>();
    const auto& t = j.at("toolchain");
    c.toolchain.kind =
        t.at("kind").get<std::string>() == "stub" ? verification::ToolchainKind::Stub : verification::ToolchainKind::Command;
    c.toolchain.compile_cmd_template = t.at("compile_cmd").get<std::string>();
    c.toolchain.run_cmd_template = t.at("run_cmd").get<std::string>();
    c.toolchain.timeout_s = t.at("timeout_s").get<double>();
    c.toolchain.workdir = t.at("workdir").get<std::string>();
    c.toolchain.testbench_dir = t.at("testbench_dir").get<std::string>();
    c.toolchain.mismatch_regex = t.at("mismatch_regex").get<std::string>();
    c.toolchain.stub_script = t.at("stub_script").get<std::string>();
    c.kb_path = j.at("kb_path").get<std::string>();
    c.prompt_dir = j.at("prompt_dir").get<std::string>();
    c.max_debug_iters = j.at("max_debug_iters").get<int>();
    c.max_regen = j.at("max_regen").get<int>();
    c.amg_max_attempts = j.at("amg_max_attempts").get<int>();
    c.temperature = j.at("temperature").get<double>();
    c.eval_workers = j.at("eval_workers").get<unsigned>();
    return c;
  } catch (const json::exception& e) {
    throw CorruptArtifactError(std::string("malformed run config: ") + e.what());
  }
}

namespace {

class SectionReader {
public:
  SectionReader(const TomlDocument& doc, const std::string& section, fs::path base)
      : section_(section), base_(std::move(base)) {
    if (auto it = doc.find(section); it != doc.end()) values_ = &it->second;
  }

  ~SectionReader() noexcept(false) {
    if (!values_ || std::uncaught_exceptions()) return;
    for (const auto& [key, _] : *values_)
      if (!seen_.count(key)) throw ConfigError("unknown config key " + where(key));
  }

  void string(const char* key, std::string& out) {
    if (const auto* v = find(key)) out = as<std::string>(key, *v);
  }
  void path(const char* key, fs::path& out) {
    if (const auto* v = find(key)) out = resolve(as<std::string>(key, *v));
  }
  void path_string(const char* key, std::string& out) {
    if (const auto* v = find(key)) out = resolve(as<std::string>(key, *v)).string();
  }
  void integer(const char* key, int& out) {
    if (const auto* v = find(key)) out = static_cast<int>(as<std::int64_t>(key, *v));
  }
  void number(const char* key, double& out) {
    if (const auto* v = find(key)) {
      if (const auto* i = std::get_if<std::int64_t>(v)) out = static_cast<double>(*i);
      else out = as<double>(key, *v);
    }
  }

private:
  const TomlValue* find(const char* key) {
    if (!values_) return nullptr;
    seen_.insert(key);
    auto it = values_->find(key);
    return it == values_->end() ? nullptr : &it->second;
  }
  template <typename T>
  const T& as(const char* key, const TomlValue& v) const {
    if (const auto* p = std::get_if<T>(&v)) return *p;
    throw ConfigError("config key " + where(key) + " has the wrong type");
  }
  fs::path resolve(const std::string& p) const {
    if (p.empty()) return {};
    fs::path path(p);
    return path.is_absolute() || base_.empty() ? path : base_ / path;
  }
  std::string where(const std::string& key) const { return section_.empty() ? key : section_ + "." + key; }

  std::string section_;
  fs::path base_;
  const std::map<std::string, TomlValue>* values_ = nullptr;
  std::set<std::string> seen_;
};

}  // namespace

void apply_toml(RunConfig& cfg, const TomlDocument& doc, const fs::path& base) {
  for (const auto& [section, _] : doc)
    if (section != "" && section != "backend" && section != "toolchain" && section != "debugger" && section != "limits")
      throw ConfigError("unknown config section [" + section + "]");
  {
    SectionReader top(doc, "", base);
    top.path("spec", cfg.spec_path);
    top.path("out", cfg.out_dir);
    top.path("prompt_dir", cfg.prompt_dir);
  }
  {
    SectionReader b(doc, "backend", base);
    std::string kind;
    b.string("kind", kind);
    if (kind == "http") cfg.backend.kind = llm::BackendKind::Http;
    else if (kind == "mock") cfg.backend.kind = llm::BackendKind::Mock;
    else if (!kind.empty()) throw ConfigError("backend.kind must be \"http\" or \"mock\"");
    b.string("endpoint", cfg.backend.endpoint);
    b.string("model", cfg.backend.model_name);
    b.number("temperature", cfg.temperature);
    b.integer("max_retries", cfg.backend.max_retries);
    b.number("timeout_s", cfg.backend.timeout_s);
    b.integer("backoff_ms", cfg.backend.backoff_ms);
    b.path_string("script", cfg.backend.script_path);
  }
  {
    SectionReader t(doc, "toolchain", base);
    std::string kind;
    t.string("kind", kind);
    if (kind == "stub") cfg.toolchain.kind = verification::ToolchainKind::Stub;
    else if (kind == "command") cfg.toolchain.kind = verification::ToolchainKind::Command;
    else if (!kind.empty()) throw ConfigError("toolchain.kind must be \"command\" or \"stub\"");
    t.string("compile_cmd", cfg.toolchain.compile_cmd_template);
    t.string("run_cmd", cfg.toolchain.run_cmd_template);
    t.number("timeout_s", cfg.toolchain.timeout_s);
    t.path("workdir", cfg.toolchain.workdir);
    t.path_string("testbench_dir", cfg.toolchain.testbench_dir);
    t.string("mismatch_regex", cfg.toolchain.mismatch_regex);
    t.path_string("stub_script", cfg.toolchain.stub_script);
  }
  {
    SectionReader d(doc, "debugger", base);
    d.path("kb_path", cfg.kb_path);
    d.integer("max_iters", cfg.max_debug_iters);
  }
  {
    SectionReader l(doc, "limits", base);
    l.integer("max_debug_iters", cfg.max_debug_iters);
    l.integer("max_regen", cfg.max_regen);
    l.integer("amg_max_attempts", cfg.amg_max_attempts);
    int workers = static_cast<int>(cfg.eval_workers);
    l.integer("eval_workers", workers);
    if (workers < 1) throw ConfigError("limits.eval_workers must be >= 1");
    cfg.eval_workers = static_cast<unsigned>(workers);
  }
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg;
  apply_toml(cfg, parse_toml(ss.str()), fs::absolute(path).parent_path());
  return cfg;
}

}  // namespace forge::config

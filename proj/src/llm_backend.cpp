#include "forge/llm_backend.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "forge/error.hpp"

namespace forge::llm {

using json = nlohmann::json;

std::string to_string(AgentRole role) {
  return "agent" + std::to_string(static_cast<int>(role) + 1);
}

AgentRole agent_role_from_string(const std::string& s) {
  if (s.size() == 6 && s.rfind("agent", 0) == 0 && s[5] >= '1' && s[5] <= '7')
    return static_cast<AgentRole>(s[5] - '1');
  throw Error("unknown agent role \"" + s + "\"");
}

std::string to_string(MessageRole role) {
  switch (role) {
    case MessageRole::System: return "system";
    case MessageRole::User: return "user";
    case MessageRole::Assistant: return "assistant";
  }
  return "user";
}

void BackendHandle::apply_environment() {
  if (endpoint.empty()) {
    if (const char* base = std::getenv("FORGE_API_BASE")) endpoint = base;
  }
  if (api_key.empty()) {
    if (const char* key = std::getenv("FORGE_API_KEY")) api_key = key;
  }
}

json build_request_body(const BackendHandle& handle, const std::vector<Message>& history) {
  json messages = json::array();
  for (const auto& m : history) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return json{{"model", handle.model_name}, {"messages", std::move(messages)}, {"temperature", handle.temperature}};
}

std::string Backend::complete(AgentRole role, const std::string& session_id, const std::vector<Message>& history) {
  json body = build_request_body(handle_, history);
  std::string last_user;
  for (auto it = history.rbegin(); it != history.rend(); ++it) {
    if (it->role == MessageRole::User) {
      last_user = it->content;
      break;
    }
  }
  std::string reply = do_complete(body, last_user);
  Exchange ex{role, session_id, std::move(body), reply};
  Observer obs;
  {
    std::lock_guard lock(mutex_);
    transcript_.push_back(ex);
    obs = observer_;
  }
  if (obs) obs(ex);
  return reply;
}

std::vector<Exchange> Backend::transcript() const {
  std::lock_guard lock(mutex_);
  return transcript_;
}

void Backend::set_observer(Observer observer) {
  std::lock_guard lock(mutex_);
  observer_ = std::move(observer);
}

std::string Backend::next_session_id(AgentRole role) {
  return to_string(role) + "-" + std::to_string(++session_counter_);
}

std::vector<ScriptEntry> parse_mock_script(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw BackendUnavailableError(std::string("mock script is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw BackendUnavailableError("mock script must be a JSON array");
  std::vector<ScriptEntry> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& e = doc[i];
    if (!e.is_object() || !e.contains("reply") || !e["reply"].is_string())
      throw BackendUnavailableError("mock script entry " + std::to_string(i) + " needs a string \"reply\"");
    ScriptEntry entry;
    entry.reply = e["reply"].get<std::string>();
    if (e.contains("match") && !e["match"].is_null()) {
      if (!e["match"].is_string())
        throw BackendUnavailableError("mock script entry " + std::to_string(i) + ": \"match\" must be a string");
      entry.match = e["match"].get<std::string>();
    }
    out.push_back(std::move(entry));
  }
  return out;
}

MockBackend::MockBackend(BackendHandle handle, std::vector<ScriptEntry> entries) : Backend(std::move(handle)) {
  slots_.reserve(entries.size());
  for (auto& e : entries) {
    Slot slot;
    if (e.match) {
      try {
        slot.pattern.emplace(*e.match, std::regex::ECMAScript);
      } catch (const std::regex_error& err) {
        throw BackendUnavailableError("bad mock match regex \"" + *e.match + "\": " + err.what());
      }
    }
    slot.reply = std::move(e.reply);
    slots_.push_back(std::move(slot));
  }
}

std::size_t MockBackend::remaining() const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& s : slots_) n += s.consumed ? 0 : 1;
  return n;
}

std::string MockBackend::do_complete(const json&, const std::string& last_user_message) {
  std::lock_guard lock(mutex_);
  for (auto& s : slots_) {
    if (s.consumed) continue;
    if (s.pattern && !std::regex_search(last_user_message, *s.pattern)) continue;
    s.consumed = true;
    return s.reply;
  }
  throw ScriptExhaustedError("mock script has no entry for message: " + last_user_message.substr(0, 160));
}

namespace {

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path;
};

std::optional<ParsedUrl> parse_url(const std::string& url) {
  static const std::regex re(R"(^(https?)://([A-Za-z0-9.\-]+|\[[0-9a-fA-F:]+\])(:\d{1,5})?(/[^\s]*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) return std::nullopt;
  ParsedUrl out;
  out.scheme_host_port = m[1].str() + "://" + m[2].str() + m[3].str();
  std::string path = m[4].matched ? m[4].str() : "";
  while (!path.empty() && path.back() == '/') path.pop_back();
  const std::string suffix = "/chat/completions";
  if (path.size() < suffix.size() || path.compare(path.size() - suffix.size(), suffix.size(), suffix) != 0)
    path += suffix;
  out.path = path;
  return out;
}

bool is_transient(int status) { return status == 429 || status >= 500; }

}  // namespace

HttpBackend::HttpBackend(BackendHandle handle) : Backend(std::move(handle)) {
  auto parsed = parse_url(this->handle().endpoint);
  if (!parsed) throw BackendUnavailableError("invalid backend endpoint URL \"" + this->handle().endpoint + "\"");
  scheme_host_port_ = parsed->scheme_host_port;
  path_ = parsed->path;
}

std::string HttpBackend::do_complete(const json& body, const std::string&) {
  const auto& h = handle();
  httplib::Client client(scheme_host_port_);
  const auto timeout = std::chrono::milliseconds(static_cast<long>(h.timeout_s * 1000));
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  httplib::Headers headers;
  if (!h.api_key.empty()) headers.emplace("Authorization", "Bearer " + h.api_key);

  const std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 0; attempt <= h.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(h.backoff_ms << (attempt - 1)));
    ++requests_sent_;
    auto res = client.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (is_transient(res->status)) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) throw BackendError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 400));
    try {
      const json reply = json::parse(res->body);
      const auto& content = reply.at("choices").at(0).at("message").at("content");
      if (!content.is_string()) throw BackendError("choices[0].message.content is not a string");
      return content.get<std::string>();
    } catch (const json::exception& e) {
      throw BackendError(std::string("unexpected chat-completion response: ") + e.what());
    }
  }
  throw BackendError("backend failed after " + std::to_string(h.max_retries + 1) + " attempts: " + last_error);
}

std::shared_ptr<Backend> make_backend(const BackendHandle& handle) {
  if (handle.temperature < 0 || handle.temperature > 2)
    throw BackendUnavailableError("temperature must be within [0, 2]");
  if (handle.kind == BackendKind::Http) return std::make_shared<HttpBackend>(handle);
  if (handle.script_path.empty()) throw BackendUnavailableError("mock backend requires a script path");
  std::ifstream in(handle.script_path);
  if (!in) throw BackendUnavailableError("cannot read mock script " + handle.script_path);
  std::stringstream ss;
  ss << in.rdbuf();
  return std::make_shared<MockBackend>(handle, parse_mock_script(ss.str()));
}

ChatSession::ChatSession(std::shared_ptr<Backend> backend, AgentRole role, std::string system_prompt)
    : backend_(std::move(backend)), role_(role) {
  if (!backend_) throw BackendUnavailableError("session opened without a backend");
  id_ = backend_->next_session_id(role_);
  history_.push_back({MessageRole::System, std::move(system_prompt)});
}

std::string ChatSession::send(const std::string& user_message) {
  history_.push_back({MessageRole::User, user_message});
  std::string reply;
  try {
    reply = backend_->complete(role_, id_, history_);
  } catch (...) {
    history_.pop_back();
    throw;
  }
  history_.push_back({MessageRole::Assistant, reply});
  return reply;
}

ChatSession open_session(const std::shared_ptr<Backend>& backend, AgentRole role, const std::string& system_prompt) {
  return ChatSession(backend, role, system_prompt);
}

}  // namespace forge::llm

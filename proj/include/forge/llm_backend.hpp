#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace forge::llm {

enum class BackendKind { Http, Mock };

enum class AgentRole {
  Agent1,  // module IR generation
  Agent2,  // IR equivalence check
  Agent3,  // DAG construction
  Agent4,  // Inter refinement, functional partition, interaction analysis
  Agent5,  // model generation
  Agent6,  // completeness check
  Agent7,  // debugger
};

std::string to_string(AgentRole role);
AgentRole agent_role_from_string(const std::string& s);

struct BackendHandle {
  BackendKind kind = BackendKind::Mock;
  std::string endpoint;   // http only, e.g. "http://127.0.0.1:8080/v1"
  std::string model_name = "gpt-4o";
  double temperature = 0.3;
  int max_retries = 3;    // retries after the first attempt
  double timeout_s = 120;
  int backoff_ms = 500;   // first retry delay; doubles per retry
  std::string script_path;  // mock only
  std::string api_key;

  /// Fills endpoint/api_key from FORGE_API_BASE / FORGE_API_KEY when unset.
  void apply_environment();
};

enum class MessageRole { System, User, Assistant };

struct Message {
  MessageRole role;
  std::string content;
};

std::string to_string(MessageRole role);

/// One completed request, as the backend saw it.
struct Exchange {
  AgentRole role;
  std::string session_id;
  nlohmann::json request_body;  // {model, messages, temperature}
  std::string reply;
};

/// Shared request body shape for every backend kind.
nlohmann::json build_request_body(const BackendHandle& handle, const std::vector<Message>& history);

/// A backend is shareable across sessions and threads.
class Backend {
public:
  explicit Backend(BackendHandle handle) : handle_(std::move(handle)) {}
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  const BackendHandle& handle() const noexcept { return handle_; }

  /// Sends the full history and returns the assistant reply.
  std::string complete(AgentRole role, const std::string& session_id, const std::vector<Message>& history);

  /// Every exchange so far, in completion order.
  std::vector<Exchange> transcript() const;

  using Observer = std::function<void(const Exchange&)>;
  void set_observer(Observer observer);

  std::string next_session_id(AgentRole role);

protected:
  virtual std::string do_complete(const nlohmann::json& body, const std::string& last_user_message) = 0;

private:
  BackendHandle handle_;
  mutable std::mutex mutex_;
  std::vector<Exchange> transcript_;
  Observer observer_;
  std::atomic<int> session_counter_{0};
};

struct ScriptEntry {
  std::optional<std::string> match;  // regex searched in the user message
  std::string reply;
};

/// Parses a mock script document: JSON array of {match?, reply}.
std::vector<ScriptEntry> parse_mock_script(const std::string& text);

/// Replays scripted replies. The first unconsumed entry whose `match` is
/// absent or found in the user message is used; keyed entries that do not
/// match stay queued.
class MockBackend final : public Backend {
public:
  MockBackend(BackendHandle handle, std::vector<ScriptEntry> entries);

  std::size_t remaining() const;

protected:
  std::string do_complete(const nlohmann::json& body, const std::string& last_user_message) override;

private:
  struct Slot {
    std::optional<std::regex> pattern;
    std::string reply;
    bool consumed = false;
  };
  mutable std::mutex mutex_;
  std::vector<Slot> slots_;
};

/// Chat-completion client: POST {endpoint}/chat/completions and read
/// choices[0].message.content. Transient failures (no response, 429, 5xx)
/// are retried with exponential backoff.
class HttpBackend final : public Backend {
public:
  explicit HttpBackend(BackendHandle handle);

  int requests_sent() const noexcept { return requests_sent_; }

protected:
  std::string do_complete(const nlohmann::json& body, const std::string& last_user_message) override;

private:
  std::string scheme_host_port_;
  std::string path_;
  std::atomic<int> requests_sent_{0};
};

/// Builds the backend selected by `handle.kind`; loads the mock script.
/// Throws BackendUnavailableError for a bad URL or unreadable script.
std::shared_ptr<Backend> make_backend(const BackendHandle& handle);

class ChatSession {
public:
  ChatSession(std::shared_ptr<Backend> backend, AgentRole role, std::string system_prompt);

  /// Appends the user message, obtains and appends the reply, returns it.
  std::string send(const std::string& user_message);

  const std::string& id() const noexcept { return id_; }
  AgentRole role() const noexcept { return role_; }
  const std::vector<Message>& history() const noexcept { return history_; }
  Backend& backend() const noexcept { return *backend_; }

private:
  std::shared_ptr<Backend> backend_;
  AgentRole role_;
  std::string id_;
  std::vector<Message> history_;
};

ChatSession open_session(const std::shared_ptr<Backend>& backend, AgentRole role, const std::string& system_prompt);

}  // namespace forge::llm

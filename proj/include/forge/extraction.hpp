#pragma once

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/error.hpp"
#include "forge/llm_backend.hpp"
#include "forge/prompts.hpp"

// Reply parsing shared by every agent: fenced blocks in, structures out,
// with bounded "please repair" follow-ups.
namespace forge::extract {

inline constexpr int kJsonRepairRetries = 2;
inline constexpr int kCodeRepairRetries = 1;

struct FencedBlock {
  std::string info;  // text after the opening ``` (e.g. "cpp Adder.cpp")
  std::string body;
};

std::vector<FencedBlock> fenced_blocks(const std::string& text);

/// First ```json block, else first fenced block, else the whole reply.
nlohmann::json parse_json_reply(const std::string& reply);

/// Sends `prompt`, converts the reply with `convert`; on a parse or schema
/// failure sends a repair follow-up, up to `retries` times, then throws
/// ExtractionError.
template <typename T>
T request_json(llm::ChatSession& session, const std::string& prompt,
               const std::function<T(const nlohmann::json&)>& convert, int retries = kJsonRepairRetries) {
  std::string reply = session.send(prompt);
  for (int attempt = 0;; ++attempt) {
    std::string error;
    try {
      return convert(parse_json_reply(reply));
    } catch (const nlohmann::json::exception& e) {
      error = e.what();
    } catch (const SchemaError& e) {
      error = e.what();
    } catch (const ValidationError& e) {
      error = e.what();
    } catch (const ExtractionError& e) {
      error = e.what();
    }
    if (attempt >= retries) throw ExtractionError("unusable JSON reply after " + std::to_string(retries) +
                                                  " repair attempts: " + error);
    reply = session.send(prompts::render("repair_json", {{"error", error}}));
  }
}

/// Body of the first non-empty fenced block, with the same repair policy.
std::string request_code(llm::ChatSession& session, const std::string& prompt, int retries = kCodeRepairRetries);

/// Pseudocode may come fenced or bare; empty replies are repaired once.
std::string request_text(llm::ChatSession& session, const std::string& prompt, int retries = kCodeRepairRetries);

}  // namespace forge::extract

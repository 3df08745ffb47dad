#include "forge/extraction.hpp"

#include <sstream>

namespace forge::extract {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::optional<std::string> first_nonempty_block(const std::string& reply) {
  for (const auto& b : fenced_blocks(reply)) {
    if (!trim(b.body).empty()) return b.body;
  }
  return std::nullopt;
}

}  // namespace

std::vector<FencedBlock> fenced_blocks(const std::string& text) {
  std::vector<FencedBlock> out;
  std::istringstream in(text);
  std::string line;
  bool inside = false;
  FencedBlock current;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto lead = line.find_first_not_of(" \t");
    const bool fence = lead != std::string::npos && line.compare(lead, 3, "```") == 0;
    if (!inside && fence) {
      inside = true;
      current = FencedBlock{trim(line.substr(lead + 3)), {}};
    } else if (inside && fence && trim(line.substr(lead)) == "```") {
      inside = false;
      out.push_back(std::move(current));
    } else if (inside) {
      current.body += line;
      current.body += '\n';
    }
  }
  return out;
}

nlohmann::json parse_json_reply(const std::string& reply) {
  const auto blocks = fenced_blocks(reply);
  for (const auto& b : blocks) {
    if (b.info.rfind("json", 0) == 0) return nlohmann::json::parse(b.body);
  }
  if (!blocks.empty()) return nlohmann::json::parse(blocks.front().body);
  return nlohmann::json::parse(reply);
}

std::string request_code(llm::ChatSession& session, const std::string& prompt, int retries) {
  std::string reply = session.send(prompt);
  for (int attempt = 0;; ++attempt) {
    if (auto code = first_nonempty_block(reply)) return *code;
    if (attempt >= retries) throw ExtractionError("no code block in reply after " + std::to_string(retries) +
                                                  " repair attempts");
    reply = session.send(prompts::render("repair_code", {{"error", "missing or empty fenced block"}}));
  }
}

std::string request_text(llm::ChatSession& session, const std::string& prompt, int retries) {
  std::string reply = session.send(prompt);
  for (int attempt = 0;; ++attempt) {
    if (auto block = first_nonempty_block(reply)) return *block;
    if (!trim(reply).empty()) return trim(reply) + "\n";
    if (attempt >= retries) throw ExtractionError("empty reply after " + std::to_string(retries) + " repair attempts");
    reply = session.send(prompts::render("repair_code", {{"error", "empty reply"}}));
  }
}

}  // namespace forge::extract

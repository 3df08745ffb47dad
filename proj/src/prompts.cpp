#include "forge/prompts.hpp"

#include <fstream>
#include <mutex>
#include <sstream>

#include "forge/error.hpp"
#include "prompt_assets.hpp"  // generated at configure time

namespace forge::prompts {

namespace {

struct Library {
  std::mutex mutex;
  std::map<std::string, std::string> templates;

  Library() {
    for (const auto& asset : kPromptAssets) templates.emplace(asset.name, asset.text);
  }
};

Library& library() {
  static Library lib;
  return lib;
}

}  // namespace

const std::string& get(const std::string& name) {
  auto& lib = library();
  std::lock_guard lock(lib.mutex);
  auto it = lib.templates.find(name);
  if (it == lib.templates.end()) throw Error("unknown prompt template \"" + name + "\"");
  return it->second;
}

void load_overrides(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("prompt directory not found: " + dir.string());
  auto& lib = library();
  std::lock_guard lock(lib.mutex);
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path());
    std::stringstream ss;
    ss << in.rdbuf();
    lib.templates[entry.path().stem().string()] = ss.str();
  }
}

std::string render(const std::string& tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size() * 2);
  std::size_t pos = 0;
  while (true) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string::npos) {
      out.append(tmpl, pos, std::string::npos);
      break;
    }
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string::npos) {
      out.append(tmpl, pos, std::string::npos);
      break;
    }
    out.append(tmpl, pos, open - pos);
    const auto key = tmpl.substr(open + 2, close - open - 2);
    auto it = values.find(key);
    if (it == values.end()) throw Error("prompt placeholder {{" + key + "}} has no value");
    out += it->second;
    pos = close + 2;
  }
  return out;
}

}  // namespace forge::prompts

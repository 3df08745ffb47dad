#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "forge/design_ir.hpp"
#include "forge/llm_backend.hpp"

namespace fs = std::filesystem;

namespace forge::test {

namespace fs = std::filesystem;

inline fs::path fixture(const std::string& rel) { return fs::path(FORGE_FIXTURE_DIR) / rel; }

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string fence(const std::string& info, const std::string& body) {
  return "```" + info + "\n" + body + (body.empty() || body.back() == '\n' ? "" : "\n") + "```";
}

/// Removed on destruction.
class TempDir {
public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() /
            ("forge_test_" + std::to_string(::getpid()) + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const noexcept { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

private:
  fs::path path_;
};

inline std::shared_ptr<llm::MockBackend> mock(std::vector<llm::ScriptEntry> entries) {
  return std::make_shared<llm::MockBackend>(llm::BackendHandle{}, std::move(entries));
}

inline std::shared_ptr<llm::MockBackend> mock_from_file(const fs::path& script) {
  return mock(llm::parse_mock_script(read_file(script)));
}

/// The Conv2D fixture entry whose match pattern starts with `prefix`.
inline llm::ScriptEntry conv2d_entry(const std::string& prefix) {
  for (auto& e : llm::parse_mock_script(read_file(fixture("conv2d/mock_script.json"))))
    if (e.match && e.match->rfind(prefix, 0) == 0) return e;
  throw std::runtime_error("no fixture entry for " + prefix);
}

/// Last user message of every recorded request.
inline std::vector<std::string> prompts_sent(const llm::Backend& backend) {
  std::vector<std::string> out;
  for (const auto& e : backend.transcript()) out.push_back(e.request_body["messages"].back()["content"].get<std::string>());
  return out;
}

inline ir::DesignArchitectureGraph conv2d_dag() { return ir::parse_design_ir(read_file(fixture("conv2d/design.json"))); }

inline ir::PortDecl port(const std::string& name, ir::PortDirection dir, std::uint32_t width) {
  return ir::PortDecl{name, dir, width, ""};
}

/// Leaf module with ports a, b (inputs) and y (output) and one point.
inline ir::ModuleIR leaf_ir(const std::string& name) {
  ir::ModuleIR m;
  m.module_name = name;
  m.description = name + " leaf";
  m.ports = {port("a", ir::PortDirection::Input, 8), port("b", ir::PortDirection::Input, 8),
             port("y", ir::PortDirection::Output, 8)};
  m.functional_points = {ir::FunctionalPoint{"fp1", "combine", "y = f(a, b)", ir::Timing::Combinational, {"a", "b", "y"}}};
  return m;
}

/// Random design over `types` module types M0..M(types-1) rooted at M0.
/// Every type below the root gets a parent of lower index; some types are
/// instantiated more than once, under one parent or several.
inline ir::DesignArchitectureGraph random_design(std::mt19937& rng, int types) {
  std::vector<ir::ModuleIR> modules;
  for (int i = 0; i < types; ++i) modules.push_back(leaf_ir("M" + std::to_string(i)));
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto add_child = [&](int parent, int child) {
    auto& kids = modules[parent].children_modules;
    kids.push_back({"u" + std::to_string(child) + "_" + std::to_string(kids.size()), "M" + std::to_string(child)});
  };
  for (int i = 1; i < types; ++i) {
    const int parent = pick(0, i - 1);
    add_child(parent, i);
    if (pick(0, 2) == 0) add_child(parent, i);
    if (i > 1 && pick(0, 3) == 0) add_child(pick(0, i - 1), i);
  }
  ir::DesignArchitectureGraph g;
  g.design_name = "M0";
  for (auto& m : modules) g.module_irs[m.module_name] = std::move(m);
  return g;
}

}  // namespace forge::test

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/llm_backend.hpp"
#include "forge/verification.hpp"

namespace forge::config {

/// Value of a TOML-subset key: string, integer, float, bool or an array of
/// strings.
using TomlValue = std::variant<std::string, std::int64_t, double, bool, std::vector<std::string>>;

/// section -> key -> value. Keys before the first header live in section "".
using TomlDocument = std::map<std::string, std::map<std::string, TomlValue>>;

/// Parses `[section]` headers, `key = value` lines and `#` comments.
/// Throws ConfigError with the offending line number.
TomlDocument parse_toml(const std::string& text);

struct RunConfig {
  std::filesystem::path spec_path;
  std::filesystem::path out_dir;
  llm::BackendHandle backend;
  verification::ToolchainConfig toolchain;  // workdir defaults to <out>/work
  std::filesystem::path kb_path;
  std::filesystem::path prompt_dir;  // optional template overrides
  int max_debug_iters = 6;
  int max_regen = 3;
  int amg_max_attempts = 3;
  double temperature = 0.3;
  unsigned eval_workers = 1;

  /// Throws ConfigError on a threshold below 1 or a temperature outside
  /// [0, 2]. Backend and toolchain settings are checked when first used.
  void validate() const;

  /// The backend handle with the run temperature applied.
  llm::BackendHandle backend_handle() const;
  /// The toolchain config with the workdir resolved.
  verification::ToolchainConfig toolchain_config() const;

  nlohmann::ordered_json to_json() const;
};

RunConfig run_config_from_json(const nlohmann::json& j);

/// Applies a parsed document to `cfg`. Relative paths resolve against `base`.
void apply_toml(RunConfig& cfg, const TomlDocument& doc, const std::filesystem::path& base);

/// Reads a config file over the defaults.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace forge::config

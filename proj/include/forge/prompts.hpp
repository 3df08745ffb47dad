#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace forge::prompts {

/// Template text by asset name (file stem under assets/prompts).
/// Falls back to the built-in copy unless an override directory was loaded.
const std::string& get(const std::string& name);

/// Replaces built-in templates with any <name>.txt found in `dir`.
void load_overrides(const std::filesystem::path& dir);

/// Substitutes every {{key}}. Throws forge::Error for a placeholder with no
/// value.
std::string render(const std::string& tmpl, const std::map<std::string, std::string>& values);

inline std::string render(const char* name, const std::map<std::string, std::string>& values) {
  return render(get(name), values);
}

}  // namespace forge::prompts

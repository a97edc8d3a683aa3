#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace clarigen::cli {

// Flat key = value settings. Every key has a default; a config file and then
// command-line overrides are applied on top, and the resolved values are
// echoed into each run log.
class RunConfig {
 public:
  RunConfig();

  // Lines "key = value"; '#' starts a comment; blank lines are skipped.
  void load_file(const std::filesystem::path& path);
  // "key=value".
  void apply_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  std::string str(const std::string& key) const;
  std::size_t size(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;

  // Resolved values in declaration order, typed.
  nlohmann::ordered_json to_json() const;
  // Keys whose value differs from the default.
  std::vector<std::string> overrides() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace clarigen::cli

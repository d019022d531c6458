#ifndef MBANDIT_CONFIG_H_
#define MBANDIT_CONFIG_H_

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mbandit/runner.h"

namespace mbandit {

// Flattened view of an experiment file. The accepted syntax is a small TOML
// subset: `[table]` headers, `[[policy]]` array entries, `key = value` lines
// with quoted strings, booleans, integers and floats, and `#` comments.
// Keys are stored dotted, e.g. "env.kind" or "policy[1].kind".
class ConfigTable {
 public:
  struct Value {
    std::string text;
    bool quoted = false;
  };

  // Throws ConfigError with "<source>:<line>: ..." context.
  static ConfigTable Parse(std::string_view text, std::string_view source);
  static ConfigTable ParseFile(const std::filesystem::path& path);

  // Applies one "key=value" override. The value may be a TOML literal or a
  // bare word, which is taken as a string. Last write wins. Throws
  // ConfigError for malformed input or an unknown key.
  void ApplyOverride(std::string_view assignment);
  void Set(const std::string& key, Value value);

  const std::map<std::string, Value>& entries() const { return entries_; }
  bool Contains(const std::string& key) const { return entries_.count(key) > 0; }

 private:
  std::map<std::string, Value> entries_;
};

// Throws ConfigError naming the key when it is not part of the schema.
void CheckKnownKey(const std::string& key);

// Converts the table into a validated ExperimentConfig. `default_name` is
// used when run.name is absent.
ExperimentConfig BuildExperimentConfig(const ConfigTable& table,
                                       const std::string& default_name);

// ParseFile + overrides + BuildExperimentConfig, with the file stem as the
// default experiment name.
ExperimentConfig LoadExperimentConfig(const std::filesystem::path& path,
                                      const std::vector<std::string>& overrides);

// Renders a config in the accepted file syntax; parsing the result gives back
// an equal configuration.
std::string RenderConfig(const ExperimentConfig& config);

}  // namespace mbandit

#endif  // MBANDIT_CONFIG_H_

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "d2du/experiment.hpp"
#include "d2du/scenario.hpp"

namespace d2du {

struct RunConfig {
  Scenario scenario;
  Scheme scheme = Scheme::kPrice;
  std::int64_t summary_window = 100;  // final slots averaged in summary.csv
};

struct ConfigIssue {
  std::string path;  // dotted key, empty for document-level problems
  int line = 0;      // 1-based, 0 when unknown
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

/// Formats issues one per line as "source:line: path: message".
std::string format_issues(const std::vector<ConfigIssue>& issues, std::string_view source);

/// `key=value` with a dotted key; sequence elements are addressed by index.
struct Override {
  std::string key;
  std::string value;
};
Override parse_override(std::string_view text);

/// Parses a YAML scenario, applying overrides first. Throws ConfigError
/// listing every problem found.
RunConfig parse_config(std::string_view yaml_text, const std::vector<Override>& overrides = {});
RunConfig load_config_file(const std::string& path, const std::vector<Override>& overrides = {});

/// Fully resolved configuration (explicit gains, loads in bits, powers in
/// watts, noise as a PSD). Parsing it gives back the same RunConfig.
std::string emit_manifest(const RunConfig& config);

double dbm_to_watts(double dbm);

}  // namespace d2du

#pragma once

// Flat `key = value` run configuration. Only explicitly set keys are stored;
// everything else falls back to the per-model defaults when resolved.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pvqml/train.hpp"

namespace pvqml::config {

struct RunConfig {
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) != 0; }
  const std::string& get(const std::string& key) const { return values.at(key); }

  /// Validates key and value; throws ConfigError for unknown keys or values
  /// of the wrong type.
  void set(const std::string& key, const std::string& value);
};

/// Keys in documentation order.
const std::vector<std::string>& known_keys();

/// Blank lines and `#` comments are ignored. Duplicate or unknown keys and
/// lines without `=` raise ConfigError naming the line.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::string& path);

/// default_train_config(model) with the explicit settings applied. `model`
/// wins over the file's `model` key; one of them is required. Architecture
/// keys that do not apply to the chosen model raise ConfigError.
train::TrainConfig resolve_train_config(const RunConfig& cfg,
                                        std::optional<models::ModelKind> model = std::nullopt);

/// Every key that applies to the resolved config, as parseable text.
std::string render_run_config(const train::TrainConfig& cfg);

/// PVQML_SEED when set; ConfigError when it is not an unsigned integer.
std::optional<std::uint64_t> env_seed();

}  // namespace pvqml::config

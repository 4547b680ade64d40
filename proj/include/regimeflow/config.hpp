#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "regimeflow/types.hpp"

namespace regimeflow {

/// Reads an INI file with sections ([kalman], [volatility], [regime],
/// [asymmetry], [backtest], [bootstrap], [ingest], [run]). Unknown sections or
/// keys are rejected with Error(InvalidConfig). Missing keys keep defaults.
RunConfig load_config(const std::filesystem::path& path);

/// Same as load_config but from text already in memory.
RunConfig parse_config(std::string_view text);

/// Applies one `section.key=value` override.
void apply_override(RunConfig& config, std::string_view assignment);

/// Applies REGIMEFLOW_SEED when set. Throws Error(InvalidConfig) if it does
/// not parse as an unsigned integer.
void apply_environment(RunConfig& config);

/// Canonical `section.key -> value` listing of every setting; stable order.
std::map<std::string, std::string> config_entries(const RunConfig& config);

/// INI rendering that parse_config reads back to an equal configuration.
std::string render_config(const RunConfig& config);

/// Every accepted `section.key` name.
std::vector<std::string> config_keys();

}  // namespace regimeflow

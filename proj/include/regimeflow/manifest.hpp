#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace regimeflow::manifest {

inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr std::string_view kManifestName = "run.json";

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
/// Throws Error(Io) if the file cannot be read.
std::string sha256_file(const std::filesystem::path& path);

/// Writes through a sibling temporary file and a rename, so readers never see
/// a partially written artifact.
void write_atomic(const std::filesystem::path& path, std::string_view bytes);

struct Entry {
  std::string command;
  std::string config_hash;
  std::string config_text;
  std::uint64_t seed = 0;
  int threads = 0;
  /// Paths relative to the run directory when inside it, else absolute.
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
};

/// Library versions linked into this build.
std::map<std::string, std::string> library_versions();

/// Merges `entry` into <dir>/run.json (one record per command) and writes it
/// atomically.
void record(const std::filesystem::path& dir, const Entry& entry);

/// Entry for `command`, if recorded.
std::optional<Entry> find(const std::filesystem::path& dir, const std::string& command);

/// Every command recorded in <dir>/run.json.
std::vector<Entry> entries(const std::filesystem::path& dir);

struct Verification {
  bool ok = true;
  std::vector<std::string> problems;  // human-readable, one per mismatch
};

/// Re-hashes every recorded input and output of every command and reports
/// missing or modified files.
Verification verify(const std::filesystem::path& dir);

/// Digest of `path` as recorded by the manifest, relative to `dir` when the
/// file lives under it.
std::string relative_name(const std::filesystem::path& dir, const std::filesystem::path& path);

}  // namespace regimeflow::manifest

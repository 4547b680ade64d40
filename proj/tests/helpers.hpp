#pragma once

#include <doctest.h>

#include <filesystem>
#include <random>
#include <string>

#include "regimeflow/types.hpp"

namespace testing {

/// Fresh scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("rf_" + tag + "_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

template <typename Fn>
regimeflow::ErrorCode error_code_of(Fn&& fn) {
  try {
    fn();
  } catch (const regimeflow::Error& e) {
    return e.code();
  }
  FAIL("expected regimeflow::Error");
  return regimeflow::ErrorCode::Io;
}

}  // namespace testing

#pragma once

#include <filesystem>
#include <random>
#include <string>

namespace testutil {

// Scoped temp directory removed on destruction.
class TmpDir {
 public:
  TmpDir() {
    auto base = std::filesystem::temp_directory_path();
    std::random_device rd;
    dir_ = base / ("sfminv_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(dir_);
  }
  ~TmpDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  TmpDir(const TmpDir&) = delete;
  TmpDir& operator=(const TmpDir&) = delete;

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

}  // namespace testutil

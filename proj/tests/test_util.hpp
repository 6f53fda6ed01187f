#pragma once

#include <filesystem>
#include <random>
#include <string>

namespace feasikit::test {

inline std::filesystem::path make_temp_dir(const std::string& tag) {
  static std::mt19937_64 rng{std::random_device{}()};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("feasikit-" + tag + "-" + std::to_string(rng()));
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path fixture_path(const std::string& name) {
  return std::filesystem::path(FEASIKIT_FIXTURE_DIR) / name;
}

}  // namespace feasikit::test

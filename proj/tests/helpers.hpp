#pragma once

#include <filesystem>
#include <fstream>
#include <string>

namespace testutil {

// Fresh scratch directory per call site; wiped on reuse, not on exit, so a
// failing test leaves its fixtures behind for inspection.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("covidsem_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  f << content;
}

}  // namespace testutil

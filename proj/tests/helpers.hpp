#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "flowline/config.hpp"

namespace flowline::testing {

inline LineConfig uniform_line(int machines, int p, double d, int b) {
  LineConfig line;
  line.machines.assign(static_cast<std::size_t>(machines), MachineConfig{p, d, b});
  return line;
}

// Synchronous five-machine line.
inline LineConfig sync_line() { return uniform_line(5, 2, 0.25, 5); }

// Asynchronous five-machine line.
inline LineConfig async_line() {
  LineConfig line;
  line.machines = {{2, 0.10, 3}, {3, 0.30, 5}, {5, 0.20, 8}, {4, 0.40, 4}, {3, 0.15, 6}};
  return line;
}

// Single machine, three condition levels past new, buffer of one.
inline LineConfig toy_line() {
  LineConfig line = uniform_line(1, 1, 0.25, 1);
  line.breakdown_state = 3;
  return line;
}

inline std::filesystem::path source_dir() { return FLOWLINE_SOURCE_DIR; }

inline std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("flowline_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

}  // namespace flowline::testing

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace flowline::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

/// Evaluation seeds start this far above the configured seed so that they
/// never overlap the training episodes.
inline constexpr std::uint64_t kEvalSeedOffset = 1'000'000'000ULL;

struct Options {
  std::filesystem::path config;
  std::filesystem::path out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> episodes;
  std::string policy = "random";
  std::string criterion = "max_parts";
  int workers = 1;
  std::optional<std::filesystem::path> compare_checkpoint;
};

int cmd_train(const Options& opts, std::ostream& out, std::ostream& err);
int cmd_evaluate(const Options& opts, std::ostream& out, std::ostream& err);
int cmd_sweep(const Options& opts, std::ostream& out, std::ostream& err);
int cmd_oracle(const Options& opts, std::ostream& out, std::ostream& err);

/// Parses `args` (without the program name) and dispatches to a command.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string version();

}  // namespace flowline::cli

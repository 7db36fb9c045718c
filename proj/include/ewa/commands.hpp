#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "ewa/config.hpp"

namespace ewa {

inline constexpr std::string_view kCodeVersion = "0.1.0";

enum class Command { simulate, sweep_beta, sweep_delta, check_moments, check_mgf };

std::string_view to_string(Command cmd);
Command parse_command(std::string_view name);

struct CommandOptions {
  std::filesystem::path out_dir;
  std::optional<std::size_t> trials;  // overrides run.trials
  std::optional<std::uint64_t> seed;  // overrides run.seed
  std::vector<double> grid;           // sweeps: beta in units of sigma^2 V, or delta
  unsigned threads = 0;               // 0 = hardware concurrency
};

// Exit status: 0 when every acceptance flag is set, 2 when some flag is not.
// Errors propagate as exceptions; no output file is left behind.
int execute(Command cmd, const RunConfig& cfg, const CommandOptions& opts);

// Same, but reports errors on `err` and returns 1.
int execute_noexcept(Command cmd, const RunConfig& cfg, const CommandOptions& opts,
                     std::ostream& err);

// Column headers, in order.
const std::vector<std::string_view>& csv_columns(Command cmd);

}  // namespace ewa

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace msbo {

/// Harness configuration, settable from a line-oriented config file
/// (`key = value`, `#` comments, dotted keys for nesting) and/or CLI flags.
/// Flags override file values; unknown keys are rejected.
struct RunConfig {
  std::vector<std::string> functions;
  std::vector<std::string> policies = {"ei"};
  int repeats = 1;
  std::uint64_t seed = 0;
  std::optional<int> iterations;
  std::string out_dir = "results";
  int threads = 1;
  std::vector<int> fantasy_counts;  // override of the per-stage m_t defaults
  bool zero_timing = false;         // write 0 for wall times (byte-reproducible output)

  // fantasy timing micro-benchmark mode
  bool fantasy_bench = false;
  std::vector<int> bench_sizes = {32, 128, 256, 512, 1024};
  std::vector<int> bench_fantasies = {1, 8, 32, 128};
  int bench_reps = 5;

  void validate() const;
};

/// Parses the config file text. Throws std::invalid_argument with the
/// offending key or line on malformed input or unknown keys.
RunConfig parse_config_text(const std::string& text);

/// Serializes a config in the same format; parse(emit(c)) == c.
std::string emit_config_text(const RunConfig& config);

bool operator==(const RunConfig& a, const RunConfig& b);

}  // namespace msbo

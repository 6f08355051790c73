// Configuration-driven experiment runner. One binary, six commands:
//   score            informativeness of one candidate against a dataset
//   active-round     one best-of-c active-learning round
//   strategies       repeated synthetic-pool runs of one sampling strategy
//   dequant-check    low-rank sketch guarantee vs an exact-SVD oracle
//   certify          delta-cover construction + neighborhood classification
//   complexity-table call-count sweeps with fitted log-log slopes
//
// Configs are flat JSON objects with dotted keys ("backend.gamma"); flags
// override file values; every run needs a seed, and all randomness fans out
// from it through named substreams.  Reports are JSON with sorted keys and
// shortest round-trip floats, so identical (config, seed) pairs produce
// byte-identical bytes regardless of where the report is written.

#pragma once

#include <string>
#include <vector>

namespace mf {

// Bumped whenever a report's shape changes incompatibly.
inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kVersionString = "margin-forge 0.1.0";

// Result of one CLI invocation.  exit_code contract:
//   0  success
//   2  configuration / validation error (message says what and names keys)
//   3  runtime failure (report carries a structured "error" object)
// `report` holds the JSON document destined for output_path (stdout when
// empty); it is empty on exit code 2, where only `message` is meaningful.
struct CliOutcome {
  int exit_code = 0;
  std::string report;       // JSON text, trailing newline included
  std::string csv;          // CSV text when the command produces one
  std::string message;      // human-readable error (exit codes 2 and 3)
  std::string output_path;  // resolved report destination ("" = stdout)
  std::string csv_path;     // resolved CSV destination ("" = none)
};

// Runs one command from argv-style arguments (program name excluded).
// Never throws: every failure is folded into the outcome per the exit-code
// contract.  Performs no file writes except reading the config and dataset;
// artifact writing is cli_main's job, which keeps this testable in-process.
CliOutcome run_cli(const std::vector<std::string>& args);

// Process entry point: parse, run, write artifacts, print, return exit code.
int cli_main(int argc, const char* const* argv);

}  // namespace mf

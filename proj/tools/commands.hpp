#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <mtnetkit/config.hpp>
#include <mtnetkit/gradcheck.hpp>
#include <mtnetkit/statecheck.hpp>
#include <mtnetkit/synth.hpp>

namespace mtnet::cli {

enum ExitCode : int { kOk = 0, kFail = 1, kUsage = 2 };

struct SynthOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> frames;
  std::filesystem::path out;
};

struct TrackOptions {
  std::filesystem::path input;  // one sequence, or a directory of sequences
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out;
};

struct EvalOptions {
  std::filesystem::path groundtruth;  // gt file, sequence dir, or root of sequences
  std::filesystem::path results;      // result file or directory of <name>.txt
  std::optional<std::filesystem::path> attributes;
  double tau = 20.0;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
};

struct GradcheckCliOptions {
  std::uint64_t seed = 1;
  int trials = 100;
  GradientFault fault = GradientFault::none;
};

struct StatecheckCliOptions {
  std::optional<std::uint64_t> seed;
  ReferenceFault fault = ReferenceFault::none;
};

// Each command reports progress on `out`, problems on `err`, and returns an
// ExitCode. Configuration mistakes map to kUsage, I/O and data errors to kFail.
int cmd_synth(const SynthOptions& options, std::ostream& out, std::ostream& err);
int cmd_track(const TrackOptions& options, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err);
int cmd_curves(const EvalOptions& options, std::ostream& out, std::ostream& err);
int cmd_gradcheck(const GradcheckCliOptions& options, std::ostream& out, std::ostream& err);
int cmd_statecheck(const StatecheckCliOptions& options, std::ostream& out, std::ostream& err);

/// Worker cap from MTNETKIT_THREADS (unset or invalid: hardware concurrency).
std::size_t worker_limit();

/// Runs the parsed command line; used by main and by in-process tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mtnet::cli

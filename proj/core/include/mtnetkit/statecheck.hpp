#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mtnetkit/update_state.hpp"

namespace mtnet {

/// Deliberate defect in the reference simulator, for mutation tests.
enum class ReferenceFault { none, unstable_off_by_one };

/// Reference template-update simulator. It keeps no counters: each frame's
/// decision is recomputed from the confidence history since the last
/// template change.
std::vector<UpdateAction> reference_actions(std::span<const double> confidences,
                                            const UpdateConfig& config,
                                            ReferenceFault fault = ReferenceFault::none);

/// Actions produced by folding update_step over a trace from the initial state.
std::vector<UpdateAction> replay_actions(std::span<const double> confidences,
                                         const UpdateConfig& config);

struct Counterexample {
  std::vector<double> trace;  // shortest failing prefix
  int steady_frames = 0;
  int unstable_frames = 0;
  UpdateAction expected = UpdateAction::keep;  // reference
  UpdateAction actual = UpdateAction::keep;    // update_step
};

struct StatecheckReport {
  std::size_t traces = 0;        // distinct confidence traces
  std::size_t combinations = 0;  // traces x configurations
  std::size_t mismatches = 0;
  std::optional<Counterexample> counterexample;
  bool passed() const { return mismatches == 0; }
};

/// Exhaustive comparison over every trace of `length` values from
/// {0.6, 0.8, 0.95} and every (M, N) in {1,2,3}^2. Both simulators are
/// causal, so shorter traces are covered as prefixes.
StatecheckReport run_statecheck(ReferenceFault fault = ReferenceFault::none, int length = 8);

}  // namespace mtnet

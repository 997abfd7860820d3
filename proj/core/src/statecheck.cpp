#include "mtnetkit/statecheck.hpp"

#include <algorithm>
#include <array>

namespace mtnet {

std::vector<UpdateAction> reference_actions(std::span<const double> confidences,
                                            const UpdateConfig& config, ReferenceFault fault) {
  std::vector<UpdateAction> actions;
  actions.reserve(confidences.size());
  std::size_t segment_start = 0;  // first frame after the last template change
  const int restore_after = std::max(config.unstable_frames, 1) +
                            (fault == ReferenceFault::unstable_off_by_one ? 1 : 0);
  for (std::size_t t = 0; t < confidences.size(); ++t) {
    const auto segment = confidences.subspan(segment_start, t + 1 - segment_start);
    const double c = confidences[t];
    UpdateAction action = UpdateAction::keep;
    if (c > config.hi) {
      // length of the run of high frames ending at t
      const auto it = std::find_if(segment.rbegin(), segment.rend(),
                                   [&](double v) { return !(v > config.hi); });
      if (std::distance(segment.rbegin(), it) == config.steady_frames) {
        action = UpdateAction::replace_with_current;
      }
    } else if (c < config.lo) {
      const auto lows = std::count_if(segment.begin(), segment.end(),
                                      [&](double v) { return v < config.lo; });
      if (lows == restore_after) action = UpdateAction::restore_initial;
    }
    if (action != UpdateAction::keep) segment_start = t + 1;
    actions.push_back(action);
  }
  return actions;
}

std::vector<UpdateAction> replay_actions(std::span<const double> confidences,
                                         const UpdateConfig& config) {
  std::vector<UpdateAction> actions;
  actions.reserve(confidences.size());
  UpdateState state;
  int frame = 0;
  for (double c : confidences) {
    const UpdateStep step = update_step(state, c, config, frame++);
    state = step.state;
    actions.push_back(step.action);
  }
  return actions;
}

StatecheckReport run_statecheck(ReferenceFault fault, int length) {
  constexpr std::array<double, 3> kAlphabet{0.6, 0.8, 0.95};
  StatecheckReport report;
  std::size_t traces = 1;
  for (int i = 0; i < length; ++i) traces *= kAlphabet.size();
  report.traces = traces;

  std::vector<double> trace(static_cast<std::size_t>(length));
  for (int m = 1; m <= 3; ++m) {
    for (int n = 1; n <= 3; ++n) {
      UpdateConfig config;
      config.steady_frames = m;
      config.unstable_frames = n;
      for (std::size_t code = 0; code < traces; ++code) {
        std::size_t rest = code;
        for (double& c : trace) {
          c = kAlphabet[rest % kAlphabet.size()];
          rest /= kAlphabet.size();
        }
        ++report.combinations;
        const auto expected = reference_actions(trace, config, fault);
        const auto actual = replay_actions(trace, config);
        const auto diff = std::mismatch(expected.begin(), expected.end(), actual.begin());
        if (diff.first == expected.end()) continue;
        ++report.mismatches;
        const auto frame = static_cast<std::size_t>(std::distance(expected.begin(), diff.first));
        if (!report.counterexample || frame + 1 < report.counterexample->trace.size()) {
          report.counterexample = Counterexample{
              std::vector<double>(trace.begin(), trace.begin() + static_cast<long>(frame) + 1),
              m, n, *diff.first, *diff.second};
        }
      }
    }
  }
  return report;
}

}  // namespace mtnet

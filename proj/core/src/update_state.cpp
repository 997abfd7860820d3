#include "mtnetkit/update_state.hpp"

#include <cmath>
#include <string>

#include "mtnetkit/error.hpp"

namespace mtnet {

void UpdateConfig::validate() const {
  if (steady_frames < 1) throw ConfigError("update.M must be >= 1");
  if (unstable_frames < 0) throw ConfigError("update.N must be >= 0");
  if (!(lo >= 0.0 && lo <= hi && hi <= 1.0)) {
    throw ConfigError("update thresholds need 0 <= lo <= hi <= 1, got lo=" + std::to_string(lo) +
                      " hi=" + std::to_string(hi));
  }
}

std::string_view to_string(TrackingMode mode) noexcept {
  switch (mode) {
    case TrackingMode::steady: return "steady";
    case TrackingMode::transient_steady: return "transient_steady";
    case TrackingMode::unstable: return "unstable";
  }
  return "?";
}

std::string_view to_string(UpdateAction action) noexcept {
  switch (action) {
    case UpdateAction::keep: return "keep";
    case UpdateAction::replace_with_current: return "replace_with_current";
    case UpdateAction::restore_initial: return "restore_initial";
  }
  return "?";
}

UpdateStep update_step(const UpdateState& state, double conf, const UpdateConfig& config,
                       int frame) {
  if (!(conf >= 0.0 && conf <= 1.0)) {
    throw std::invalid_argument("update_step: confidence outside [0,1]");
  }
  UpdateStep out{state, UpdateAction::keep};
  UpdateState& s = out.state;
  if (conf > config.hi) {
    s.mode = TrackingMode::steady;
    if (++s.steady_run >= config.steady_frames) {
      out.action = UpdateAction::replace_with_current;
      s.steady_run = 0;
      s.unstable_acc = 0;
      s.active = {false, frame};
    }
  } else if (conf >= config.lo) {
    s.mode = TrackingMode::transient_steady;
    s.steady_run = 0;
  } else {
    s.mode = TrackingMode::unstable;
    s.steady_run = 0;
    if (++s.unstable_acc >= config.unstable_frames) {
      out.action = UpdateAction::restore_initial;
      s.steady_run = 0;
      s.unstable_acc = 0;
      s.active = {true, 0};
    }
  }
  return out;
}

}  // namespace mtnet

#pragma once

#include <string_view>

namespace mtnet {

/// Thresholds and intervals of the template update policy. Confidences above
/// `hi` count towards a steady run of length `steady_frames` (M); confidences
/// below `lo` accumulate towards `unstable_frames` (N).
struct UpdateConfig {
  int steady_frames = 70;
  int unstable_frames = 2;
  double hi = 0.9;
  double lo = 0.7;

  void validate() const;
};

enum class TrackingMode { steady, transient_steady, unstable };
enum class UpdateAction { keep, replace_with_current, restore_initial };

std::string_view to_string(TrackingMode mode) noexcept;
std::string_view to_string(UpdateAction action) noexcept;

struct ActiveTemplate {
  bool initial = true;
  int frame = 0;  // frame the current template was taken from
  friend bool operator==(const ActiveTemplate&, const ActiveTemplate&) = default;
};

/// Counters are zero right after any template change.
struct UpdateState {
  TrackingMode mode = TrackingMode::steady;
  int steady_run = 0;
  int unstable_acc = 0;
  ActiveTemplate active;
  friend bool operator==(const UpdateState&, const UpdateState&) = default;
};

struct UpdateStep {
  UpdateState state;
  UpdateAction action = UpdateAction::keep;
};

/// Advances the policy by one frame:
///  - conf > hi: the steady run grows; reaching M replaces the template with
///    the current frame's.
///  - lo <= conf <= hi: transient-steady, the steady run resets and the
///    template stays. The unstable count is kept.
///  - conf < lo: the steady run resets and the unstable count grows; reaching
///    N restores the initial template (N = 0 restores on the first drop).
UpdateStep update_step(const UpdateState& state, double conf, const UpdateConfig& config,
                       int frame = 0);

}  // namespace mtnet

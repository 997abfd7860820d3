#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mtnetkit/backbone.hpp"
#include "mtnetkit/config.hpp"
#include "mtnetkit/fusion.hpp"
#include "mtnetkit/head.hpp"
#include "mtnetkit/modality_aware.hpp"
#include "mtnetkit/update_state.hpp"

namespace mtnet {

/// All network parameters of the tracker, built once from a RunConfig.
struct TrackerModel {
  Backbone backbone;
  ModalityAwareNet modality;
  FusionNetwork fusion;
  HeadParams head;

  static TrackerModel build(const RunConfig& config);
};

struct FrameResult {
  int frame = 0;
  PixelBox box;
  double confidence = 0.0;
  UpdateState state;
  UpdateAction action = UpdateAction::keep;
  std::size_t proposals = 0;
  bool clamped = false;  // predicted box had to be pulled into the frame
};

struct TrackResult {
  std::vector<FrameResult> frames;

  std::vector<PixelBox> boxes() const;
  std::vector<double> confidences() const;
  std::size_t clamped_frames() const;
};

/// Single-sequence tracker. Not thread-safe; use one instance per sequence.
class Tracker {
 public:
  Tracker(const TrackerModel& model, RunConfig config);

  /// Stores the first-frame template. The returned result carries the given
  /// box with confidence 1.
  FrameResult initialize(const Frame& frame, const PixelBox& box);
  FrameResult track(const Frame& frame);

  const UpdateState& state() const noexcept { return state_; }
  const PixelBox& box() const noexcept { return box_; }

 private:
  struct TemplateFeatures {
    ModalityAwareNet::RefinedTemplate refined;
    TokenSeq tokens;
  };

  TemplateFeatures encode_template(const Frame& frame, const PixelBox& box) const;
  PixelBox clamp_to_frame(const PixelBox& box, const Frame& frame, bool& clamped) const;

  const TrackerModel& model_;
  RunConfig config_;
  TemplateFeatures initial_;
  TemplateFeatures current_;
  UpdateState state_;
  PixelBox box_;
  bool initialized_ = false;
};

using FrameLoader = std::function<Frame(std::size_t index)>;

/// Runs initialize on frame 0 and track on every later frame.
TrackResult track_sequence(std::size_t frame_count, const FrameLoader& load,
                           const PixelBox& init_box, const TrackerModel& model,
                           const RunConfig& config);
TrackResult track_sequence(std::span<const Frame> frames, const PixelBox& init_box,
                           const TrackerModel& model, const RunConfig& config);

/// Per-frame confidence/state/action log as a JSON document.
std::string state_log_json(const TrackResult& result, std::uint64_t seed,
                           const std::string& sequence = {});

}  // namespace mtnet

#include "mtnetkit/tracker.hpp"

#include <algorithm>
#include <json.hpp>

#include "mtnetkit/error.hpp"
#include "mtnetkit/scoring.hpp"

namespace mtnet {

TrackerModel TrackerModel::build(const RunConfig& config) {
  config.validate();
  return {Backbone(config.backbone),
          ModalityAwareNet(config.backbone.channels, config.modality),
          FusionNetwork(config.backbone.channels, config.fusion),
          HeadParams::random(config.fusion.dim, config.backbone.search_scale, config.head_seed())};
}

std::vector<PixelBox> TrackResult::boxes() const {
  std::vector<PixelBox> out;
  out.reserve(frames.size());
  for (const FrameResult& f : frames) out.push_back(f.box);
  return out;
}

std::vector<double> TrackResult::confidences() const {
  std::vector<double> out;
  out.reserve(frames.size());
  for (const FrameResult& f : frames) out.push_back(f.confidence);
  return out;
}

std::size_t TrackResult::clamped_frames() const {
  return static_cast<std::size_t>(
      std::count_if(frames.begin(), frames.end(), [](const FrameResult& f) { return f.clamped; }));
}

Tracker::Tracker(const TrackerModel& model, RunConfig config)
    : model_(model), config_(std::move(config)) {
  config_.validate();
}

Tracker::TemplateFeatures Tracker::encode_template(const Frame& frame,
                                                   const PixelBox& box) const {
  const BackboneConfig& bc = config_.backbone;
  const Crop rgb = crop_region(frame.rgb, box, bc.template_scale, bc.template_size);
  const Crop thermal = crop_region(frame.thermal, box, bc.template_scale, bc.template_size);
  TemplateFeatures t;
  t.refined = model_.modality.refine_template(model_.backbone.extract(rgb.pixels, thermal.pixels));
  t.tokens = model_.fusion.tokenize_template(model_.modality.fuse_template(t.refined));
  return t;
}

PixelBox Tracker::clamp_to_frame(const PixelBox& box, const Frame& frame, bool& clamped) const {
  const double width = static_cast<double>(frame.width());
  const double height = static_cast<double>(frame.height());
  const double min_side = std::min({config_.tracker.min_box_side, width, height});
  const double w = std::clamp(box.w, min_side, width);
  const double h = std::clamp(box.h, min_side, height);
  const double cx = std::clamp(box.cx(), 0.0, width);
  const double cy = std::clamp(box.cy(), 0.0, height);
  const PixelBox out = from_center(cx, cy, w, h);
  clamped = w != box.w || h != box.h || cx != box.cx() || cy != box.cy();
  return clamped ? out : box;
}

FrameResult Tracker::initialize(const Frame& frame, const PixelBox& box) {
  validate_frame(frame);
  FrameResult result;
  result.frame = frame.index;
  box_ = clamp_to_frame(box, frame, result.clamped);
  initial_ = encode_template(frame, box_);
  current_ = initial_;
  state_ = UpdateState{};
  initialized_ = true;
  result.box = box_;
  result.confidence = 1.0;
  result.state = state_;
  return result;
}

FrameResult Tracker::track(const Frame& frame) {
  if (!initialized_) throw std::logic_error("Tracker::track called before initialize");
  validate_frame(frame);
  const BackboneConfig& bc = config_.backbone;
  const Crop rgb = crop_region(frame.rgb, box_, bc.search_scale, bc.search_size);
  const Crop thermal = crop_region(frame.thermal, box_, bc.search_scale, bc.search_size);

  const ModalityPair search = model_.backbone.extract(rgb.pixels, thermal.pixels);
  const TokenSeq search_tokens =
      model_.fusion.tokenize_search(model_.modality.fuse_search(current_.refined, search));
  const ProposalSet proposals =
      head_forward(model_.fusion.forward(current_.tokens, search_tokens), model_.head);
  const Selection best =
      select_best(score_proposals(proposals, config_.tracker.window_weight), proposals);

  FrameResult result;
  result.frame = frame.index;
  result.proposals = proposals.size();
  result.confidence = best.confidence;
  box_ = clamp_to_frame(to_pixel(best.box, rgb.window), frame, result.clamped);

  const UpdateStep step = update_step(state_, best.confidence, config_.update, frame.index);
  state_ = step.state;
  result.action = step.action;
  if (step.action == UpdateAction::replace_with_current) {
    current_ = encode_template(frame, box_);
  } else if (step.action == UpdateAction::restore_initial) {
    current_ = initial_;
  }
  result.box = box_;
  result.state = state_;
  return result;
}

TrackResult track_sequence(std::size_t frame_count, const FrameLoader& load,
                           const PixelBox& init_box, const TrackerModel& model,
                           const RunConfig& config) {
  if (frame_count == 0) throw std::invalid_argument("track_sequence: no frames");
  Tracker tracker(model, config);
  TrackResult result;
  result.frames.reserve(frame_count);
  result.frames.push_back(tracker.initialize(load(0), init_box));
  for (std::size_t i = 1; i < frame_count; ++i) result.frames.push_back(tracker.track(load(i)));
  return result;
}

TrackResult track_sequence(std::span<const Frame> frames, const PixelBox& init_box,
                           const TrackerModel& model, const RunConfig& config) {
  return track_sequence(
      frames.size(), [&](std::size_t i) { return frames[i]; }, init_box, model, config);
}

std::string state_log_json(const TrackResult& result, std::uint64_t seed,
                           const std::string& sequence) {
  nlohmann::ordered_json log = nlohmann::ordered_json::array();
  for (const FrameResult& f : result.frames) {
    log.push_back({
        {"frame", f.frame},
        {"confidence", f.confidence},
        {"mode", to_string(f.state.mode)},
        {"steady_run", f.state.steady_run},
        {"unstable_acc", f.state.unstable_acc},
        {"action", to_string(f.action)},
        {"active_template", f.state.active.initial ? nlohmann::ordered_json("initial")
                                                   : nlohmann::ordered_json(f.state.active.frame)},
        {"proposals", f.proposals},
        {"clamped", f.clamped},
    });
  }
  nlohmann::ordered_json doc = {{"sequence", sequence}, {"seed", seed}, {"frames", std::move(log)}};
  return doc.dump(1) + "\n";
}

}  // namespace mtnet

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "mtnetkit/backbone.hpp"
#include "mtnetkit/fusion.hpp"
#include "mtnetkit/losses.hpp"
#include "mtnetkit/modality_aware.hpp"
#include "mtnetkit/update_state.hpp"

namespace mtnet {

struct TrackerConfig {
  double window_weight = 0.45;  // Hann penalty blend, in [0,1]
  double min_box_side = 4.0;    // pixels; predicted boxes are clamped to the frame
};

/// Every tunable of a tracking run. A single seed drives all weight
/// initialisation; module seeds are derived from it by reseed().
struct RunConfig {
  RunConfig() { reseed(); }

  std::uint64_t seed = 1;
  BackboneConfig backbone;
  ModalityAwareConfig modality;
  FusionConfig fusion;
  LossConfig loss;
  UpdateConfig update;
  TrackerConfig tracker;

  /// Re-derives backbone/modality/fusion/head seeds from `seed`.
  void reseed();
  std::uint64_t head_seed() const noexcept;
  void validate() const;
};

/// Parses a run configuration. Missing keys keep their defaults; unknown
/// keys and out-of-range values throw ConfigError.
RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string to_json(const RunConfig& config);

}  // namespace mtnet

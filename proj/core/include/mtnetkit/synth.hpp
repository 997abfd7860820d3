#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mtnetkit/bbox.hpp"
#include "mtnetkit/image.hpp"

namespace mtnet {

/// Frame range [first, last] (0-based, inclusive) during which an occluder
/// is drawn over the target.
struct Occlusion {
  std::size_t first = 0;
  std::size_t last = 0;
};

/// Synthetic two-modality sequence. The target centre follows
///   c(t) = c0 + velocity*t + amplitude*sin(2*pi*t/period)
/// and its extent is scaled by 1 + scale_amplitude*sin(2*pi*t/scale_period).
/// Boxes are kept fully inside the frame.
struct SynthConfig {
  std::size_t frames = 60;
  std::size_t width = 320;
  std::size_t height = 240;
  PixelBox box{140, 104, 40, 32};
  double velocity_x = 0.6, velocity_y = 0.3;
  double amplitude_x = 10.0, amplitude_y = 6.0;
  double period = 40.0;
  double scale_amplitude = 0.1;
  double scale_period = 50.0;
  std::vector<Occlusion> occlusions;
  double rgb_noise = 0.03;
  double thermal_noise = 0.03;
  std::uint64_t seed = 7;

  void validate() const;
  /// Zero noise, zero motion, no scale change, no occlusion.
  static SynthConfig static_target(std::size_t frames = 30);
};

SynthConfig parse_synth_config(std::string_view json_text);
SynthConfig load_synth_config(const std::filesystem::path& path);
std::string to_json(const SynthConfig& config);

PixelBox synth_box(const SynthConfig& config, std::size_t t);
Frame render_frame(const SynthConfig& config, std::size_t t);

struct SyntheticSequence {
  std::vector<Frame> frames;
  std::vector<PixelBox> groundtruth;
};
SyntheticSequence generate_sequence(const SynthConfig& config);

/// Writes rgb/%06d.ppm, thermal/%06d.pgm (numbered from 1), groundtruth.txt
/// and synth.json into `dir`.
void write_sequence(const SynthConfig& config, const std::filesystem::path& dir);

}  // namespace mtnet

#include "mtnetkit/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <sstream>

#include "mtnetkit/error.hpp"
#include "mtnetkit/rng.hpp"
#include "mtnetkit/sequence_io.hpp"

namespace mtnet {

namespace fs = std::filesystem;
using nlohmann::json;

void SynthConfig::validate() const {
  if (frames == 0) throw ConfigError("synth.frames must be positive");
  if (width < 16 || height < 16) throw ConfigError("synth image must be at least 16x16");
  if (!(box.w > 0 && box.h > 0)) throw ConfigError("synth.box extent must be positive");
  if (box.w > static_cast<double>(width) || box.h > static_cast<double>(height)) {
    throw ConfigError("synth.box does not fit in the frame");
  }
  if (!(period > 0 && scale_period > 0)) throw ConfigError("synth periods must be positive");
  if (!(scale_amplitude >= 0 && scale_amplitude < 1)) {
    throw ConfigError("synth.scale_amplitude must lie in [0,1)");
  }
  if (!(rgb_noise >= 0 && thermal_noise >= 0)) throw ConfigError("synth noise must be >= 0");
  for (const Occlusion& o : occlusions) {
    if (o.first > o.last) throw ConfigError("synth occlusion range is reversed");
  }
  for (double v : {box.x, box.y, velocity_x, velocity_y, amplitude_x, amplitude_y}) {
    if (!std::isfinite(v)) throw ConfigError("synth parameters must be finite");
  }
}

SynthConfig SynthConfig::static_target(std::size_t n) {
  SynthConfig c;
  c.frames = n;
  c.velocity_x = c.velocity_y = 0.0;
  c.amplitude_x = c.amplitude_y = 0.0;
  c.scale_amplitude = 0.0;
  c.rgb_noise = c.thermal_noise = 0.0;
  return c;
}

namespace {

const char* const kKeys[] = {"frames",      "width",       "height",          "box",
                             "velocity",    "amplitude",   "period",          "scale_amplitude",
                             "scale_period", "occlusions", "rgb_noise",       "thermal_noise",
                             "seed"};

std::array<double, 2> pair_of(const json& v, const char* key) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ConfigError(std::string("synth.") + key + " must be [x, y]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace

SynthConfig parse_synth_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("synth config must be a JSON object");
  for (const auto& item : root.items()) {
    if (std::none_of(std::begin(kKeys), std::end(kKeys),
                     [&](const char* k) { return item.key() == k; })) {
      throw ConfigError("unknown synth key '" + item.key() + "'");
    }
  }
  SynthConfig c;
  try {
    const auto count = [&](const char* key, std::size_t& out) {
      if (!root.contains(key)) return;
      if (!root[key].is_number_unsigned()) {
        throw ConfigError(std::string("synth.") + key + " must be a non-negative integer");
      }
      out = root[key].get<std::size_t>();
    };
    const auto real = [&](const char* key, double& out) {
      if (!root.contains(key)) return;
      if (!root[key].is_number()) throw ConfigError(std::string("synth.") + key + " must be a number");
      out = root[key].get<double>();
    };
    count("frames", c.frames);
    count("width", c.width);
    count("height", c.height);
    if (root.contains("box")) {
      const json& b = root["box"];
      if (!b.is_array() || b.size() != 4 ||
          !std::all_of(b.begin(), b.end(), [](const json& e) { return e.is_number(); })) {
        throw ConfigError("synth.box must be [x, y, w, h]");
      }
      c.box = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    }
    if (root.contains("velocity")) {
      const auto v = pair_of(root["velocity"], "velocity");
      c.velocity_x = v[0];
      c.velocity_y = v[1];
    }
    if (root.contains("amplitude")) {
      const auto v = pair_of(root["amplitude"], "amplitude");
      c.amplitude_x = v[0];
      c.amplitude_y = v[1];
    }
    real("period", c.period);
    real("scale_amplitude", c.scale_amplitude);
    real("scale_period", c.scale_period);
    real("rgb_noise", c.rgb_noise);
    real("thermal_noise", c.thermal_noise);
    if (root.contains("seed")) {
      if (!root["seed"].is_number_unsigned()) throw ConfigError("synth.seed must be an unsigned integer");
      c.seed = root["seed"].get<std::uint64_t>();
    }
    if (root.contains("occlusions")) {
      const json& occ = root["occlusions"];
      if (!occ.is_array()) throw ConfigError("synth.occlusions must be a list of [first, last]");
      for (const json& o : occ) {
        if (!o.is_array() || o.size() != 2 || !o[0].is_number_unsigned() ||
            !o[1].is_number_unsigned()) {
          throw ConfigError("synth.occlusions entries must be [first, last]");
        }
        c.occlusions.push_back({o[0].get<std::size_t>(), o[1].get<std::size_t>()});
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synth config: ") + e.what());
  }
  c.validate();
  return c;
}

SynthConfig load_synth_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open synth config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_synth_config(text.str());
}

std::string to_json(const SynthConfig& c) {
  nlohmann::ordered_json occ = nlohmann::ordered_json::array();
  for (const Occlusion& o : c.occlusions) occ.push_back({o.first, o.last});
  const nlohmann::ordered_json j = {
      {"frames", c.frames},
      {"width", c.width},
      {"height", c.height},
      {"box", {c.box.x, c.box.y, c.box.w, c.box.h}},
      {"velocity", {c.velocity_x, c.velocity_y}},
      {"amplitude", {c.amplitude_x, c.amplitude_y}},
      {"period", c.period},
      {"scale_amplitude", c.scale_amplitude},
      {"scale_period", c.scale_period},
      {"occlusions", occ},
      {"rgb_noise", c.rgb_noise},
      {"thermal_noise", c.thermal_noise},
      {"seed", c.seed},
  };
  return j.dump(2);
}

PixelBox synth_box(const SynthConfig& c, std::size_t t) {
  const double tt = static_cast<double>(t);
  const double two_pi = 2.0 * std::numbers::pi;
  const double s = 1.0 + c.scale_amplitude * std::sin(two_pi * tt / c.scale_period);
  const double width = static_cast<double>(c.width), height = static_cast<double>(c.height);
  const double w = std::min(c.box.w * s, width);
  const double h = std::min(c.box.h * s, height);
  const double wave = std::sin(two_pi * tt / c.period);
  double cx = c.box.cx() + c.velocity_x * tt + c.amplitude_x * wave;
  double cy = c.box.cy() + c.velocity_y * tt + c.amplitude_y * wave;
  cx = std::clamp(cx, 0.5 * w, width - 0.5 * w);
  cy = std::clamp(cy, 0.5 * h, height - 0.5 * h);
  return from_center(cx, cy, w, h);
}

namespace {

bool occluded(const SynthConfig& c, std::size_t t) {
  return std::any_of(c.occlusions.begin(), c.occlusions.end(),
                     [t](const Occlusion& o) { return t >= o.first && t <= o.last; });
}

bool covers(const PixelBox& b, double px, double py) {
  return px >= b.x && px < b.x + b.w && py >= b.y && py < b.y + b.h;
}

}  // namespace

Frame render_frame(const SynthConfig& c, std::size_t t) {
  const std::size_t H = c.height, W = c.width;
  const PixelBox box = synth_box(c, t);
  const bool hidden = occluded(c, t);
  // The occluder is a vertical bar over the left 60% of the target.
  const PixelBox bar{box.x - 2.0, box.y - 4.0, 0.6 * box.w + 2.0, box.h + 8.0};
  constexpr double kTarget[3] = {0.9, 0.25, 0.2};
  constexpr double kPhase[3] = {0.0, 1.3, 2.6};

  Rng rng(derive_seed(c.seed, 1000 + t));
  Frame f{Tensor({3, H, W}), Tensor({1, H, W}), static_cast<int>(t)};
  const double sx = 0.5 * box.w / 2.0, sy = 0.5 * box.h / 2.0;
  for (std::size_t i = 0; i < H; ++i) {
    const double py = static_cast<double>(i) + 0.5;
    for (std::size_t j = 0; j < W; ++j) {
      const double px = static_cast<double>(j) + 0.5;
      const bool on_target = covers(box, px, py);
      const bool on_bar = hidden && covers(bar, px, py);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double v = 0.45 + 0.15 * std::sin(0.21 * px + kPhase[ch]) * std::cos(0.17 * py - kPhase[ch]);
        if (on_target) v = kTarget[ch];
        if (on_bar) v = 0.55;
        if (c.rgb_noise > 0) v += rng.normal(0.0, c.rgb_noise);
        f.rgb.at(ch, i, j) = std::clamp(v, 0.0, 1.0);
      }
      const double dx = (px - box.cx()) / sx, dy = (py - box.cy()) / sy;
      double th = 0.12 + 0.8 * std::exp(-0.5 * (dx * dx + dy * dy));
      if (on_bar) th = 0.3;
      if (c.thermal_noise > 0) th += rng.normal(0.0, c.thermal_noise);
      f.thermal.at(0, i, j) = std::clamp(th, 0.0, 1.0);
    }
  }
  return f;
}

SyntheticSequence generate_sequence(const SynthConfig& c) {
  c.validate();
  SyntheticSequence seq;
  seq.frames.reserve(c.frames);
  for (std::size_t t = 0; t < c.frames; ++t) {
    seq.frames.push_back(render_frame(c, t));
    seq.groundtruth.push_back(synth_box(c, t));
  }
  return seq;
}

void write_sequence(const SynthConfig& c, const fs::path& dir) {
  c.validate();
  std::error_code ec;
  fs::create_directories(dir / "rgb", ec);
  fs::create_directories(dir / "thermal", ec);
  if (!fs::is_directory(dir / "rgb") || !fs::is_directory(dir / "thermal")) {
    throw IoError("cannot create sequence directories under " + dir.string());
  }
  std::vector<PixelBox> gt;
  gt.reserve(c.frames);
  for (std::size_t t = 0; t < c.frames; ++t) {
    const Frame f = render_frame(c, t);
    write_ppm(rgb_frame_path(dir, t + 1), f.rgb);
    write_pgm(thermal_frame_path(dir, t + 1), f.thermal);
    gt.push_back(synth_box(c, t));
  }
  write_boxes(dir / "groundtruth.txt", gt);
  std::ofstream meta(dir / "synth.json", std::ios::binary);
  meta << to_json(c) << '\n';
  if (!meta) throw IoError("cannot write " + (dir / "synth.json").string());
}

}  // namespace mtnet

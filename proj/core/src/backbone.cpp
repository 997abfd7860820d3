#include "mtnetkit/backbone.hpp"

#include <cmath>

#include "mtnetkit/error.hpp"
#include "mtnetkit/rng.hpp"

namespace mtnet {

const char* to_string(Modality m) noexcept { return m == Modality::rgb ? "rgb" : "thermal"; }

void BackboneConfig::validate() const {
  if (channels == 0) throw ConfigError("backbone.channels must be positive");
  if (template_size == 0 || template_size % stride != 0) {
    throw ConfigError("backbone.template_size must be a positive multiple of 8");
  }
  if (search_size % stride != 0 || search_size <= template_size) {
    throw ConfigError("backbone.search_size must be a multiple of 8 larger than template_size");
  }
  if (!(template_scale > 0.0) || !(search_scale > 0.0)) {
    throw ConfigError("backbone scale factors must be positive");
  }
  for (std::size_t c : stage_channels) {
    if (c == 0) throw ConfigError("backbone.stage_channels must be positive");
  }
}

Crop crop_region(const Tensor& image, const PixelBox& box, double scale, std::size_t out_size) {
  if (image.rank() != 3 || image.empty()) throw ShapeError("crop_region: empty image");
  if (!(box.w > 0.0) || !(box.h > 0.0)) throw ShapeError("crop_region: degenerate box");
  if (!(scale > 0.0)) throw ShapeError("crop_region: scale factor must be positive");
  if (out_size == 0) throw ShapeError("crop_region: zero output size");

  const std::size_t channels = image.dim(0), height = image.dim(1), width = image.dim(2);
  const double side = scale * std::sqrt(box.w * box.h);
  Crop crop;
  crop.window = {box.cx() - 0.5 * side, box.cy() - 0.5 * side, side};
  crop.pixels = Tensor({channels, out_size, out_size});

  const Tensor means = gap(image);
  const double step = side / static_cast<double>(out_size);

  struct Tap {
    long lo;
    double frac;
  };
  // Output pixel i samples the window at its centre, (i + 0.5) * step.
  const auto make_taps = [&](double origin) {
    std::vector<Tap> taps(out_size);
    for (std::size_t i = 0; i < out_size; ++i) {
      const double pos = origin + (static_cast<double>(i) + 0.5) * step - 0.5;
      const double fl = std::floor(pos);
      taps[i] = {static_cast<long>(fl), pos - fl};
    }
    return taps;
  };
  const auto ty = make_taps(crop.window.y0);
  const auto tx = make_taps(crop.window.x0);
  const auto inside = [](long v, std::size_t n) { return v >= 0 && v < static_cast<long>(n); };

  for (std::size_t c = 0; c < channels; ++c) {
    const double mean = means[c];
    const auto sample = [&](long yy, long xx) {
      return inside(yy, height) && inside(xx, width)
                 ? image.at(c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx))
                 : mean;
    };
    for (std::size_t i = 0; i < out_size; ++i) {
      const Tap& a = ty[i];
      for (std::size_t j = 0; j < out_size; ++j) {
        const Tap& b = tx[j];
        const bool y0_in = inside(a.lo, height), y1_in = inside(a.lo + 1, height);
        const bool x0_in = inside(b.lo, width), x1_in = inside(b.lo + 1, width);
        // Only taps with nonzero weight count as padding.
        const bool needs_pad = (!y0_in && a.frac < 1.0) || (!y1_in && a.frac > 0.0) ||
                               (!x0_in && b.frac < 1.0) || (!x1_in && b.frac > 0.0);
        if (needs_pad) crop.padded = true;
        if ((!y0_in && !y1_in) || (!x0_in && !x1_in)) {
          crop.pixels.at(c, i, j) = mean;
          continue;
        }
        const double top = std::lerp(sample(a.lo, b.lo), sample(a.lo, b.lo + 1), b.frac);
        const double bottom =
            std::lerp(sample(a.lo + 1, b.lo), sample(a.lo + 1, b.lo + 1), b.frac);
        crop.pixels.at(c, i, j) = std::lerp(top, bottom, a.frac);
      }
    }
  }
  require_finite(crop.pixels, "crop_region");
  return crop;
}

namespace {

Backbone::Branch make_branch(const BackboneConfig& cfg, std::size_t in_channels, Rng& rng) {
  Backbone::Branch branch;
  std::size_t prev = in_channels;
  for (std::size_t s = 0; s < 3; ++s) {
    const std::size_t out = cfg.stage_channels[s];
    const double fan_in = static_cast<double>(prev * 16);
    branch.stages[s].kernel = rng.gaussian({out, prev, 4, 4}, std::sqrt(2.0 / fan_in));
    branch.stages[s].bias = Tensor({out});
    prev = out;
  }
  branch.projection.kernel =
      rng.gaussian({cfg.channels, prev, 1, 1}, std::sqrt(1.0 / static_cast<double>(prev)));
  branch.projection.bias = Tensor({cfg.channels});
  return branch;
}

}  // namespace

Backbone::Backbone(BackboneConfig config) : config_(std::move(config)) {
  config_.validate();
  Rng rgb_rng(derive_seed(config_.seed, 101));
  Rng thermal_rng(derive_seed(config_.seed, 102));
  rgb_ = make_branch(config_, 3, rgb_rng);
  thermal_ = make_branch(config_, 1, thermal_rng);
}

Tensor Backbone::extract(const Tensor& crop, Modality m) const {
  const std::size_t expected_channels = m == Modality::rgb ? 3 : 1;
  if (crop.rank() != 3 || crop.dim(0) != expected_channels) {
    throw ShapeError(std::string("backbone: ") + to_string(m) + " crop has shape " +
                     shape_string(crop.shape()));
  }
  if (crop.dim(1) != crop.dim(2) || crop.dim(1) % BackboneConfig::stride != 0) {
    throw ShapeError("backbone: crop must be square with side divisible by 8");
  }
  const Branch& b = branch(m);
  Tensor x = crop;
  for (const Stage& s : b.stages) x = relu(conv2d(x, s.kernel, 1, 2, s.bias.data()));
  return conv2d(x, b.projection.kernel, 0, 1, b.projection.bias.data());
}

ModalityPair Backbone::extract(const Tensor& rgb_crop, const Tensor& thermal_crop) const {
  return {extract(rgb_crop, Modality::rgb), extract(thermal_crop, Modality::thermal)};
}

}  // namespace mtnet

#pragma once

#include <array>
#include <cstdint>

#include "mtnetkit/bbox.hpp"
#include "mtnetkit/image.hpp"
#include "mtnetkit/tensor.hpp"

namespace mtnet {

enum class Modality { rgb, thermal };

const char* to_string(Modality m) noexcept;

/// Feature extractor settings. The stub always downsamples by 8.
struct BackboneConfig {
  std::size_t channels = 64;
  std::size_t template_size = 128;
  std::size_t search_size = 256;
  double template_scale = 2.0;
  double search_scale = 4.0;
  std::array<std::size_t, 3> stage_channels{16, 32, 64};
  std::uint64_t seed = 1;

  static constexpr std::size_t stride = 8;

  std::size_t template_feature_size() const noexcept { return template_size / stride; }
  std::size_t search_feature_size() const noexcept { return search_size / stride; }
  void validate() const;
};

struct Crop {
  Tensor pixels;      // [channels, out, out]
  CropWindow window;  // source square in image pixels
  bool padded = false;
};

/// Square crop of side scale*sqrt(w*h) centred on `box`, bilinearly resampled
/// to out_size x out_size. Samples that fall outside the image read the
/// per-channel image mean; an output pixel whose taps are all outside equals
/// that mean exactly.
Crop crop_region(const Tensor& image, const PixelBox& box, double scale, std::size_t out_size);

/// RGB and thermal maps of one crop.
struct ModalityPair {
  Tensor rgb;
  Tensor thermal;
};

/// Seeded stand-in for the pretrained backbone: three stride-2 conv+relu
/// stages (4x4 kernels, padding 1) and a 1x1 projection to `channels`.
/// RGB and thermal branches draw separate weights from the same seed stream.
class Backbone {
 public:
  struct Stage {
    Tensor kernel;  // [Co, Ci, kh, kw]
    Tensor bias;    // [Co]
  };
  struct Branch {
    std::array<Stage, 3> stages;
    Stage projection;
  };

  explicit Backbone(BackboneConfig config);

  const BackboneConfig& config() const noexcept { return config_; }
  Branch& branch(Modality m) noexcept { return m == Modality::rgb ? rgb_ : thermal_; }
  const Branch& branch(Modality m) const noexcept { return m == Modality::rgb ? rgb_ : thermal_; }

  /// crop [3 or 1, S, S] with S divisible by 8 -> [channels, S/8, S/8].
  Tensor extract(const Tensor& crop, Modality m) const;
  ModalityPair extract(const Tensor& rgb_crop, const Tensor& thermal_crop) const;

 private:
  BackboneConfig config_;
  Branch rgb_;
  Branch thermal_;
};

}  // namespace mtnet

#pragma once

namespace mtnet {

/// Pixel box, top-left origin: (x, y) is the top-left corner.
struct PixelBox {
  double x = 0, y = 0, w = 0, h = 0;

  double cx() const noexcept { return x + 0.5 * w; }
  double cy() const noexcept { return y + 0.5 * h; }
  /// Benchmark convention for "target absent in this frame".
  bool is_absent() const noexcept { return x == 0 && y == 0 && w == 0 && h == 0; }
  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

/// Center-form box in coordinates normalised to a square search window.
struct NormBox {
  double cx = 0, cy = 0, w = 0, h = 0;
  friend bool operator==(const NormBox&, const NormBox&) = default;
};

/// Square image region a crop was sampled from, in pixel coordinates.
struct CropWindow {
  double x0 = 0, y0 = 0, side = 1;
};

PixelBox from_center(double cx, double cy, double w, double h) noexcept;

NormBox to_normalized(const PixelBox& box, const CropWindow& window) noexcept;
PixelBox to_pixel(const NormBox& box, const CropWindow& window) noexcept;

/// Clamps every coordinate into [0,1]. Used only when emitting boxes.
NormBox clamp_unit(const NormBox& box) noexcept;

/// Intersection over union; 0 when the union is empty.
double iou(const NormBox& a, const NormBox& b) noexcept;
double iou(const PixelBox& a, const PixelBox& b) noexcept;

}  // namespace mtnet

#include "mtnetkit/bbox.hpp"

#include <algorithm>

namespace mtnet {

namespace {

double overlap_ratio(double ax1, double ay1, double ax2, double ay2, double bx1, double by1,
                     double bx2, double by2) noexcept {
  // Areas come from corner differences on both sides, so identical boxes
  // give inter == union bit for bit and the ratio is exactly 1.
  const double area_a = std::max(0.0, ax2 - ax1) * std::max(0.0, ay2 - ay1);
  const double area_b = std::max(0.0, bx2 - bx1) * std::max(0.0, by2 - by1);
  const double iw = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
  const double ih = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
  const double inter = iw * ih;
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace

PixelBox from_center(double cx, double cy, double w, double h) noexcept {
  return {cx - 0.5 * w, cy - 0.5 * h, w, h};
}

NormBox to_normalized(const PixelBox& box, const CropWindow& window) noexcept {
  return {(box.cx() - window.x0) / window.side, (box.cy() - window.y0) / window.side,
          box.w / window.side, box.h / window.side};
}

PixelBox to_pixel(const NormBox& box, const CropWindow& window) noexcept {
  return from_center(window.x0 + box.cx * window.side, window.y0 + box.cy * window.side,
                     box.w * window.side, box.h * window.side);
}

NormBox clamp_unit(const NormBox& box) noexcept {
  return {std::clamp(box.cx, 0.0, 1.0), std::clamp(box.cy, 0.0, 1.0),
          std::clamp(box.w, 0.0, 1.0), std::clamp(box.h, 0.0, 1.0)};
}

double iou(const NormBox& a, const NormBox& b) noexcept {
  return overlap_ratio(a.cx - 0.5 * a.w, a.cy - 0.5 * a.h, a.cx + 0.5 * a.w, a.cy + 0.5 * a.h,
                       b.cx - 0.5 * b.w, b.cy - 0.5 * b.h, b.cx + 0.5 * b.w, b.cy + 0.5 * b.h);
}

double iou(const PixelBox& a, const PixelBox& b) noexcept {
  return overlap_ratio(a.x, a.y, a.x + a.w, a.y + a.h, b.x, b.y, b.x + b.w, b.y + b.h);
}

}  // namespace mtnet

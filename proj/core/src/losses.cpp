#include "mtnetkit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mtnetkit/error.hpp"

namespace mtnet {

void LossConfig::validate() const {
  for (double v : {lambda_l1, lambda_ciou, n_cls, n_reg, n_loc}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("loss weights must be positive");
  }
}

namespace {

constexpr double kAspect = 4.0 / (std::numbers::pi * std::numbers::pi);

double clamp_prob(double p) { return std::clamp(p, kLogClamp, 1.0 - kLogClamp); }

// CIoU terms together with their partial derivatives. Partials are taken with
// respect to the prediction's corners (x1, y1, x2, y2) except where noted.
struct CiouTerms {
  double iou = 0.0;
  double rho2 = 0.0;
  double c2 = 0.0;
  double v = 0.0;
  double loss = 0.0;
  // d iou / d(x1, y1, x2, y2)
  std::array<double, 4> d_iou{};
  // d c2 / d(x1, y1, x2, y2)
  std::array<double, 4> d_c2{};
  // d v / d(w, h), taken on the raw extents
  std::array<double, 2> d_v{};
};

CiouTerms ciou_terms(const NormBox& pred, const NormBox& gt) {
  CiouTerms t;
  const double px1 = pred.cx - 0.5 * pred.w, px2 = pred.cx + 0.5 * pred.w;
  const double py1 = pred.cy - 0.5 * pred.h, py2 = pred.cy + 0.5 * pred.h;
  const double gx1 = gt.cx - 0.5 * gt.w, gx2 = gt.cx + 0.5 * gt.w;
  const double gy1 = gt.cy - 0.5 * gt.h, gy2 = gt.cy + 0.5 * gt.h;

  const double pw = px2 - px1, ph = py2 - py1;
  const double area_p = pw * ph;
  const double area_g = (gx2 - gx1) * (gy2 - gy1);

  const double iw = std::min(px2, gx2) - std::max(px1, gx1);
  const double ih = std::min(py2, gy2) - std::max(py1, gy1);
  const bool overlap = iw > 0.0 && ih > 0.0;
  const double inter = overlap ? iw * ih : 0.0;
  const double uni = area_p + area_g - inter;
  t.iou = uni > 0.0 ? inter / uni : 0.0;

  // d area_p / d(x1, y1, x2, y2)
  const std::array<double, 4> d_area{-ph, -pw, ph, pw};
  std::array<double, 4> d_inter{};
  if (overlap) {
    const double d_iw_x1 = px1 > gx1 ? -1.0 : 0.0, d_iw_x2 = px2 < gx2 ? 1.0 : 0.0;
    const double d_ih_y1 = py1 > gy1 ? -1.0 : 0.0, d_ih_y2 = py2 < gy2 ? 1.0 : 0.0;
    d_inter = {d_iw_x1 * ih, d_ih_y1 * iw, d_iw_x2 * ih, d_ih_y2 * iw};
  }
  if (uni > 0.0) {
    for (int i = 0; i < 4; ++i) {
      const double d_uni = d_area[i] - d_inter[i];
      t.d_iou[i] = (d_inter[i] * uni - inter * d_uni) / (uni * uni);
    }
  }

  const double cw = std::max(px2, gx2) - std::min(px1, gx1);
  const double ch = std::max(py2, gy2) - std::min(py1, gy1);
  t.c2 = cw * cw + ch * ch;
  const double d_cw_x1 = px1 < gx1 ? -1.0 : 0.0, d_cw_x2 = px2 > gx2 ? 1.0 : 0.0;
  const double d_ch_y1 = py1 < gy1 ? -1.0 : 0.0, d_ch_y2 = py2 > gy2 ? 1.0 : 0.0;
  t.d_c2 = {2.0 * cw * d_cw_x1, 2.0 * ch * d_ch_y1, 2.0 * cw * d_cw_x2, 2.0 * ch * d_ch_y2};

  const double dx = pred.cx - gt.cx, dy = pred.cy - gt.cy;
  t.rho2 = dx * dx + dy * dy;

  const double delta = std::atan2(gt.w, gt.h) - std::atan2(pred.w, pred.h);
  t.v = kAspect * delta * delta;
  const double r2 = pred.w * pred.w + pred.h * pred.h;
  if (r2 > 0.0) {
    // d atan2(w,h)/dw = h/r2, d/dh = -w/r2
    t.d_v = {-2.0 * kAspect * delta * pred.h / r2, 2.0 * kAspect * delta * pred.w / r2};
  }

  const double denom = 1.0 - t.iou + t.v;
  const double alpha_v = (t.v == 0.0 || denom <= 0.0) ? 0.0 : t.v * t.v / denom;
  t.loss = 1.0 - t.iou + (t.c2 > 0.0 ? t.rho2 / t.c2 : 0.0) + alpha_v;
  return t;
}

}  // namespace

double ciou_loss(const NormBox& pred, const NormBox& gt) {
  if (!(gt.w > 0.0) || !(gt.h > 0.0)) throw ShapeError("ciou_loss: gt needs positive extents");
  return ciou_terms(pred, gt).loss;
}

BoxGrad ciou_loss_grad(const NormBox& pred, const NormBox& gt) {
  if (!(gt.w > 0.0) || !(gt.h > 0.0)) throw ShapeError("ciou_loss_grad: gt needs positive extents");
  const CiouTerms t = ciou_terms(pred, gt);

  // L = 1 - I + rho2/c2 + T with T = v^2 / D and D = 1 - I + v.
  const double denom = 1.0 - t.iou + t.v;
  double dT_dI = 0.0, dT_dv = 0.0;
  if (t.v != 0.0 && denom > 0.0) {
    dT_dI = t.v * t.v / (denom * denom);
    dT_dv = t.v * (2.0 * denom - t.v) / (denom * denom);
  }
  const double dL_dI = -1.0 + dT_dI;
  const double dL_drho2 = 1.0 / t.c2;
  const double dL_dc2 = -t.rho2 / (t.c2 * t.c2);

  // Corner partials of the IoU and enclosure terms.
  std::array<double, 4> corner{};
  for (int i = 0; i < 4; ++i) corner[i] = dL_dI * t.d_iou[i] + dL_dc2 * t.d_c2[i];

  // x1 = cx - w/2, x2 = cx + w/2 (same for y).
  BoxGrad g{};
  g[0] = corner[0] + corner[2] + dL_drho2 * 2.0 * (pred.cx - gt.cx);
  g[1] = corner[1] + corner[3] + dL_drho2 * 2.0 * (pred.cy - gt.cy);
  g[2] = 0.5 * (corner[2] - corner[0]) + dT_dv * t.d_v[0];
  g[3] = 0.5 * (corner[3] - corner[1]) + dT_dv * t.d_v[1];
  return g;
}

double cls_loss(std::span<const double> p, std::span<const std::uint8_t> labels,
                std::span<const double> ious) {
  if (p.size() != labels.size() || p.size() != ious.size()) {
    throw ShapeError("cls_loss: input lengths differ");
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double pj = clamp_prob(p[j]);
    sum += labels[j] ? std::log(pj) * ious[j] : std::log(1.0 - pj);
  }
  return -sum;
}

RegLoss reg_loss(std::span<const NormBox> boxes, std::span<const std::uint8_t> labels,
                 std::span<const double> p, const NormBox& gt, const LossConfig& config) {
  if (boxes.size() != labels.size() || boxes.size() != p.size()) {
    throw ShapeError("reg_loss: input lengths differ");
  }
  RegLoss out;
  for (std::size_t j = 0; j < boxes.size(); ++j) {
    if (!labels[j]) continue;
    out.has_positives = true;
    const NormBox& b = boxes[j];
    const double l1 = std::abs(b.cx - gt.cx) + std::abs(b.cy - gt.cy) + std::abs(b.w - gt.w) +
                      std::abs(b.h - gt.h);
    out.value += config.lambda_l1 * l1 + config.lambda_ciou * ciou_loss(b, gt) * p[j];
  }
  return out;
}

double loc_loss(std::span<const double> p_loc, std::span<const double> targets) {
  if (p_loc.size() != targets.size()) throw ShapeError("loc_loss: input lengths differ");
  double sum = 0.0;
  for (std::size_t j = 0; j < p_loc.size(); ++j) {
    const double pj = clamp_prob(p_loc[j]);
    sum += targets[j] * std::log(pj) + (1.0 - targets[j]) * std::log(1.0 - pj);
  }
  return -sum;
}

double total_loss(const LossConfig& config, const LossParts& parts) {
  return config.n_cls * parts.cls + config.n_reg * parts.reg + config.n_loc * parts.loc;
}

std::size_t TargetAssignment::positives() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

TargetAssignment assign_targets(const NormBox& gt, std::size_t grid) {
  if (grid == 0) throw ShapeError("assign_targets: empty grid");
  if (!(gt.w > 0.0) || !(gt.h > 0.0)) throw ShapeError("assign_targets: degenerate gt box");
  TargetAssignment out{std::vector<std::uint8_t>(grid * grid, 0), gt};
  const double x1 = gt.cx - 0.5 * gt.w, x2 = gt.cx + 0.5 * gt.w;
  const double y1 = gt.cy - 0.5 * gt.h, y2 = gt.cy + 0.5 * gt.h;
  const double g = static_cast<double>(grid);
  bool any = false;
  std::size_t nearest = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid; ++i) {
    const double cy = (static_cast<double>(i) + 0.5) / g;
    for (std::size_t j = 0; j < grid; ++j) {
      const double cx = (static_cast<double>(j) + 0.5) / g;
      if (cx >= x1 && cx <= x2 && cy >= y1 && cy <= y2) {
        out.labels[i * grid + j] = 1;
        any = true;
      }
      const double d = (cx - gt.cx) * (cx - gt.cx) + (cy - gt.cy) * (cy - gt.cy);
      if (d < best) {
        best = d;
        nearest = i * grid + j;
      }
    }
  }
  if (!any) out.labels[nearest] = 1;
  return out;
}

LossInputs make_loss_inputs(const ProposalSet& proposals, const TargetAssignment& targets) {
  const std::size_t n = proposals.size();
  if (targets.labels.size() != n) {
    throw ShapeError("make_loss_inputs: " + std::to_string(targets.labels.size()) +
                     " labels for " + std::to_string(n) + " proposals");
  }
  LossInputs in;
  in.gt = targets.gt;
  in.labels = targets.labels;
  in.p.resize(n);
  in.p_loc.resize(n);
  in.ious.resize(n);
  in.boxes.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    in.p[j] = proposals.foreground_prob(j);
    in.p_loc[j] = proposals.loc_prob(j);
    in.boxes[j] = proposals.box(j);
    in.ious[j] = iou(in.boxes[j], targets.gt);
  }
  in.loc_targets = in.ious;
  return in;
}

LossParts compute_losses(const LossInputs& in, const LossConfig& config) {
  return {cls_loss(in.p, in.labels, in.ious),
          reg_loss(in.boxes, in.labels, in.p, in.gt, config).value,
          loc_loss(in.p_loc, in.loc_targets)};
}

LossGradients loss_gradients(const LossInputs& in, const LossConfig& config) {
  const std::size_t n = in.p.size();
  if (in.labels.size() != n || in.ious.size() != n || in.boxes.size() != n ||
      in.p_loc.size() != in.loc_targets.size()) {
    throw ShapeError("loss_gradients: input lengths differ");
  }
  LossGradients g;
  g.cls_dp.resize(n);
  g.reg_dbox.assign(n, BoxGrad{});
  for (std::size_t j = 0; j < n; ++j) {
    const double p = in.p[j];
    g.cls_dp[j] = in.labels[j] ? -in.ious[j] / p : 1.0 / (1.0 - p);
    if (!in.labels[j]) continue;
    const NormBox& b = in.boxes[j];
    const BoxGrad dc = ciou_loss_grad(b, in.gt);
    const std::array<double, 4> diff{b.cx - in.gt.cx, b.cy - in.gt.cy, b.w - in.gt.w,
                                     b.h - in.gt.h};
    for (int k = 0; k < 4; ++k) {
      const double sign = diff[k] > 0.0 ? 1.0 : (diff[k] < 0.0 ? -1.0 : 0.0);
      g.reg_dbox[j][k] = config.lambda_l1 * sign + config.lambda_ciou * in.p[j] * dc[k];
    }
  }
  g.loc_dp.resize(in.p_loc.size());
  for (std::size_t j = 0; j < in.p_loc.size(); ++j) {
    const double p = in.p_loc[j], o = in.loc_targets[j];
    g.loc_dp[j] = (p - o) / (p * (1.0 - p));
  }
  return g;
}

}  // namespace mtnet

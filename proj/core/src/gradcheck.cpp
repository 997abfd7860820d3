#include "mtnetkit/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <span>

#include "mtnetkit/error.hpp"

namespace mtnet {

double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  return scale == 0.0 ? 0.0 : std::abs(analytic - numeric) / scale;
}

namespace {

constexpr double kStationaryMargin = 0.01;

bool away_from_kinks(const NormBox& b, const NormBox& gt, double margin) {
  const auto far = [margin](double a, double c) { return std::abs(a - c) > margin; };
  const double bx1 = b.cx - 0.5 * b.w, bx2 = b.cx + 0.5 * b.w;
  const double by1 = b.cy - 0.5 * b.h, by2 = b.cy + 0.5 * b.h;
  const double gx1 = gt.cx - 0.5 * gt.w, gx2 = gt.cx + 0.5 * gt.w;
  const double gy1 = gt.cy - 0.5 * gt.h, gy2 = gt.cy + 0.5 * gt.h;
  if (!far(bx1, gx1) || !far(bx2, gx2) || !far(by1, gy1) || !far(by2, gy2)) return false;
  // overlap boundaries: iw = 0 or ih = 0
  const double iw = std::min(bx2, gx2) - std::max(bx1, gx1);
  const double ih = std::min(by2, gy2) - std::max(by1, gy1);
  if (std::abs(iw) < margin || std::abs(ih) < margin) return false;
  // L1 kinks
  return far(b.cx, gt.cx) && far(b.cy, gt.cy) && far(b.w, gt.w) && far(b.h, gt.h) &&
         b.w > 0.02 && b.h > 0.02;
}

double central_difference(double& x, double step, const auto& f) {
  const double saved = x;
  x = saved + step;
  const double up = f();
  x = saved - step;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * step);
}

}  // namespace

LossInputs random_loss_instance(Rng& rng, std::size_t proposals, double margin) {
  if (proposals == 0) throw ShapeError("random_loss_instance: need at least one proposal");
  LossInputs in;
  in.gt = {rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), rng.uniform(0.1, 0.4),
           rng.uniform(0.1, 0.4)};
  for (std::size_t j = 0; j < proposals; ++j) {
    NormBox b;
    do {
      b = {in.gt.cx + rng.uniform(-0.2, 0.2), in.gt.cy + rng.uniform(-0.2, 0.2),
           in.gt.w * rng.uniform(0.4, 1.8), in.gt.h * rng.uniform(0.4, 1.8)};
    } while (!away_from_kinks(b, in.gt, margin));
    in.boxes.push_back(b);
    in.labels.push_back(rng.uniform() < 0.5 ? 1 : 0);
    in.p.push_back(rng.uniform(0.05, 0.95));
    in.p_loc.push_back(rng.uniform(0.05, 0.95));
    // Near O = p_loc the partial vanishes and relative error is ill-conditioned.
    double target;
    do {
      target = rng.uniform();
    } while (std::abs(target - in.p_loc.back()) < kStationaryMargin);
    in.loc_targets.push_back(target);
  }
  in.labels[rng.below(proposals)] = 1;
  for (const NormBox& b : in.boxes) in.ious.push_back(iou(b, in.gt));
  return in;
}

GradcheckReport run_gradcheck(std::uint64_t seed, const LossConfig& config,
                              const GradcheckOptions& options) {
  if (options.trials < 1) throw ConfigError("gradcheck: trials must be >= 1");
  config.validate();
  GradcheckReport report;
  report.trials = options.trials;
  Rng rng(seed);
  const double h = options.step;

  for (int t = 0; t < options.trials; ++t) {
    LossInputs in = random_loss_instance(rng, options.proposals);
    LossGradients g = loss_gradients(in, config);
    switch (options.fault) {
      case GradientFault::none: break;
      case GradientFault::flip_cls_sign: g.cls_dp[0] = -g.cls_dp[0]; break;
      case GradientFault::flip_loc_sign: g.loc_dp[0] = -g.loc_dp[0]; break;
      case GradientFault::flip_reg_sign:
        for (std::size_t j = 0; j < in.labels.size(); ++j) {
          if (in.labels[j]) {
            g.reg_dbox[j][0] = -g.reg_dbox[j][0];
            break;
          }
        }
        break;
    }

    // Each loss is a sum over proposals and only term j depends on the
    // variables of proposal j, so the difference is taken on that term.
    // Differencing the whole sum would bury small partials in roundoff.
    const auto one = [](const auto& v, std::size_t j) { return std::span(v).subspan(j, 1); };
    for (std::size_t j = 0; j < in.p.size(); ++j) {
      const double num = central_difference(
          in.p[j], h, [&] { return cls_loss(one(in.p, j), one(in.labels, j), one(in.ious, j)); });
      report.max_rel_cls = std::max(report.max_rel_cls, relative_error(g.cls_dp[j], num));
      ++report.checked;
    }
    for (std::size_t j = 0; j < in.p_loc.size(); ++j) {
      const double num = central_difference(
          in.p_loc[j], h, [&] { return loc_loss(one(in.p_loc, j), one(in.loc_targets, j)); });
      report.max_rel_loc = std::max(report.max_rel_loc, relative_error(g.loc_dp[j], num));
      ++report.checked;
    }
    for (std::size_t j = 0; j < in.boxes.size(); ++j) {
      if (!in.labels[j]) continue;
      NormBox& b = in.boxes[j];
      double* coords[4] = {&b.cx, &b.cy, &b.w, &b.h};
      for (int k = 0; k < 4; ++k) {
        const double num = central_difference(*coords[k], h, [&] {
          return reg_loss(one(in.boxes, j), one(in.labels, j), one(in.p, j), in.gt, config).value;
        });
        report.max_rel_reg = std::max(report.max_rel_reg, relative_error(g.reg_dbox[j][k], num));
        ++report.checked;
      }
    }
  }
  report.passed = report.max_rel_cls < options.tolerance &&
                  report.max_rel_reg < options.tolerance &&
                  report.max_rel_loc < options.tolerance;
  return report;
}

}  // namespace mtnet

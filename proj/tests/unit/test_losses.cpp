#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include <mtnetkit/error.hpp>
#include <mtnetkit/gradcheck.hpp>
#include <mtnetkit/losses.hpp>
#include <mtnetkit/rng.hpp>

using namespace mtnet;

namespace {

// 1-D overlap from the two middle endpoints of the sorted interval ends.
double overlap_1d(double a1, double a2, double b1, double b2) {
  if (a2 <= b1 || b2 <= a1) return 0.0;
  std::array<double, 4> e{a1, a2, b1, b2};
  std::sort(e.begin(), e.end());
  return e[2] - e[1];
}

double reference_iou(const NormBox& a, const NormBox& b) {
  const double iw = overlap_1d(a.cx - a.w / 2, a.cx + a.w / 2, b.cx - b.w / 2, b.cx + b.w / 2);
  const double ih = overlap_1d(a.cy - a.h / 2, a.cy + a.h / 2, b.cy - b.h / 2, b.cy + b.h / 2);
  const double inter = iw * ih;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

// Complete-IoU loss written from its textbook definition with atan(w/h).
double reference_ciou(const NormBox& p, const NormBox& g) {
  const double i = reference_iou(p, g);
  const double rho2 = (p.cx - g.cx) * (p.cx - g.cx) + (p.cy - g.cy) * (p.cy - g.cy);
  const double cw = std::max(p.cx + p.w / 2, g.cx + g.w / 2) - std::min(p.cx - p.w / 2, g.cx - g.w / 2);
  const double ch = std::max(p.cy + p.h / 2, g.cy + g.h / 2) - std::min(p.cy - p.h / 2, g.cy - g.h / 2);
  const double d = std::atan(g.w / g.h) - std::atan(p.w / p.h);
  const double v = 4.0 / (std::numbers::pi * std::numbers::pi) * d * d;
  const double alpha = v == 0.0 ? 0.0 : v / (1.0 - i + v);
  return 1.0 - i + rho2 / (cw * cw + ch * ch) + alpha * v;
}

NormBox random_box(Rng& rng) {
  return {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.02, 0.6),
          rng.uniform(0.02, 0.6)};
}

// Counts grid points inside a box, as a coarse area check.
double sampled_iou(const NormBox& a, const NormBox& b, int n) {
  const auto inside = [](const NormBox& r, double x, double y) {
    return std::abs(x - r.cx) <= r.w / 2 && std::abs(y - r.cy) <= r.h / 2;
  };
  long in_a = 0, in_b = 0, both = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double x = (j + 0.5) / n * 1.5 - 0.25, y = (i + 0.5) / n * 1.5 - 0.25;
      const bool ia = inside(a, x, y), ib = inside(b, x, y);
      in_a += ia;
      in_b += ib;
      both += ia && ib;
    }
  }
  return static_cast<double>(both) / static_cast<double>(in_a + in_b - both);
}

double bce(double p, double y) { return -(y * std::log(p) + (1 - y) * std::log(1 - p)); }

}  // namespace

TEST_CASE("iou worked example and brute-force areas") {
  // corners (0,0)-(2,2) and (1,1)-(3,3)
  CHECK(iou(NormBox{1, 1, 2, 2}, NormBox{2, 2, 2, 2}) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  CHECK(iou(PixelBox{0, 0, 2, 2}, PixelBox{1, 1, 2, 2}) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  CHECK(iou(NormBox{0.2, 0.2, 0.1, 0.1}, NormBox{0.8, 0.8, 0.1, 0.1}) == 0.0);

  Rng rng(11);
  for (int t = 0; t < 1000; ++t) {
    const NormBox a = random_box(rng), b = random_box(rng);
    const double v = iou(a, b);
    CHECK(std::abs(v - reference_iou(a, b)) < 1e-10);
    CHECK(v == iou(b, a));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(iou(a, a) == 1.0);
  }
  for (int t = 0; t < 5; ++t) {
    const NormBox a = random_box(rng), b = random_box(rng);
    CHECK(std::abs(iou(a, b) - sampled_iou(a, b, 800)) < 2e-2);
  }
}

TEST_CASE("ciou matches the closed form") {
  CHECK(ciou_loss(NormBox{0.5, 0.5, 0.2, 0.2}, NormBox{0.5, 0.5, 0.4, 0.4}) ==
        doctest::Approx(0.75).epsilon(1e-15));

  Rng rng(12);
  for (int t = 0; t < 1000; ++t) {
    const NormBox p = random_box(rng), g = random_box(rng);
    const double l = ciou_loss(p, g);
    CHECK(std::abs(l - reference_ciou(p, g)) < 1e-10);
    CHECK(l >= 0.0);
  }
  for (int t = 0; t < 100; ++t) {
    const NormBox b = random_box(rng);
    CHECK(ciou_loss(b, b) == 0.0);
  }
}

TEST_CASE("ciou conventions and errors") {
  // zero-size prediction: IoU 0, aspect angle 0
  const NormBox g{0.5, 0.5, 0.2, 0.4};
  const double l = ciou_loss(NormBox{0.5, 0.5, 0.0, 0.0}, g);
  const double v = 4.0 / (std::numbers::pi * std::numbers::pi) * std::pow(std::atan(0.5), 2);
  CHECK(l == doctest::Approx(1.0 + v * v / (1.0 + v)).epsilon(1e-12));
  CHECK_THROWS_AS(ciou_loss(g, NormBox{0.5, 0.5, 0.0, 0.1}), ShapeError);
  CHECK_THROWS_AS(ciou_loss_grad(g, NormBox{0.5, 0.5, 0.1, 0.0}), ShapeError);
}

TEST_CASE("ciou gradient against finite differences") {
  Rng rng(13);
  for (int t = 0; t < 200; ++t) {
    const LossInputs in = random_loss_instance(rng, 1);
    const NormBox b = in.boxes[0];
    const BoxGrad g = ciou_loss_grad(b, in.gt);
    for (int k = 0; k < 4; ++k) {
      NormBox up = b, down = b;
      double* u[4] = {&up.cx, &up.cy, &up.w, &up.h};
      double* d[4] = {&down.cx, &down.cy, &down.w, &down.h};
      *u[k] += 1e-6;
      *d[k] -= 1e-6;
      const double num = (ciou_loss(up, in.gt) - ciou_loss(down, in.gt)) / 2e-6;
      CHECK(relative_error(g[k], num) < 1e-6);
    }
  }
}

TEST_CASE("cls loss") {
  const std::vector<double> p{0.5};
  const std::vector<std::uint8_t> y{1};
  const std::vector<double> one{1.0};
  CHECK(cls_loss(p, y, one) == doctest::Approx(0.693147).epsilon(1e-6));

  const std::vector<double> zero_iou{0.0};
  CHECK(cls_loss(std::vector<double>{0.3}, y, zero_iou) == 0.0);

  Rng rng(14);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> ps(20);
    std::vector<std::uint8_t> ls(20);
    double plain = 0.0;
    for (std::size_t j = 0; j < ps.size(); ++j) {
      ps[j] = rng.uniform(0.01, 0.99);
      ls[j] = rng.uniform() < 0.5;
      plain += bce(ps[j], ls[j]);
    }
    const std::vector<double> ones(20, 1.0);
    CHECK(std::abs(cls_loss(ps, ls, ones) - plain) < 1e-12);
  }

  // clamped logs stay finite
  const double edge = cls_loss(std::vector<double>{0.0, 1.0}, std::vector<std::uint8_t>{1, 0},
                               std::vector<double>{1.0, 1.0});
  CHECK(std::isfinite(edge));
  CHECK(edge == doctest::Approx(-std::log(kLogClamp) - std::log(1.0 - (1.0 - kLogClamp))).epsilon(1e-12));
  CHECK_THROWS_AS(cls_loss(p, y, std::vector<double>{}), ShapeError);
}

TEST_CASE("reg loss") {
  const LossConfig l1_only{5.0, 0.0, 8.0, 5.0, 1.0};
  const NormBox gt{0.5, 0.5, 0.3, 0.3};
  const std::vector<NormBox> off{{0.6, 0.6, 0.4, 0.4}};
  const std::vector<std::uint8_t> pos{1};
  const RegLoss r = reg_loss(off, pos, std::vector<double>{0.7}, gt, l1_only);
  CHECK(r.has_positives);
  CHECK(r.value == doctest::Approx(2.0).epsilon(1e-12));

  const LossConfig cfg;
  const std::vector<NormBox> perfect{gt};
  CHECK(reg_loss(perfect, pos, std::vector<double>{0.9}, gt, cfg).value == 0.0);

  const RegLoss none = reg_loss(off, std::vector<std::uint8_t>{0}, std::vector<double>{0.7}, gt, cfg);
  CHECK_FALSE(none.has_positives);
  CHECK(none.value == 0.0);

  // p weights the CIoU part only
  const double a = reg_loss(off, pos, std::vector<double>{0.3}, gt, cfg).value;
  const double b = reg_loss(off, pos, std::vector<double>{0.6}, gt, cfg).value;
  const double l1 = 5.0 * 0.4;
  CHECK(b - l1 == doctest::Approx(2.0 * (a - l1)).epsilon(1e-12));
  CHECK(a - l1 == doctest::Approx(2.0 * 0.3 * ciou_loss(off[0], gt)).epsilon(1e-12));
}

TEST_CASE("loc loss") {
  CHECK(loc_loss(std::vector<double>{0.5}, std::vector<double>{1.0}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(loc_loss(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 1.0}) ==
        doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-15));

  // targets equal to predictions give the minimum, with zero gradient
  Rng rng(15);
  for (int t = 0; t < 50; ++t) {
    LossInputs in = random_loss_instance(rng, 8);
    in.loc_targets = in.p_loc;
    const double at_min = loc_loss(in.p_loc, in.loc_targets);
    const LossGradients g = loss_gradients(in, LossConfig{});
    for (std::size_t j = 0; j < in.p_loc.size(); ++j) {
      CHECK(g.loc_dp[j] == 0.0);
      std::vector<double> moved = in.p_loc;
      moved[j] += 1e-6;
      const double up = loc_loss(moved, in.loc_targets);
      moved[j] -= 2e-6;
      const double down = loc_loss(moved, in.loc_targets);
      CHECK(std::abs(up - down) / 2e-6 < 1e-6);
      CHECK(up >= at_min);
      CHECK(down >= at_min);
    }
    std::vector<double> other(in.p_loc.size());
    for (double& v : other) v = rng.uniform(0.01, 0.99);
    CHECK(loc_loss(other, in.loc_targets) >= at_min);
  }
  CHECK_THROWS_AS(loc_loss(std::vector<double>{0.5}, std::vector<double>{}), ShapeError);
}

TEST_CASE("total loss weights") {
  const LossConfig cfg;
  CHECK(total_loss(cfg, {1, 1, 1}) == 14.0);
  CHECK(total_loss(cfg, {0, 0, 0}) == 0.0);
  CHECK(total_loss(cfg, {2, 0, 0}) == 16.0);
}

TEST_CASE("argmin of the weighted total is scale invariant") {
  // one-parameter family: a box sliding across the gt
  const NormBox gt{0.5, 0.5, 0.2, 0.2};
  const TargetAssignment targets = assign_targets(gt, 4);
  LossConfig cfg;
  std::vector<LossParts> family;
  for (int s = 0; s <= 100; ++s) {
    const double shift = -0.3 + 0.006 * s;
    LossInputs in;
    in.gt = gt;
    in.labels = targets.labels;
    for (std::size_t j = 0; j < in.labels.size(); ++j) {
      const NormBox b{gt.cx + shift, gt.cy - 0.5 * shift, 0.2, 0.25};
      in.boxes.push_back(b);
      in.ious.push_back(iou(b, gt));
      in.p.push_back(0.2 + 0.6 * in.ious.back());
      in.p_loc.push_back(0.5);
      in.loc_targets.push_back(in.ious.back());
    }
    family.push_back(compute_losses(in, cfg));
  }
  const auto argmin = [&](const LossConfig& c) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < family.size(); ++i) {
      if (total_loss(c, family[i]) < total_loss(c, family[best])) best = i;
    }
    return best;
  };
  const std::size_t base = argmin(cfg);
  for (double scale : {0.5, 3.0, 17.0}) {
    LossConfig scaled = cfg;
    scaled.n_cls *= scale;
    scaled.n_reg *= scale;
    scaled.n_loc *= scale;
    CHECK(argmin(scaled) == base);
  }
}

TEST_CASE("target assignment") {
  CHECK(assign_targets(NormBox{0.5, 0.5, 1.0, 1.0}).positives() == 1024);
  CHECK(assign_targets(NormBox{0.25, 0.5, 0.5, 1.0}).positives() == 512);

  const TargetAssignment tiny = assign_targets(NormBox{0.51, 0.52, 0.001, 0.001});
  REQUIRE(tiny.positives() == 1);
  const auto it = std::find(tiny.labels.begin(), tiny.labels.end(), 1);
  const std::size_t idx = static_cast<std::size_t>(it - tiny.labels.begin());
  CHECK(idx == 16 * 32 + 16);

  // counting oracle over random boxes
  Rng rng(16);
  for (int t = 0; t < 50; ++t) {
    const NormBox gt = random_box(rng);
    std::size_t cols = 0, rows = 0;
    for (int k = 0; k < 32; ++k) {
      const double c = (k + 0.5) / 32.0;
      cols += c >= gt.cx - gt.w / 2 && c <= gt.cx + gt.w / 2;
      rows += c >= gt.cy - gt.h / 2 && c <= gt.cy + gt.h / 2;
    }
    const std::size_t expect = std::max<std::size_t>(rows * cols, 1);
    CHECK(assign_targets(gt).positives() == expect);
  }
  CHECK_THROWS_AS(assign_targets(NormBox{0.5, 0.5, 0.0, 0.2}), ShapeError);
  CHECK_THROWS_AS(assign_targets(NormBox{0.5, 0.5, 0.2, 0.2}, 0), ShapeError);
}

TEST_CASE("zero head gives neutral proposals") {
  const ProposalSet out = head_forward(Tensor({1024, 32}), HeadParams::zeros(32));
  REQUIRE(out.size() == 1024);
  for (std::size_t j = 0; j < out.size(); j += 97) {
    CHECK(out.foreground_prob(j) == 0.5);
    CHECK(out.loc_prob(j) == 0.5);
    CHECK(out.box(j) == NormBox{0.5, 0.5, 0.5, 0.5});
  }
}

TEST_CASE("make_loss_inputs uses the regressed boxes") {
  const ProposalSet out = head_forward(Tensor({16, 8}), HeadParams::zeros(8));
  const TargetAssignment targets = assign_targets(NormBox{0.5, 0.5, 0.5, 0.5}, 4);
  const LossInputs in = make_loss_inputs(out, targets);
  CHECK(in.ious.size() == 16);
  for (double v : in.ious) CHECK(v == 1.0);
  CHECK(in.loc_targets == in.ious);
  const LossParts parts = compute_losses(in, LossConfig{});
  CHECK(parts.reg == 0.0);
  CHECK(parts.cls == doctest::Approx(16 * std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(make_loss_inputs(out, assign_targets(NormBox{0.5, 0.5, 0.5, 0.5}, 3)),
                  ShapeError);
}

TEST_CASE("analytic gradients: closed forms") {
  LossInputs in;
  in.gt = {0.5, 0.5, 0.2, 0.2};
  in.p = {0.3, 0.4};
  in.labels = {0, 1};
  in.ious = {0.0, 0.5};
  in.boxes = {{0.4, 0.4, 0.1, 0.1}, {0.55, 0.45, 0.25, 0.15}};
  in.p_loc = {0.2};
  in.loc_targets = {0.6};
  const LossGradients g = loss_gradients(in, LossConfig{});
  CHECK(g.cls_dp[0] == doctest::Approx(1.0 / 0.7).epsilon(1e-15));
  CHECK(g.cls_dp[1] == doctest::Approx(-0.5 / 0.4).epsilon(1e-15));
  CHECK(g.loc_dp[0] == doctest::Approx((0.2 - 0.6) / (0.2 * 0.8)).epsilon(1e-15));
  CHECK(g.reg_dbox[0] == BoxGrad{});
}

TEST_CASE("gradcheck passes and catches every injected fault") {
  const GradcheckReport ok = run_gradcheck(1, LossConfig{});
  CHECK(ok.passed);
  CHECK(ok.trials == 100);
  CHECK(ok.max_rel_cls < 1e-6);
  CHECK(ok.max_rel_reg < 1e-6);
  CHECK(ok.max_rel_loc < 1e-6);
  CHECK(ok.checked > 0);

  for (GradientFault f :
       {GradientFault::flip_cls_sign, GradientFault::flip_reg_sign, GradientFault::flip_loc_sign}) {
    GradcheckOptions opts;
    opts.trials = 3;
    opts.fault = f;
    CHECK_FALSE(run_gradcheck(1, LossConfig{}, opts).passed);
  }
  GradcheckOptions none;
  none.trials = 0;
  CHECK_THROWS_AS(run_gradcheck(1, LossConfig{}, none), ConfigError);
}

TEST_CASE("loss config validation") {
  LossConfig c;
  CHECK_NOTHROW(c.validate());
  c.n_reg = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

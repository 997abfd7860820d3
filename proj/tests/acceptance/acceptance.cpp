// Acceptance checks: one PASS/FAIL line per criterion, tolerances and time
// budgets pinned below. Exit status is nonzero if any criterion fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <mtnetkit/config.hpp>
#include <mtnetkit/gradcheck.hpp>
#include <mtnetkit/losses.hpp>
#include <mtnetkit/metrics.hpp>
#include <mtnetkit/modality_aware.hpp>
#include <mtnetkit/rng.hpp>
#include <mtnetkit/statecheck.hpp>
#include <mtnetkit/synth.hpp>
#include <mtnetkit/tracker.hpp>

#include "commands.hpp"

using namespace mtnet;
namespace fs = std::filesystem;

namespace {

constexpr double kReductionTol = 1e-12;
constexpr double kGradTol = 1e-6;
constexpr double kGeometryTol = 1e-10;
constexpr double kRowSumTol = 1e-9;
constexpr double kIdentityTol = 1e-12;
constexpr double kMetricsTol = 1e-12;
constexpr double kTrackedFraction = 0.9;

constexpr double kBudgetReductions = 1.0;
constexpr double kBudgetGradients = 10.0;
constexpr double kBudgetStateMachine = 30.0;
constexpr double kBudgetEndToEnd = 60.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 1. reductions --------------------------------------------------------

Outcome reductions() {
  Rng rng(101);
  double worst_fuse = 0.0;
  for (int t = 0; t < 20; ++t) {
    const FeatureQuad q{rng.uniform_tensor({64, 8, 8}, -1, 1), rng.uniform_tensor({64, 8, 8}, -1, 1),
                        rng.uniform_tensor({64, 16, 16}, -1, 1),
                        rng.uniform_tensor({64, 16, 16}, -1, 1)};
    const Tensor zero({1, 16, 16});
    const FusedFeatures f = sspm_fuse(q, {zero, zero});
    for (std::size_t i = 0; i < f.search.size(); ++i) {
      worst_fuse = std::max(worst_fuse, std::abs(f.search[i] - (q.rgb_search[i] + q.thermal_search[i])));
    }
  }
  double worst_bce = 0.0;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> p(256), ones(256, 1.0);
    std::vector<std::uint8_t> y(256);
    double plain = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      p[j] = rng.uniform(0.001, 0.999);
      y[j] = rng.uniform() < 0.5;
      plain -= y[j] ? std::log(p[j]) : std::log(1.0 - p[j]);
    }
    worst_bce = std::max(worst_bce, std::abs(cls_loss(p, y, ones) - plain));
  }
  return {worst_fuse <= kReductionTol && worst_bce <= kReductionTol,
          fmt("residual-only fuse err %.1e, IoU=1 BCE err %.1e, tol %.0e", worst_fuse, worst_bce,
              kReductionTol)};
}

// ---- 2. gradients ---------------------------------------------------------

Outcome gradients() {
  GradcheckOptions opts;
  opts.trials = 100;
  opts.step = 1e-6;
  opts.tolerance = kGradTol;
  const GradcheckReport r = run_gradcheck(1, LossConfig{}, opts);
  return {r.passed, fmt("%d instances, max rel err cls %.2e reg %.2e loc %.2e, tol %.0e", r.trials,
                        r.max_rel_cls, r.max_rel_reg, r.max_rel_loc, kGradTol)};
}

// ---- 3. geometry ----------------------------------------------------------

double overlap(double a1, double a2, double b1, double b2) {
  std::array<double, 4> e{a1, a2, b1, b2};
  if (a2 <= b1 || b2 <= a1) return 0.0;
  std::sort(e.begin(), e.end());
  return e[2] - e[1];
}

double ref_iou(const NormBox& a, const NormBox& b) {
  const double inter = overlap(a.cx - a.w / 2, a.cx + a.w / 2, b.cx - b.w / 2, b.cx + b.w / 2) *
                       overlap(a.cy - a.h / 2, a.cy + a.h / 2, b.cy - b.h / 2, b.cy + b.h / 2);
  return inter / (a.w * a.h + b.w * b.h - inter);
}

double ref_ciou(const NormBox& p, const NormBox& g) {
  const double i = ref_iou(p, g);
  const double rho2 = std::pow(p.cx - g.cx, 2) + std::pow(p.cy - g.cy, 2);
  const double cw = std::max(p.cx + p.w / 2, g.cx + g.w / 2) - std::min(p.cx - p.w / 2, g.cx - g.w / 2);
  const double ch = std::max(p.cy + p.h / 2, g.cy + g.h / 2) - std::min(p.cy - p.h / 2, g.cy - g.h / 2);
  const double v = 4.0 / (std::numbers::pi * std::numbers::pi) *
                   std::pow(std::atan(g.w / g.h) - std::atan(p.w / p.h), 2);
  const double alpha = v == 0.0 ? 0.0 : v / (1.0 - i + v);
  return 1.0 - i + rho2 / (cw * cw + ch * ch) + alpha * v;
}

Outcome geometry() {
  Rng rng(103);
  const auto box = [&] {
    return NormBox{rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.02, 0.6),
                   rng.uniform(0.02, 0.6)};
  };
  double worst_iou = 0.0, worst_ciou = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const NormBox a = box(), b = box();
    worst_iou = std::max(worst_iou, std::abs(iou(a, b) - ref_iou(a, b)));
    worst_ciou = std::max(worst_ciou, std::abs(ciou_loss(a, b) - ref_ciou(a, b)));
  }
  int self_zero = 0;
  for (int t = 0; t < 100; ++t) {
    const NormBox b = box();
    self_zero += ciou_loss(b, b) == 0.0;
  }
  return {worst_iou <= kGeometryTol && worst_ciou <= kGeometryTol && self_zero == 100,
          fmt("1000 pairs: iou err %.1e, ciou err %.1e (tol %.0e); ciou(b,b)==0 for %d/100",
              worst_iou, worst_ciou, kGeometryTol, self_zero)};
}

// ---- 4. attention ---------------------------------------------------------

Outcome attention() {
  const RunConfig cfg;
  const TrackerModel model = TrackerModel::build(cfg);
  SynthConfig sc;
  sc.frames = 2;
  const SyntheticSequence seq = generate_sequence(sc);
  const BackboneConfig& bc = cfg.backbone;
  const PixelBox& box = seq.groundtruth[0];

  // Default-shape tokens from the real pipeline.
  const auto crop = [&](const Frame& f, double s, std::size_t size) {
    return model.backbone.extract(crop_region(f.rgb, box, s, size).pixels,
                                  crop_region(f.thermal, box, s, size).pixels);
  };
  const auto refined = model.modality.refine_template(crop(seq.frames[0], bc.template_scale, bc.template_size));
  const TokenSeq z = model.fusion.tokenize_template(model.modality.fuse_template(refined));
  const TokenSeq x = model.fusion.tokenize_search(
      model.modality.fuse_search(refined, crop(seq.frames[1], bc.search_scale, bc.search_size)));

  double worst_row = 0.0;
  std::size_t matrices = 0;
  const AttentionObserver obs = [&](std::string_view, std::size_t, const Tensor& probs) {
    ++matrices;
    for (std::size_t r = 0; r < probs.dim(0); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < probs.dim(1); ++c) s += probs.at(r, c);
      worst_row = std::max(worst_row, std::abs(s - 1.0));
    }
  };
  model.fusion.forward(z, x, &obs);

  Rng rng(104);
  FusionParams zeroed = FusionParams::random(bc.channels, cfg.fusion, rng);
  zeroed.zero_output_projections();
  const Tensor same = fusion_forward(z, x, zeroed, cfg.fusion);
  double worst_identity = 0.0;
  for (std::size_t i = 0; i < same.size(); ++i) {
    worst_identity = std::max(worst_identity, std::abs(same[i] - x.tokens[i]));
  }

  FusionConfig nopos = cfg.fusion;
  nopos.use_pos = false;
  const FusionParams p = FusionParams::random(bc.channels, nopos, rng);
  const std::size_t n = x.tokens.dim(0), d = x.tokens.dim(1);
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  Tensor xp({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) xp.at(i, k) = x.tokens.at(perm[i], k);
  }
  const Tensor a = fusion_forward(z, x, p, nopos);
  const Tensor b = fusion_forward(z, {xp, x.pos}, p, nopos);
  double worst_perm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) worst_perm = std::max(worst_perm, std::abs(b.at(i, k) - a.at(perm[i], k)));
  }
  return {matrices > 0 && worst_row <= kRowSumTol && worst_identity <= kIdentityTol &&
              worst_perm <= kIdentityTol,
          fmt("%zu attention maps, row-sum err %.1e (tol %.0e); zero-projection err %.1e; "
              "permutation err %.1e (tol %.0e)",
              matrices, worst_row, kRowSumTol, worst_identity, worst_perm, kIdentityTol)};
}

// ---- 5. state machine -----------------------------------------------------

Outcome state_machine() {
  const StatecheckReport r = run_statecheck();
  RunConfig cfg;
  bool accepted = true;
  for (auto [m, n] : {std::pair{50, 2}, std::pair{70, 2}}) {
    cfg.update.steady_frames = m;
    cfg.update.unstable_frames = n;
    try {
      cfg.validate();
    } catch (const std::exception&) {
      accepted = false;
    }
  }
  return {r.passed() && r.combinations == 59049 && accepted,
          fmt("%zu combinations, %zu mismatches; {50,2} and {70,2} %s", r.combinations,
              r.mismatches, accepted ? "accepted" : "rejected")};
}

// ---- 6. metrics -----------------------------------------------------------

struct BruteScores {
  double pr, sr, npr;
};

BruteScores brute_scores(const std::vector<PixelBox>& gt, const std::vector<PixelBox>& pr) {
  const std::size_t n = gt.size();
  std::vector<double> err(n), nerr(n), ov(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = gt[i].x + gt[i].w / 2 - (pr[i].x + pr[i].w / 2);
    const double dy = gt[i].y + gt[i].h / 2 - (pr[i].y + pr[i].h / 2);
    err[i] = std::sqrt(dx * dx + dy * dy);
    nerr[i] = std::sqrt(std::pow(dx / gt[i].w, 2) + std::pow(dy / gt[i].h, 2));
    const double iw = std::max(0.0, std::min(gt[i].x + gt[i].w, pr[i].x + pr[i].w) - std::max(gt[i].x, pr[i].x));
    const double ih = std::max(0.0, std::min(gt[i].y + gt[i].h, pr[i].y + pr[i].h) - std::max(gt[i].y, pr[i].y));
    ov[i] = iw * ih / (gt[i].w * gt[i].h + pr[i].w * pr[i].h - iw * ih);
  }
  BruteScores s{0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) s.pr += err[i] <= 20.0;
  s.pr /= static_cast<double>(n);
  for (int k = 0; k <= 20; ++k) {
    int c = 0;
    for (double v : ov) c += v > k / 20.0;
    s.sr += static_cast<double>(c) / static_cast<double>(n);
  }
  s.sr /= 21.0;
  for (int k = 0; k <= 100; ++k) {
    int c = 0;
    for (double v : nerr) c += v <= k / 200.0;
    s.npr += static_cast<double>(c) / static_cast<double>(n);
  }
  s.npr /= 101.0;
  return s;
}

Outcome metrics() {
  Rng rng(106);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    std::vector<PixelBox> gt, pr;
    for (int i = 0; i < 200; ++i) {
      const PixelBox g{rng.uniform(0, 300), rng.uniform(0, 200), rng.uniform(5, 80), rng.uniform(5, 80)};
      const double j = rng.uniform(0, 40);
      gt.push_back(g);
      pr.push_back({g.x + rng.uniform(-j, j), g.y + rng.uniform(-j, j), g.w * rng.uniform(0.5, 1.5),
                    g.h * rng.uniform(0.5, 1.5)});
    }
    const Scores s = score_sequence(evaluate_sequence(gt, pr));
    const BruteScores b = brute_scores(gt, pr);
    worst = std::max({worst, std::abs(s.precision - b.pr), std::abs(s.success - b.sr),
                      std::abs(s.normalized.value_or(-1.0) - b.npr)});
    if (t == 0) {
      const Scores self = score_sequence(evaluate_sequence(gt, gt));
      if (!(self.precision == 1.0 && self.normalized == 1.0 &&
            std::abs(self.success - 20.0 / 21.0) <= kMetricsTol)) {
        return {false, fmt("self-evaluation gave PR %.6f SR %.6f", self.precision, self.success)};
      }
    }
  }
  return {worst <= kMetricsTol,
          fmt("100 x 200 frames, max err %.1e (tol %.0e); self-eval PR=1 NPR=1 SR=20/21", worst,
              kMetricsTol)};
}

// ---- 7. end to end --------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct PipelineRun {
  int code = -1;
  double seconds = 0.0;
  std::string results, state, report;
};

PipelineRun run_pipeline(const fs::path& root) {
  fs::remove_all(root);
  std::ostringstream sink;
  PipelineRun r;
  const auto t0 = std::chrono::steady_clock::now();
  cli::SynthOptions so;
  so.seed = 7;
  so.frames = 60;
  so.out = root / "seq";
  r.code = cli::cmd_synth(so, sink, sink);
  if (r.code == 0) {
    cli::TrackOptions to;
    to.input = root / "seq";
    to.out = root / "track";
    r.code = cli::cmd_track(to, sink, sink);
  }
  if (r.code == 0) {
    cli::EvalOptions eo;
    eo.groundtruth = root / "seq";
    eo.results = root / "track";
    eo.out = root / "eval";
    r.code = cli::cmd_eval(eo, sink, sink);
  }
  r.seconds = seconds_since(t0);
  r.results = slurp(root / "track" / "seq.txt");
  r.state = slurp(root / "track" / "seq_state.json");
  r.report = slurp(root / "eval" / "eval.json");
  return r;
}

Outcome end_to_end() {
  const fs::path base = fs::temp_directory_path() / "mtnetkit_acceptance";
  const PipelineRun a = run_pipeline(base / "a");
  const PipelineRun b = run_pipeline(base / "b");
  std::size_t rows = 0;
  for (char c : a.results) rows += c == '\n';
  bool all_1024 = false;
  try {
    const auto log = nlohmann::json::parse(a.state);
    all_1024 = log["frames"].size() == 60;
    for (std::size_t i = 1; i < log["frames"].size(); ++i) {
      all_1024 = all_1024 && log["frames"][i]["proposals"] == 1024;
    }
    all_1024 = all_1024 && nlohmann::json::parse(a.report).contains("overall");
  } catch (const std::exception&) {
    all_1024 = false;
  }
  const bool identical = a.results == b.results && a.state == b.state && a.report == b.report;
  const bool ok = a.code == 0 && b.code == 0 && rows == 60 && identical && all_1024 &&
                  a.seconds < kBudgetEndToEnd && b.seconds < kBudgetEndToEnd;
  std::error_code ec;
  fs::remove_all(base, ec);
  return {ok, fmt("exit %d/%d, %zu rows, outputs %s, 1024 proposals/frame %s, runs %.1f s and %.1f s "
                  "(budget %.0f s each)",
                  a.code, b.code, rows, identical ? "byte-identical" : "DIFFER",
                  all_1024 ? "yes" : "no", a.seconds, b.seconds, kBudgetEndToEnd)};
}

// ---- 8. static target -----------------------------------------------------

Outcome static_target() {
  // Template and search crops pass through the same seeded backbone.
  const RunConfig cfg;
  const TrackerModel model = TrackerModel::build(cfg);
  const SyntheticSequence seq = generate_sequence(SynthConfig::static_target(20));
  const TrackResult r = track_sequence(seq.frames, seq.groundtruth[0], model, cfg);
  std::size_t inside = 0, tracked = 0;
  for (std::size_t i = 1; i < r.frames.size(); ++i) {
    const PixelBox& g = seq.groundtruth[i];
    const PixelBox& p = r.frames[i].box;
    ++tracked;
    inside += p.cx() >= g.x && p.cx() <= g.x + g.w && p.cy() >= g.y && p.cy() <= g.y + g.h;
  }
  const double frac = static_cast<double>(inside) / static_cast<double>(tracked);
  return {frac >= kTrackedFraction,
          fmt("centre inside gt on %zu/%zu tracked frames (%.2f, need >= %.2f)", inside, tracked,
              frac, kTrackedFraction)};
}

struct Criterion {
  int id;
  const char* name;
  double budget;  // seconds, 0 = none
  std::function<Outcome()> check;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "equation reductions", kBudgetReductions, reductions},
      {2, "gradient suite", kBudgetGradients, gradients},
      {3, "geometry oracle", 0.0, geometry},
      {4, "attention properties", 0.0, attention},
      {5, "state machine", kBudgetStateMachine, state_machine},
      {6, "metrics oracle", 0.0, metrics},
      {7, "end-to-end determinism", 0.0, end_to_end},
      {8, "static-target tracking", 0.0, static_target},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    std::string timing = fmt("%.2f s", secs);
    if (c.budget > 0.0) {
      timing += fmt(" of %.0f s", c.budget);
      if (secs >= c.budget) o.pass = false;
    }
    std::printf("%s [%d] %s: %s (%s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                timing.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

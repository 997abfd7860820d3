#include <doctest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include <json.hpp>

#include <mtnetkit/config.hpp>
#include <mtnetkit/error.hpp>
#include <mtnetkit/scoring.hpp>
#include <mtnetkit/statecheck.hpp>
#include <mtnetkit/synth.hpp>
#include <mtnetkit/tracker.hpp>
#include <mtnetkit/update_state.hpp>

using namespace mtnet;

namespace {

UpdateConfig mn(int m, int n) {
  UpdateConfig c;
  c.steady_frames = m;
  c.unstable_frames = n;
  return c;
}

std::vector<UpdateAction> fold(const std::vector<double>& confs, const UpdateConfig& cfg) {
  std::vector<UpdateAction> out;
  UpdateState s;
  for (std::size_t i = 0; i < confs.size(); ++i) {
    const UpdateStep step = update_step(s, confs[i], cfg, static_cast<int>(i) + 1);
    s = step.state;
    out.push_back(step.action);
  }
  return out;
}

// Proposal set whose raw score p_cls * p_loc is chosen per token. The
// foreground probability is set to the raw score and p_loc to 1.
ProposalSet proposals_with(const std::vector<double>& raw) {
  const std::size_t n = raw.size();
  ProposalSet p{Tensor({n, 2}), Tensor({n, 4}, 0.5), Tensor({n, 1}, 800.0)};
  for (std::size_t j = 0; j < n; ++j) {
    p.cls_logits.at(j, 1) = std::log(raw[j] / (1.0 - raw[j]));
    p.boxes.at(j, 0) = static_cast<double>(j);
  }
  return p;
}

RunConfig small_config() {
  RunConfig c;
  return c;
}

SynthConfig short_sequence(std::size_t frames) {
  SynthConfig s;
  s.frames = frames;
  return s;
}

}  // namespace

TEST_CASE("update_step worked traces") {
  using A = UpdateAction;
  CHECK(fold({0.95, 0.95}, mn(2, 2)) == std::vector<A>{A::keep, A::replace_with_current});
  CHECK(fold({0.6, 0.8, 0.6}, mn(50, 2)) ==
        std::vector<A>{A::keep, A::keep, A::restore_initial});
  const std::vector<A> kept = fold(std::vector<double>(200, 0.8), mn(2, 2));
  CHECK(std::all_of(kept.begin(), kept.end(), [](A a) { return a == A::keep; }));

  // a transient frame breaks the steady run
  CHECK(fold({0.95, 0.8, 0.95}, mn(2, 2)) == std::vector<A>(3, A::keep));
  // N = 0 restores on the first drop
  CHECK(fold({0.6}, mn(2, 0)) == std::vector<A>{A::restore_initial});
  // boundaries: hi itself is transient, lo itself is transient
  CHECK(fold({0.9, 0.9}, mn(1, 1)) == std::vector<A>(2, A::keep));
  CHECK(fold({0.7}, mn(1, 1)) == std::vector<A>{A::keep});
}

TEST_CASE("update_step state bookkeeping") {
  const UpdateConfig cfg = mn(2, 2);
  UpdateState s;
  CHECK(s.active.initial);
  CHECK(s.mode == TrackingMode::steady);

  UpdateStep st = update_step(s, 0.95, cfg, 4);
  CHECK(st.state.steady_run == 1);
  st = update_step(st.state, 0.95, cfg, 5);
  CHECK(st.action == UpdateAction::replace_with_current);
  CHECK(st.state.active == ActiveTemplate{false, 5});
  CHECK(st.state.steady_run == 0);
  CHECK(st.state.unstable_acc == 0);

  st = update_step(st.state, 0.6, cfg, 6);
  CHECK(st.state.mode == TrackingMode::unstable);
  CHECK(st.state.unstable_acc == 1);
  st = update_step(st.state, 0.8, cfg, 7);
  CHECK(st.state.mode == TrackingMode::transient_steady);
  CHECK(st.state.unstable_acc == 1);
  st = update_step(st.state, 0.6, cfg, 8);
  CHECK(st.action == UpdateAction::restore_initial);
  CHECK(st.state.active == ActiveTemplate{true, 0});
  CHECK(st.state.unstable_acc == 0);

  CHECK_THROWS_AS(update_step(s, 1.5, cfg), std::invalid_argument);
  CHECK_THROWS_AS(update_step(s, -0.1, cfg), std::invalid_argument);
  CHECK_THROWS_AS(update_step(s, std::nan(""), cfg), std::invalid_argument);
}

TEST_CASE("counters are zero after every template change and active is initial before the first replace") {
  const std::array<double, 3> alphabet{0.6, 0.8, 0.95};
  Rng rng(21);
  for (int t = 0; t < 2000; ++t) {
    const UpdateConfig cfg = mn(1 + static_cast<int>(rng.below(3)), static_cast<int>(rng.below(4)));
    UpdateState s;
    bool replaced = false;
    for (int f = 1; f <= 12; ++f) {
      const UpdateStep st = update_step(s, alphabet[rng.below(3)], cfg, f);
      if (st.action != UpdateAction::keep) {
        CHECK(st.state.steady_run == 0);
        CHECK(st.state.unstable_acc == 0);
      }
      if (st.action == UpdateAction::replace_with_current) replaced = true;
      if (!replaced) CHECK(st.state.active.initial);
      s = st.state;
    }
  }
}

TEST_CASE("raising one confidence never turns a replace into a restore") {
  const std::array<double, 3> alphabet{0.6, 0.8, 0.95};
  for (int m = 1; m <= 3; ++m) {
    for (int n = 1; n <= 3; ++n) {
      const UpdateConfig cfg = mn(m, n);
      for (int code = 0; code < 729; ++code) {
        std::vector<double> trace;
        for (int c = code, i = 0; i < 6; ++i, c /= 3) trace.push_back(alphabet[c % 3]);
        const std::vector<UpdateAction> base = fold(trace, cfg);
        for (std::size_t i = 0; i < trace.size(); ++i) {
          for (double up : alphabet) {
            if (up <= trace[i]) continue;
            std::vector<double> raised = trace;
            raised[i] = up;
            const std::vector<UpdateAction> r = fold(raised, cfg);
            for (std::size_t f = 0; f < r.size(); ++f) {
              if (base[f] == UpdateAction::replace_with_current) {
                CHECK(r[f] != UpdateAction::restore_initial);
              }
            }
          }
        }
      }
    }
  }
}

TEST_CASE("exhaustive statecheck") {
  const StatecheckReport ok = run_statecheck();
  CHECK(ok.passed());
  CHECK(ok.traces == 6561);
  CHECK(ok.combinations == 59049);
  CHECK_FALSE(ok.counterexample.has_value());

  const StatecheckReport bad = run_statecheck(ReferenceFault::unstable_off_by_one);
  CHECK_FALSE(bad.passed());
  REQUIRE(bad.counterexample.has_value());
  const Counterexample& ce = *bad.counterexample;
  CHECK(ce.expected != ce.actual);
  // minimal: every strict prefix agrees
  const UpdateConfig cfg = mn(ce.steady_frames, ce.unstable_frames);
  std::vector<double> prefix(ce.trace.begin(), ce.trace.end() - 1);
  CHECK(reference_actions(prefix, cfg, ReferenceFault::unstable_off_by_one) ==
        replay_actions(prefix, cfg));
  CHECK(replay_actions(ce.trace, cfg).back() == ce.actual);
}

TEST_CASE("reference and replay agree on the worked traces") {
  const std::vector<double> t{0.6, 0.8, 0.6, 0.95, 0.95, 0.95};
  for (int m = 1; m <= 3; ++m) {
    for (int n = 0; n <= 3; ++n) {
      CHECK(reference_actions(t, mn(m, n)) == replay_actions(t, mn(m, n)));
      CHECK(replay_actions(t, mn(m, n)) == fold(t, mn(m, n)));
    }
  }
}

TEST_CASE("update config validation") {
  CHECK_NOTHROW(mn(50, 2).validate());
  CHECK_NOTHROW(mn(70, 2).validate());
  CHECK_THROWS_AS(mn(0, 2).validate(), ConfigError);
  CHECK_THROWS_AS(mn(2, -1).validate(), ConfigError);
  UpdateConfig c;
  c.lo = 0.95;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = UpdateConfig{};
  c.hi = 1.2;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  RunConfig run;
  for (auto [m, n] : {std::pair{50, 2}, std::pair{70, 2}}) {
    run.update = mn(m, n);
    CHECK_NOTHROW(run.validate());
  }
}

TEST_CASE("hann window") {
  const std::vector<double> w = hann_window(32);
  for (std::size_t k = 0; k < 32; ++k) {
    CHECK(w[k] == w[31 - k]);
    CHECK(std::abs(w[k] - (0.5 - 0.5 * std::cos(2 * std::numbers::pi * k / 31.0))) < 1e-14);
  }
  CHECK(w[0] == 0.0);
  CHECK(hann_window(1) == std::vector<double>{1.0});

  const std::vector<double> w2 = hann_window_2d(32);
  const auto peak = std::max_element(w2.begin(), w2.end());
  CHECK(peak - w2.begin() == 15 * 32 + 15);
  CHECK(w2[15 * 32 + 16] == *peak);
  CHECK(w2[16 * 32 + 16] == *peak);
}

TEST_CASE("window-penalised scoring") {
  Rng rng(22);
  std::vector<double> raw(1024);
  for (double& v : raw) v = rng.uniform(0.05, 0.95);
  const ProposalSet p = proposals_with(raw);

  SUBCASE("gamma 0 ranks by raw score") {
    const std::vector<double> s = score_proposals(p, 0.0);
    const std::size_t best = static_cast<std::size_t>(std::max_element(raw.begin(), raw.end()) - raw.begin());
    const Selection sel = select_best(s, p);
    CHECK(sel.index == best);
    CHECK(sel.confidence == doctest::Approx(raw[best]).epsilon(1e-9));
    CHECK(sel.box.cx == static_cast<double>(best));
  }
  SUBCASE("gamma 1 picks the centre") {
    CHECK(select_best(score_proposals(p, 1.0), p).index == 495);
  }
  SUBCASE("uniform raw scores pick the centre for any positive gamma") {
    const ProposalSet flat = proposals_with(std::vector<double>(1024, 0.3));
    for (double g : {0.01, 0.45, 0.9}) CHECK(select_best(score_proposals(flat, g), flat).index == 495);
  }
  SUBCASE("confidence is the unpenalised product") {
    const Selection sel = select_best(score_proposals(p, 0.45), p);
    CHECK(sel.confidence == doctest::Approx(raw[sel.index]).epsilon(1e-9));
  }
  SUBCASE("positive rescaling keeps the gamma 0 argmax") {
    const std::vector<double> s = score_proposals(p, 0.0);
    for (double k : {0.5, 3.0}) {
      std::vector<double> scaled = s;
      for (double& v : scaled) v *= k;
      CHECK(select_best(scaled, p).index == select_best(s, p).index);
    }
  }
  CHECK_THROWS_AS(score_proposals(p, 1.5), ConfigError);
  CHECK_THROWS_AS(score_proposals(proposals_with(std::vector<double>(10, 0.5)), 0.4), ShapeError);
}

TEST_CASE("select_best ties go to the lowest index") {
  const ProposalSet p = proposals_with({0.2, 0.7, 0.7, 0.1});
  CHECK(select_best({0.2, 0.7, 0.7, 0.1}, p).index == 1);
  CHECK(select_best({0.9, 0.1, 0.1, 0.1}, p).index == 0);
  CHECK_THROWS_AS(select_best({}, p), ShapeError);
}

TEST_CASE("one-frame sequence returns the init box") {
  const RunConfig cfg = small_config();
  const TrackerModel model = TrackerModel::build(cfg);
  const SyntheticSequence seq = generate_sequence(short_sequence(1));
  const TrackResult r = track_sequence(seq.frames, seq.groundtruth[0], model, cfg);
  REQUIRE(r.frames.size() == 1);
  CHECK(r.frames[0].box == seq.groundtruth[0]);
  CHECK(r.frames[0].confidence == 1.0);
  CHECK(r.frames[0].action == UpdateAction::keep);
}

TEST_CASE("tracking is deterministic and its log replays") {
  const RunConfig cfg = small_config();
  const TrackerModel model = TrackerModel::build(cfg);
  const SyntheticSequence seq = generate_sequence(short_sequence(6));
  const TrackResult a = track_sequence(seq.frames, seq.groundtruth[0], model, cfg);
  const TrackResult b = track_sequence(seq.frames, seq.groundtruth[0], TrackerModel::build(cfg), cfg);
  REQUIRE(a.frames.size() == 6);
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    CHECK(a.frames[i].box == b.frames[i].box);
    CHECK(a.frames[i].confidence == b.frames[i].confidence);
  }
  CHECK(state_log_json(a, 1, "x") == state_log_json(b, 1, "x"));

  // replay oracle: the recorded confidences drive the same actions
  UpdateState s;
  for (std::size_t i = 1; i < a.frames.size(); ++i) {
    const FrameResult& f = a.frames[i];
    CHECK(f.proposals == 1024);
    CHECK(f.confidence >= 0.0);
    CHECK(f.confidence <= 1.0);
    const UpdateStep st = update_step(s, f.confidence, cfg.update, f.frame);
    CHECK(st.action == f.action);
    CHECK(st.state == f.state);
    s = st.state;
  }

  const nlohmann::json log = nlohmann::json::parse(state_log_json(a, 9, "seq"));
  CHECK(log["seed"] == 9);
  CHECK(log["sequence"] == "seq");
  CHECK(log["frames"].size() == 6);
  CHECK(log["frames"][1]["proposals"] == 1024);
}

TEST_CASE("stress config replaces the template every frame") {
  RunConfig cfg = small_config();
  cfg.update.steady_frames = 1;
  cfg.update.hi = 0.0;
  cfg.update.lo = 0.0;
  const TrackerModel model = TrackerModel::build(cfg);
  const SyntheticSequence seq = generate_sequence(short_sequence(4));
  const TrackResult r = track_sequence(seq.frames, seq.groundtruth[0], model, cfg);
  for (std::size_t i = 1; i < r.frames.size(); ++i) {
    CHECK(r.frames[i].action == UpdateAction::replace_with_current);
    CHECK(r.frames[i].state.active == ActiveTemplate{false, r.frames[i].frame});
  }
}

TEST_CASE("predicted boxes stay inside the frame") {
  const RunConfig cfg = small_config();
  const TrackerModel model = TrackerModel::build(cfg);
  SynthConfig sc = short_sequence(3);
  // init box hanging over the corner
  const SyntheticSequence seq = generate_sequence(sc);
  const PixelBox corner{-50, -40, 60, 50};
  const TrackResult r = track_sequence(seq.frames, corner, model, cfg);
  CHECK(r.frames[0].clamped);
  for (const FrameResult& f : r.frames) {
    CHECK(f.box.cx() >= 0.0);
    CHECK(f.box.cy() >= 0.0);
    CHECK(f.box.cx() <= 320.0);
    CHECK(f.box.cy() <= 240.0);
    CHECK(f.box.w >= cfg.tracker.min_box_side);
    CHECK(f.box.h >= cfg.tracker.min_box_side);
  }
}

TEST_CASE("tracker misuse") {
  const RunConfig cfg = small_config();
  const TrackerModel model = TrackerModel::build(cfg);
  Tracker t(model, cfg);
  const SyntheticSequence seq = generate_sequence(short_sequence(1));
  CHECK_THROWS_AS(t.track(seq.frames[0]), std::logic_error);
  CHECK_THROWS_AS(track_sequence(std::span<const Frame>{}, PixelBox{0, 0, 10, 10}, model, cfg),
                  std::invalid_argument);
}

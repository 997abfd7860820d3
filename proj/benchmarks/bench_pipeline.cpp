#include <benchmark/benchmark.h>

#include <mtnetkit/config.hpp>
#include <mtnetkit/metrics.hpp>
#include <mtnetkit/statecheck.hpp>
#include <mtnetkit/synth.hpp>
#include <mtnetkit/tracker.hpp>

using namespace mtnet;

// One tracked frame on default settings, template already encoded.
static void BM_TrackFrame(benchmark::State& state) {
  const RunConfig cfg;
  const TrackerModel model = TrackerModel::build(cfg);
  SynthConfig sc;
  sc.frames = 2;
  const SyntheticSequence seq = generate_sequence(sc);
  Tracker tracker(model, cfg);
  tracker.initialize(seq.frames[0], seq.groundtruth[0]);
  for (auto _ : state) benchmark::DoNotOptimize(tracker.track(seq.frames[1]));
}
BENCHMARK(BM_TrackFrame)->Unit(benchmark::kMillisecond);

static void BM_Statecheck(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(run_statecheck());
}
BENCHMARK(BM_Statecheck)->Unit(benchmark::kMillisecond);

static void BM_ScoreSequence(benchmark::State& state) {
  SynthConfig sc;
  sc.frames = 1000;
  std::vector<PixelBox> gt, pred;
  for (std::size_t t = 0; t < sc.frames; ++t) {
    gt.push_back(synth_box(sc, t));
    PixelBox p = gt.back();
    p.x += 3.0;
    pred.push_back(p);
  }
  for (auto _ : state) benchmark::DoNotOptimize(score_sequence(evaluate_sequence(gt, pred)));
}
BENCHMARK(BM_ScoreSequence);

BENCHMARK_MAIN();

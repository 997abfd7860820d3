#include "commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <mtnetkit/error.hpp>
#include <mtnetkit/metrics.hpp>
#include <mtnetkit/sequence_io.hpp>
#include <mtnetkit/tracker.hpp>

namespace mtnet::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFail;
  }
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sequence_name(const fs::path& dir) {
  fs::path p = fs::absolute(dir).lexically_normal();
  if (p.filename().empty()) p = p.parent_path();
  return p.filename().string();
}

std::vector<fs::path> sequence_dirs(const fs::path& input) {
  if (looks_like_sequence(input)) return {input};
  if (!fs::is_directory(input)) throw IoError(input.string() + ": not a sequence directory");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(input)) {
    if (entry.is_directory() && looks_like_sequence(entry.path())) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw IoError(input.string() + ": contains no sequences");
  return dirs;
}

struct EvalPair {
  std::string name;
  fs::path groundtruth;
  fs::path results;
};

std::vector<EvalPair> resolve_pairs(const fs::path& gt, const fs::path& results) {
  if (fs::is_regular_file(gt)) {
    if (!fs::is_regular_file(results)) {
      throw IoError(results.string() + ": expected a result file to match " + gt.string());
    }
    return {{results.stem().string(), gt, results}};
  }
  std::vector<EvalPair> pairs;
  for (const fs::path& dir : sequence_dirs(gt)) {
    const std::string name = sequence_name(dir);
    const fs::path res = fs::is_regular_file(results) ? results : results / (name + ".txt");
    pairs.push_back({name, dir / "groundtruth.txt", res});
  }
  return pairs;
}

std::vector<SequenceEval> load_evals(const EvalOptions& o) {
  std::map<std::string, std::vector<std::string>> tags;
  if (o.attributes) {
    tags = read_attributes(*o.attributes);
    for (const auto& [seq, list] : tags) {
      for (const std::string& a : list) {
        if (!is_known_attribute(a)) {
          throw IoError("attributes: unknown tag '" + a + "' for sequence " + seq);
        }
      }
    }
  }
  std::vector<SequenceEval> evals;
  for (const EvalPair& p : resolve_pairs(o.groundtruth, o.results)) {
    const std::vector<PixelBox> gt = read_boxes(p.groundtruth);
    const std::vector<PixelBox> res = read_boxes(p.results);
    if (gt.size() != res.size()) {
      throw IoError(p.name + ": " + std::to_string(gt.size()) + " ground-truth rows but " +
                    std::to_string(res.size()) + " result rows");
    }
    const auto it = tags.find(p.name);
    evals.push_back(evaluate_sequence(gt, res, p.name,
                                      it == tags.end() ? std::vector<std::string>{} : it->second));
    if (evals.back().center_errors.empty()) throw IoError(p.name + ": every ground-truth box is absent");
  }
  return evals;
}

}  // namespace

std::size_t worker_limit() {
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const char* env = std::getenv("MTNETKIT_THREADS");
  if (!env || !*env) return hw;
  char* end = nullptr;
  const unsigned long v = std::strtoul(env, &end, 10);
  if (*end != '\0' || v == 0) return hw;
  return static_cast<std::size_t>(v);
}

int cmd_synth(const SynthOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    SynthConfig cfg = o.config ? load_synth_config(*o.config) : SynthConfig{};
    if (o.seed) cfg.seed = *o.seed;
    if (o.frames) cfg.frames = *o.frames;
    write_sequence(cfg, o.out);
    out << "synth: wrote " << cfg.frames << " frames (" << cfg.width << "x" << cfg.height
        << ", seed " << cfg.seed << ") to " << o.out.string() << '\n';
    return kOk;
  });
}

int cmd_track(const TrackOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = o.config ? load_run_config(*o.config) : RunConfig{};
    if (o.seed) {
      cfg.seed = *o.seed;
      cfg.reseed();
    }
    cfg.validate();
    std::vector<SequenceInfo> seqs;
    for (const fs::path& dir : sequence_dirs(o.input)) seqs.push_back(open_sequence(dir));
    ensure_dir(o.out);
    write_text(o.out / "run_config.json", to_json(cfg) + "\n");

    const TrackerModel model = TrackerModel::build(cfg);
    const std::size_t workers = std::min(worker_limit(), seqs.size());
    std::atomic<std::size_t> next{0};
    std::mutex io;
    std::vector<std::string> failures(seqs.size());

    const auto worker = [&] {
      for (std::size_t i = next++; i < seqs.size(); i = next++) {
        const SequenceInfo& seq = seqs[i];
        try {
          const auto start = std::chrono::steady_clock::now();
          const TrackResult result = track_sequence(
              seq.frame_count, [&](std::size_t k) { return load_frame(seq, k); },
              seq.groundtruth.front(), model, cfg);
          const double secs =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
          const std::vector<PixelBox> boxes = result.boxes();
          write_boxes(o.out / (seq.name + ".txt"), boxes);
          write_text(o.out / (seq.name + "_state.json"), state_log_json(result, cfg.seed, seq.name));
          const std::lock_guard lock(io);
          out << "track: " << seq.name << " " << result.frames.size() << " frames in "
              << fixed(secs, 2) << " s\n";
        } catch (const std::exception& e) {
          failures[i] = e.what();
        }
      }
    };
    if (workers <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    int code = kOk;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      if (!failures[i].empty()) {
        err << "error: " << seqs[i].name << ": " << failures[i] << '\n';
        code = kFail;
      }
    }
    return code;
  });
}

int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!(o.tau > 0)) throw ConfigError("--tau must be positive");
    const std::vector<SequenceEval> evals = load_evals(o);
    const std::string report = eval_report_json(evals, o.tau, o.seed);
    const Scores overall = score_sequence(concatenate(evals), o.tau);
    if (o.out) {
      ensure_dir(*o.out);
      write_text(*o.out / "eval.json", report);
      write_text(*o.out / "curves.csv", curves_csv(compute_curves(concatenate(evals))));
    } else {
      out << report;
    }
    out << "eval: " << evals.size() << " sequence(s), PR@" << fixed(o.tau, 1) << " "
        << fixed(overall.precision) << " SR " << fixed(overall.success) << " NPR "
        << (overall.normalized ? fixed(*overall.normalized) : std::string("n/a")) << '\n';
    return kOk;
  });
}

int cmd_curves(const EvalOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const std::string csv = curves_csv(compute_curves(concatenate(load_evals(o))));
    if (o.out) {
      ensure_dir(*o.out);
      write_text(*o.out / "curves.csv", csv);
      out << "curves: wrote " << (*o.out / "curves.csv").string() << '\n';
    } else {
      out << csv;
    }
    return kOk;
  });
}

int cmd_gradcheck(const GradcheckCliOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (o.trials < 1) throw ConfigError("--trials must be at least 1");
    GradcheckOptions opts;
    opts.trials = o.trials;
    opts.fault = o.fault;
    const GradcheckReport r = run_gradcheck(o.seed, LossConfig{}, opts);
    char line[256];
    std::snprintf(line, sizeof line,
                  "gradcheck: seed %llu, %d trials, %zu partials\n"
                  "  max rel err cls %.3e  reg %.3e  loc %.3e  (tolerance %.0e)\n",
                  static_cast<unsigned long long>(o.seed), r.trials, r.checked, r.max_rel_cls,
                  r.max_rel_reg, r.max_rel_loc, opts.tolerance);
    out << line << (r.passed ? "PASS" : "FAIL") << '\n';
    return r.passed ? kOk : kFail;
  });
}

int cmd_statecheck(const StatecheckCliOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const StatecheckReport r = run_statecheck(o.fault);
    if (o.seed) out << "statecheck: seed " << *o.seed << " (unused, enumeration is exhaustive)\n";
    out << "statecheck: " << r.traces << " traces x 9 configurations = " << r.combinations
        << " combinations, " << r.mismatches << " mismatches\n";
    if (r.counterexample) {
      const Counterexample& c = *r.counterexample;
      out << "counterexample (M=" << c.steady_frames << ", N=" << c.unstable_frames << "): [";
      for (std::size_t i = 0; i < c.trace.size(); ++i) out << (i ? ", " : "") << c.trace[i];
      out << "]\n  last frame: reference " << to_string(c.expected) << ", update_step "
          << to_string(c.actual) << '\n';
    }
    out << (r.passed() ? "PASS" : "FAIL") << '\n';
    return r.passed() ? kOk : kFail;
  });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"mtnetkit: RGB-thermal tracker toolkit"};
  app.require_subcommand(1);

  SynthOptions synth;
  std::string synth_out;
  CLI::App* s = app.add_subcommand("synth", "Render a synthetic RGB/thermal sequence");
  s->add_option("--config", synth.config, "Synthetic sequence JSON");
  s->add_option("--seed", synth.seed, "Override the generator seed");
  s->add_option("--frames", synth.frames, "Override the frame count")->check(CLI::PositiveNumber);
  s->add_option("--out", synth_out, "Output sequence directory")->required();

  TrackOptions track;
  std::string track_in, track_out;
  CLI::App* t = app.add_subcommand("track", "Track one sequence or every sequence in a directory");
  t->add_option("sequence", track_in, "Sequence directory (or directory of sequences)")->required();
  t->add_option("--config", track.config, "Run configuration JSON");
  t->add_option("--seed", track.seed, "Override the weight seed");
  t->add_option("--out", track_out, "Directory for results and state logs")->required();

  EvalOptions eval;
  std::string eval_gt, eval_res;
  std::optional<std::string> eval_out;
  CLI::App* e = app.add_subcommand("eval", "Score results against ground truth");
  e->add_option("groundtruth", eval_gt, "Ground-truth file, sequence, or directory of sequences")
      ->required();
  e->add_option("results", eval_res, "Result file or directory of <sequence>.txt")->required();
  e->add_option("--attributes", eval.attributes, "Attribute sidecar file");
  e->add_option("--tau", eval.tau, "Precision threshold in pixels");
  e->add_option("--seed", eval.seed, "Seed echoed into the report");
  e->add_option("--out", eval_out, "Directory for eval.json and curves.csv");

  EvalOptions curves;
  std::string curves_gt, curves_res;
  std::optional<std::string> curves_out;
  CLI::App* c = app.add_subcommand("curves", "Write precision/success/normalized curves as CSV");
  c->add_option("groundtruth", curves_gt, "Ground-truth file, sequence, or directory")->required();
  c->add_option("results", curves_res, "Result file or directory")->required();
  c->add_option("--seed", curves.seed, "Accepted for symmetry; curves carry no randomness");
  c->add_option("--out", curves_out, "Directory for curves.csv (default: stdout)");

  GradcheckCliOptions grad;
  std::string grad_fault = "none";
  CLI::App* g = app.add_subcommand("gradcheck", "Finite-difference check of the loss gradients");
  g->add_option("--seed", grad.seed, "Instance seed");
  g->add_option("--trials", grad.trials, "Number of random instances");
  g->add_option("--inject-fault", grad_fault, "Corrupt one analytic gradient (test fixture)")
      ->check(CLI::IsMember({"none", "cls", "reg", "loc"}));

  StatecheckCliOptions state;
  bool state_fault = false;
  CLI::App* sc = app.add_subcommand("statecheck", "Exhaustive template-update state check");
  sc->add_option("--seed", state.seed, "Seed echoed into the report");
  sc->add_flag("--inject-fault", state_fault, "Use the off-by-one reference (test fixture)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex, out, err);
    return kUsage;
  }

  if (*s) {
    synth.out = synth_out;
    return cmd_synth(synth, out, err);
  }
  if (*t) {
    track.input = track_in;
    track.out = track_out;
    return cmd_track(track, out, err);
  }
  if (*e) {
    eval.groundtruth = eval_gt;
    eval.results = eval_res;
    if (eval_out) eval.out = *eval_out;
    return cmd_eval(eval, out, err);
  }
  if (*c) {
    curves.groundtruth = curves_gt;
    curves.results = curves_res;
    if (curves_out) curves.out = *curves_out;
    return cmd_curves(curves, out, err);
  }
  if (*g) {
    static const std::map<std::string, GradientFault> faults = {
        {"none", GradientFault::none},
        {"cls", GradientFault::flip_cls_sign},
        {"reg", GradientFault::flip_reg_sign},
        {"loc", GradientFault::flip_loc_sign}};
    grad.fault = faults.at(grad_fault);
    return cmd_gradcheck(grad, out, err);
  }
  if (state_fault) state.fault = ReferenceFault::unstable_off_by_one;
  return cmd_statecheck(state, out, err);
}

}  // namespace mtnet::cli

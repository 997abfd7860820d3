#include "mtnetkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <stdexcept>

namespace mtnet {

namespace {

void require_nonempty(std::span<const double> values, const char* what) {
  if (values.empty()) throw std::invalid_argument(std::string(what) + ": no frames to evaluate");
}

double fraction_at_most(std::span<const double> values, double t) {
  const auto n = std::count_if(values.begin(), values.end(), [t](double v) { return v <= t; });
  return static_cast<double>(n) / static_cast<double>(values.size());
}

double fraction_above(std::span<const double> values, double t) {
  const auto n = std::count_if(values.begin(), values.end(), [t](double v) { return v > t; });
  return static_cast<double>(n) / static_cast<double>(values.size());
}

std::vector<double> grid(int count, double denom) {
  std::vector<double> t(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) t[static_cast<std::size_t>(k)] = k / denom;
  return t;
}

}  // namespace

bool is_known_attribute(std::string_view name) {
  return std::any_of(kKnownAttributes.begin(), kKnownAttributes.end(),
                     [&](const char* a) { return name == a; });
}

double center_error(const PixelBox& gt, const PixelBox& pred) noexcept {
  return std::hypot(pred.cx() - gt.cx(), pred.cy() - gt.cy());
}

double normalized_center_error(const PixelBox& gt, const PixelBox& pred) {
  if (!(gt.w > 0 && gt.h > 0)) throw std::invalid_argument("normalized error needs gt extents > 0");
  return std::hypot((pred.cx() - gt.cx()) / gt.w, (pred.cy() - gt.cy()) / gt.h);
}

SequenceEval evaluate_sequence(std::span<const PixelBox> gt, std::span<const PixelBox> pred,
                               std::string name, std::vector<std::string> attributes) {
  if (gt.size() != pred.size()) {
    throw std::invalid_argument("evaluate_sequence: " + std::to_string(gt.size()) +
                                " gt rows vs " + std::to_string(pred.size()) + " result rows");
  }
  SequenceEval e;
  e.name = std::move(name);
  e.attributes = std::move(attributes);
  e.total_frames = gt.size();
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i].is_absent()) continue;
    e.center_errors.push_back(center_error(gt[i], pred[i]));
    e.ious.push_back(iou(gt[i], pred[i]));
    if (gt[i].w > 0 && gt[i].h > 0) e.normalized_errors.push_back(normalized_center_error(gt[i], pred[i]));
  }
  return e;
}

std::vector<double> precision_thresholds() { return grid(51, 1.0); }
std::vector<double> success_thresholds() { return grid(21, 20.0); }
std::vector<double> normalized_thresholds() { return grid(101, 200.0); }

double precision_rate(std::span<const double> errors, double tau) {
  if (!(tau > 0)) throw std::invalid_argument("precision_rate: tau must be positive");
  require_nonempty(errors, "precision_rate");
  return fraction_at_most(errors, tau);
}

double success_rate(std::span<const double> ious) {
  require_nonempty(ious, "success_rate");
  double sum = 0.0;
  for (double t : success_thresholds()) sum += fraction_above(ious, t);
  return sum / 21.0;
}

double normalized_precision(std::span<const double> normalized_errors) {
  require_nonempty(normalized_errors, "normalized_precision");
  double sum = 0.0;
  for (double t : normalized_thresholds()) sum += fraction_at_most(normalized_errors, t);
  return sum / 101.0;
}

double normalized_precision(std::span<const PixelBox> gt, std::span<const PixelBox> pred) {
  return normalized_precision(evaluate_sequence(gt, pred).normalized_errors);
}

CurveReport compute_curves(const SequenceEval& e) {
  require_nonempty(e.center_errors, "compute_curves");
  CurveReport c;
  c.precision_thresholds = precision_thresholds();
  for (double t : c.precision_thresholds) c.precision.push_back(fraction_at_most(e.center_errors, t));
  c.success_thresholds = success_thresholds();
  for (double t : c.success_thresholds) c.success.push_back(fraction_above(e.ious, t));
  c.normalized_thresholds = normalized_thresholds();
  if (!e.normalized_errors.empty()) {
    for (double t : c.normalized_thresholds) {
      c.normalized_precision.push_back(fraction_at_most(e.normalized_errors, t));
    }
  }
  return c;
}

Scores score_sequence(const SequenceEval& e, double tau) {
  Scores s;
  s.precision = precision_rate(e.center_errors, tau);
  s.success = success_rate(e.ious);
  if (!e.normalized_errors.empty()) s.normalized = normalized_precision(e.normalized_errors);
  s.frames = e.center_errors.size();
  return s;
}

SequenceEval concatenate(std::span<const SequenceEval> evals, std::string name) {
  SequenceEval out;
  out.name = std::move(name);
  for (const SequenceEval& e : evals) {
    out.total_frames += e.total_frames;
    out.center_errors.insert(out.center_errors.end(), e.center_errors.begin(), e.center_errors.end());
    out.normalized_errors.insert(out.normalized_errors.end(), e.normalized_errors.begin(),
                                 e.normalized_errors.end());
    out.ious.insert(out.ious.end(), e.ious.begin(), e.ious.end());
  }
  return out;
}

std::optional<Scores> attribute_aggregate(std::span<const SequenceEval> evals,
                                          std::string_view attribute, double tau) {
  if (!is_known_attribute(attribute)) {
    throw std::invalid_argument("unknown attribute '" + std::string(attribute) + "'");
  }
  std::vector<SequenceEval> tagged;
  for (const SequenceEval& e : evals) {
    if (std::find(e.attributes.begin(), e.attributes.end(), attribute) != e.attributes.end()) {
      tagged.push_back(e);
    }
  }
  if (tagged.empty()) return std::nullopt;
  const SequenceEval joined = concatenate(tagged, std::string(attribute));
  if (joined.center_errors.empty()) return std::nullopt;
  return score_sequence(joined, tau);
}

namespace {

nlohmann::ordered_json scores_json(const Scores& s) {
  nlohmann::ordered_json j = {{"PR", s.precision}, {"SR", s.success}};
  j["NPR"] = s.normalized ? nlohmann::ordered_json(*s.normalized) : nlohmann::ordered_json(nullptr);
  j["frames"] = s.frames;
  return j;
}

}  // namespace

std::string eval_report_json(std::span<const SequenceEval> evals, double tau,
                             std::optional<std::uint64_t> seed) {
  nlohmann::ordered_json report;
  if (seed) report["seed"] = *seed;
  report["tau"] = tau;
  const SequenceEval all = concatenate(evals);
  report["overall"] = scores_json(score_sequence(all, tau));
  report["overall"]["sequences"] = evals.size();

  nlohmann::ordered_json seqs = nlohmann::ordered_json::array();
  bool tagged = false;
  for (const SequenceEval& e : evals) {
    nlohmann::ordered_json j = {{"name", e.name}};
    j.update(scores_json(score_sequence(e, tau)));
    j["attributes"] = e.attributes;
    seqs.push_back(std::move(j));
    tagged = tagged || !e.attributes.empty();
  }
  report["sequences"] = std::move(seqs);

  if (tagged) {
    nlohmann::ordered_json table;
    for (const char* a : kKnownAttributes) {
      const std::optional<Scores> s = attribute_aggregate(evals, a, tau);
      table[a] = s ? scores_json(*s) : nlohmann::ordered_json(nullptr);
    }
    report["attributes"] = std::move(table);
  }

  const CurveReport c = compute_curves(all);
  report["curves"] = {{"precision", c.precision},
                      {"success", c.success},
                      {"normalized_precision", c.normalized_precision}};
  return report.dump(2) + "\n";
}

std::string curves_csv(const CurveReport& c) {
  std::string out = "curve,threshold,value\n";
  char line[96];
  const auto emit = [&](const char* name, const std::vector<double>& t, const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::snprintf(line, sizeof line, "%s,%.4f,%.10f\n", name, t[i], v[i]);
      out += line;
    }
  };
  emit("precision", c.precision_thresholds, c.precision);
  emit("success", c.success_thresholds, c.success);
  emit("normalized_precision", c.normalized_thresholds, c.normalized_precision);
  return out;
}

}  // namespace mtnet

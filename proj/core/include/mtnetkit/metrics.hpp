#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mtnetkit/bbox.hpp"

namespace mtnet {

/// Per-frame errors of one tracked sequence. Frames whose ground truth is
/// absent (all-zero box) are dropped; frames with a zero gt extent are kept
/// for PR/SR but dropped from the normalized errors.
struct SequenceEval {
  std::string name;
  std::size_t total_frames = 0;
  std::vector<double> center_errors;
  std::vector<double> normalized_errors;
  std::vector<double> ious;
  std::vector<std::string> attributes;
};

inline constexpr std::array<const char*, 12> kKnownAttributes = {
    "NO", "PO", "HO", "LI", "LR", "TC", "DEF", "FM", "SV", "MB", "CM", "BC"};
bool is_known_attribute(std::string_view name);

double center_error(const PixelBox& gt, const PixelBox& pred) noexcept;
/// sqrt((dcx/w_gt)^2 + (dcy/h_gt)^2); requires positive gt extents.
double normalized_center_error(const PixelBox& gt, const PixelBox& pred);

/// Throws std::invalid_argument when the frame counts differ.
SequenceEval evaluate_sequence(std::span<const PixelBox> gt, std::span<const PixelBox> pred,
                               std::string name = {}, std::vector<std::string> attributes = {});

/// Threshold grids: 0..50 px step 1; IoU k/20 for k=0..20; k/200 for k=0..100.
std::vector<double> precision_thresholds();
std::vector<double> success_thresholds();
std::vector<double> normalized_thresholds();

/// Fraction of frames with error <= tau. Empty input and tau <= 0 throw.
double precision_rate(std::span<const double> errors, double tau);
/// Mean over the 21 IoU thresholds of the fraction with IoU > t (strict).
double success_rate(std::span<const double> ious);
/// Mean over the 101 thresholds of the fraction with normalized error <= t.
double normalized_precision(std::span<const double> normalized_errors);
double normalized_precision(std::span<const PixelBox> gt, std::span<const PixelBox> pred);

struct CurveReport {
  std::vector<double> precision_thresholds, precision;
  std::vector<double> success_thresholds, success;
  std::vector<double> normalized_thresholds, normalized_precision;
};
CurveReport compute_curves(const SequenceEval& eval);

struct Scores {
  double precision = 0;             // PR at the requested tau
  double success = 0;               // SR
  std::optional<double> normalized; // NPR, empty when no frame has a usable gt extent
  std::size_t frames = 0;
};
Scores score_sequence(const SequenceEval& eval, double tau = 20.0);

/// Concatenates the frames of several sequences into one pseudo-sequence.
SequenceEval concatenate(std::span<const SequenceEval> evals, std::string name = "overall");

/// PR/SR over all frames of the sequences tagged with `attribute`. An
/// attribute no sequence carries yields nullopt; unknown names throw.
std::optional<Scores> attribute_aggregate(std::span<const SequenceEval> evals,
                                          std::string_view attribute, double tau = 20.0);

/// JSON report with overall scores, per-sequence scores, the per-attribute
/// table when any sequence has tags, and the curves.
std::string eval_report_json(std::span<const SequenceEval> evals, double tau,
                             std::optional<std::uint64_t> seed = std::nullopt);
/// Rows of `curve,threshold,value`.
std::string curves_csv(const CurveReport& curves);

}  // namespace mtnet

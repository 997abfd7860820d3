#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mtnetkit/bbox.hpp"
#include "mtnetkit/head.hpp"

namespace mtnet {

/// Loss weights: regression mixes L1 and CIoU by (lambda_l1, lambda_ciou);
/// the total combines classification, regression and localisation by
/// (n_cls, n_reg, n_loc).
struct LossConfig {
  double lambda_l1 = 5.0;
  double lambda_ciou = 2.0;
  double n_cls = 8.0;
  double n_reg = 5.0;
  double n_loc = 1.0;

  void validate() const;
};

/// Probabilities are clamped to [eps, 1-eps] before taking logs.
inline constexpr double kLogClamp = 1e-12;

using BoxGrad = std::array<double, 4>;  // d/d(cx, cy, w, h)

/// Complete-IoU loss 1 - IoU + rho^2/c^2 + alpha*v for a prediction against a
/// ground truth with positive extents. The aspect term uses atan2(w, h), so
/// a zero-size prediction has aspect angle 0. When IoU = 1 and v = 0 the
/// alpha*v term is 0.
double ciou_loss(const NormBox& pred, const NormBox& gt);

/// Exact gradient of ciou_loss with respect to the prediction, including the
/// dependence of alpha on the boxes. Undefined exactly at min/max switch points.
BoxGrad ciou_loss_grad(const NormBox& pred, const NormBox& gt);

/// IoU-weighted binary cross-entropy:
/// -sum_j (y_j log(p_j) IoU_j + (1 - y_j) log(1 - p_j)). IoU_j is a constant.
double cls_loss(std::span<const double> p, std::span<const std::uint8_t> labels,
                std::span<const double> ious);

struct RegLoss {
  double value = 0.0;
  bool has_positives = false;
};

/// sum over positives of lambda_l1 * |b_j - gt|_1 + lambda_ciou * CIoU(b_j, gt) * p_j,
/// with p_j a constant weight.
RegLoss reg_loss(std::span<const NormBox> boxes, std::span<const std::uint8_t> labels,
                 std::span<const double> p, const NormBox& gt, const LossConfig& config);

/// Soft-target binary cross-entropy against targets in [0,1].
double loc_loss(std::span<const double> p_loc, std::span<const double> targets);

struct LossParts {
  double cls = 0.0;
  double reg = 0.0;
  double loc = 0.0;
};

double total_loss(const LossConfig& config, const LossParts& parts);

struct TargetAssignment {
  std::vector<std::uint8_t> labels;  // grid*grid, row-major
  NormBox gt;

  std::size_t positives() const;
};

/// Token (i,j) is positive iff its cell centre ((j+0.5)/g, (i+0.5)/g) lies in
/// the closed gt box; with no such cell, the cell nearest the gt centre is
/// positive (lowest index on ties).
TargetAssignment assign_targets(const NormBox& gt, std::size_t grid = 32);

/// Everything the three losses consume, as plain arrays.
struct LossInputs {
  std::vector<double> p;            // foreground probabilities
  std::vector<double> p_loc;        // localisation probabilities
  std::vector<double> ious;         // IoU of each box with gt (cls weight)
  std::vector<double> loc_targets;  // soft targets O_j
  std::vector<NormBox> boxes;
  std::vector<std::uint8_t> labels;
  NormBox gt;
};

/// Builds loss inputs from head outputs; IoU weights and localisation
/// targets are both the IoU of each regressed box with gt.
LossInputs make_loss_inputs(const ProposalSet& proposals, const TargetAssignment& targets);

LossParts compute_losses(const LossInputs& in, const LossConfig& config);

struct LossGradients {
  std::vector<double> cls_dp;       // dL_cls/dp_j
  std::vector<double> loc_dp;       // dL_loc/dp_loc_j
  std::vector<BoxGrad> reg_dbox;    // dL_reg/db_j (zero for negatives)
};

/// Analytic gradients; the L1 term uses subgradient 0 at kinks.
LossGradients loss_gradients(const LossInputs& in, const LossConfig& config);

}  // namespace mtnet

#pragma once

#include <cstdint>

#include "mtnetkit/losses.hpp"
#include "mtnetkit/rng.hpp"

namespace mtnet {

/// Deliberate corruption of one analytic gradient, for mutation tests of the
/// checker itself.
enum class GradientFault { none, flip_cls_sign, flip_reg_sign, flip_loc_sign };

struct GradcheckOptions {
  int trials = 100;
  std::size_t proposals = 16;  // proposals per random instance
  double step = 1e-6;          // central-difference step
  double tolerance = 1e-6;     // max relative error
  GradientFault fault = GradientFault::none;
};

struct GradcheckReport {
  double max_rel_cls = 0.0;
  double max_rel_reg = 0.0;
  double max_rel_loc = 0.0;
  int trials = 0;
  std::size_t checked = 0;  // number of partial derivatives compared
  bool passed = false;
};

/// |a - n| / max(|a|, |n|); 0 when both are exactly zero.
double relative_error(double analytic, double numeric);

/// Random loss inputs whose boxes keep every min/max comparison, L1 kink and
/// overlap boundary at least `margin` away, with probabilities in [0.05, 0.95]
/// and localisation targets at least 0.01 from their prediction.
LossInputs random_loss_instance(Rng& rng, std::size_t proposals, double margin = 1e-3);

/// Compares loss_gradients against central finite differences of cls_loss,
/// reg_loss and loc_loss over `options.trials` seeded random instances.
GradcheckReport run_gradcheck(std::uint64_t seed, const LossConfig& config,
                              const GradcheckOptions& options = {});

}  // namespace mtnet

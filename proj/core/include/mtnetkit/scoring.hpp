#pragma once

#include <vector>

#include "mtnetkit/bbox.hpp"
#include "mtnetkit/head.hpp"

namespace mtnet {

/// Symmetric Hann window of length n: 0.5 - 0.5 cos(2 pi k / (n - 1)).
/// w[k] and w[n-1-k] are bitwise equal.
std::vector<double> hann_window(std::size_t n);

/// Outer product of two Hann windows over a grid x grid map, row-major.
std::vector<double> hann_window_2d(std::size_t grid);

/// (1 - window_weight) * p_cls * p_loc + window_weight * hann, per proposal.
/// The proposal count must be a perfect square.
std::vector<double> score_proposals(const ProposalSet& proposals, double window_weight);

struct Selection {
  std::size_t index = 0;
  NormBox box;
  double confidence = 0.0;  // unpenalised p_cls * p_loc
};

/// Argmax of the penalised scores; ties go to the lowest index.
Selection select_best(const std::vector<double>& scores, const ProposalSet& proposals);

}  // namespace mtnet

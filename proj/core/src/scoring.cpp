#include "mtnetkit/scoring.hpp"

#include <cmath>
#include <numbers>

#include "mtnetkit/error.hpp"

namespace mtnet {

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  const double denom = static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t m = std::min(k, n - 1 - k);  // mirror for exact symmetry
    w[k] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(m) / denom);
  }
  return w;
}

std::vector<double> hann_window_2d(std::size_t grid) {
  const std::vector<double> w = hann_window(grid);
  std::vector<double> out(grid * grid);
  for (std::size_t i = 0; i < grid; ++i) {
    for (std::size_t j = 0; j < grid; ++j) out[i * grid + j] = w[i] * w[j];
  }
  return out;
}

std::vector<double> score_proposals(const ProposalSet& proposals, double window_weight) {
  if (!(window_weight >= 0.0 && window_weight <= 1.0)) {
    throw ConfigError("window weight must lie in [0,1]");
  }
  const std::size_t n = proposals.size();
  const auto grid = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n))));
  if (grid * grid != n) throw ShapeError("score_proposals: proposal count is not a square");
  const std::vector<double> hann = hann_window_2d(grid);
  std::vector<double> scores(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double raw = proposals.foreground_prob(j) * proposals.loc_prob(j);
    scores[j] = (1.0 - window_weight) * raw + window_weight * hann[j];
  }
  return scores;
}

Selection select_best(const std::vector<double>& scores, const ProposalSet& proposals) {
  if (scores.empty() || scores.size() != proposals.size()) {
    throw ShapeError("select_best: score count does not match proposals");
  }
  std::size_t best = 0;
  for (std::size_t j = 1; j < scores.size(); ++j) {
    if (scores[j] > scores[best]) best = j;
  }
  return {best, proposals.box(best), proposals.foreground_prob(best) * proposals.loc_prob(best)};
}

}  // namespace mtnet

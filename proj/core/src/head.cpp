#include "mtnetkit/head.hpp"

#include <cmath>

#include "mtnetkit/error.hpp"

namespace mtnet {

double ProposalSet::foreground_prob(std::size_t j) const {
  // Two-way softmax written as a sigmoid of the logit difference.
  return sigmoid(cls_logits.at(j, 1) - cls_logits.at(j, 0));
}

double ProposalSet::loc_prob(std::size_t j) const { return sigmoid(loc_logits.at(j, 0)); }

NormBox ProposalSet::box(std::size_t j) const {
  return {boxes.at(j, 0), boxes.at(j, 1), boxes.at(j, 2), boxes.at(j, 3)};
}

Tensor Mlp::operator()(const Tensor& x) const {
  return layers[2](relu(layers[1](relu(layers[0](x)))));
}

Mlp Mlp::random(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng) {
  constexpr double kStd = 0.02;
  return {{Projection::random(in, hidden, kStd, rng), Projection::random(hidden, hidden, kStd, rng),
           Projection::random(hidden, out, kStd, rng)}};
}

Mlp Mlp::zeros(std::size_t in, std::size_t hidden, std::size_t out) {
  return {{Projection::zeros(in, hidden), Projection::zeros(hidden, hidden),
           Projection::zeros(hidden, out)}};
}

HeadParams HeadParams::random(std::size_t dim, double search_scale, std::uint64_t seed) {
  if (!(search_scale > 1.0)) throw ConfigError("head: search_scale must exceed 1");
  Rng rng(seed);
  HeadParams p{Mlp::random(dim, dim, 2, rng), Mlp::random(dim, dim, 4, rng),
               Mlp::random(dim, dim, 1, rng)};
  const double extent = 1.0 / search_scale;
  const double logit = std::log(extent / (1.0 - extent));
  p.reg.layers[2].b[2] = logit;
  p.reg.layers[2].b[3] = logit;
  return p;
}

HeadParams HeadParams::zeros(std::size_t dim) {
  return {Mlp::zeros(dim, dim, 2), Mlp::zeros(dim, dim, 4), Mlp::zeros(dim, dim, 1)};
}

ProposalSet head_forward(const Tensor& fused, const HeadParams& params) {
  if (fused.rank() != 2) throw ShapeError("head_forward: expected [N,D] tokens");
  return {params.cls(fused), sigmoid(params.reg(fused)), params.loc(fused)};
}

}  // namespace mtnet

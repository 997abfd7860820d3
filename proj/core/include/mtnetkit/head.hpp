#pragma once

#include <array>
#include <cstdint>

#include "mtnetkit/bbox.hpp"
#include "mtnetkit/fusion.hpp"
#include "mtnetkit/tensor.hpp"

namespace mtnet {

/// Per-token outputs of the trident head.
struct ProposalSet {
  Tensor cls_logits;  // [N,2], column 1 is foreground
  Tensor boxes;       // [N,4] normalised (cx,cy,w,h), already through sigmoid
  Tensor loc_logits;  // [N,1]

  std::size_t size() const { return cls_logits.dim(0); }
  /// Softmax foreground probability of proposal j.
  double foreground_prob(std::size_t j) const;
  double loc_prob(std::size_t j) const;
  NormBox box(std::size_t j) const;
};

/// Three-layer perceptron: D -> hidden -> hidden -> out, relu between layers.
struct Mlp {
  std::array<Projection, 3> layers;

  Tensor operator()(const Tensor& x) const;
  static Mlp random(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng);
  static Mlp zeros(std::size_t in, std::size_t hidden, std::size_t out);
};

struct HeadParams {
  Mlp cls, reg, loc;

  /// N(0, 0.02^2) weights. The regression output bias is set so an untrained
  /// head predicts a box of side 1/search_scale at the window centre, i.e.
  /// the previous target extent.
  static HeadParams random(std::size_t dim, double search_scale, std::uint64_t seed);
  static HeadParams zeros(std::size_t dim);
};

/// Classification, regression and localisation branches applied per token.
ProposalSet head_forward(const Tensor& fused, const HeadParams& params);

}  // namespace mtnet

#pragma once

#include <algorithm>
#include <cmath>

#include <mtnetkit/rng.hpp>
#include <mtnetkit/tensor.hpp>

namespace testing {

inline double max_abs_diff(const mtnet::Tensor& a, const mtnet::Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline bool same_shape(const mtnet::Tensor& a, const mtnet::Tensor& b) {
  return a.shape() == b.shape();
}

inline mtnet::Tensor random_tensor(mtnet::Rng& rng, mtnet::Tensor::Shape shape, double lo = -1.0,
                                   double hi = 1.0) {
  return rng.uniform_tensor(std::move(shape), lo, hi);
}

}  // namespace testing

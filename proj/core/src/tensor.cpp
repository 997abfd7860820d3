#include "mtnetkit/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "mtnetkit/error.hpp"

namespace mtnet {

std::size_t shape_product(const Tensor::Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Tensor::Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + shape_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_string(shape_));
  }
  return shape_[axis];
}

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_);
}

bool operator==(const Tensor& a, const Tensor& b) {
  return a.shape_ == b.shape_ && a.data_ == b.data_;
}

void require_finite(const Tensor& t, const char* where) {
  // Branch-free exponent test so the scan vectorizes.
  constexpr std::uint64_t kExp = 0x7ff0000000000000ULL;
  std::uint64_t bad = 0;
  for (double v : t.data()) bad |= static_cast<std::uint64_t>((std::bit_cast<std::uint64_t>(v) & kExp) == kExp);
  if (bad) throw NumericError(std::string(where) + ": non-finite value in result");
}

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* where) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(where) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + shape_string(t.shape()));
  }
}

}  // namespace

Tensor elementwise(const Tensor& a, const Tensor& b, ElementwiseOp op) {
  const auto apply = [op](double x, double y) {
    return op == ElementwiseOp::add ? x + y : x * y;
  };
  Tensor out(a.shape());
  if (a.shape() == b.shape()) {
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply(a[i], b[i]);
  } else if (a.rank() == 3 && b.rank() == 3 && b.dim(0) == 1 && a.dim(1) == b.dim(1) &&
             a.dim(2) == b.dim(2)) {
    const std::size_t plane = a.dim(1) * a.dim(2);
    for (std::size_t c = 0; c < a.dim(0); ++c) {
      for (std::size_t i = 0; i < plane; ++i) {
        out[c * plane + i] = apply(a[c * plane + i], b[i]);
      }
    }
  } else {
    throw ShapeError("elementwise: cannot combine " + shape_string(a.shape()) + " with " +
                     shape_string(b.shape()));
  }
  require_finite(out, "elementwise");
  return out;
}

Tensor scale(const Tensor& a, double factor) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * factor;
  require_finite(out, "scale");
  return out;
}

Tensor scale_channels(const Tensor& x, const Tensor& gate) {
  require_rank(x, 3, "scale_channels");
  if (gate.size() != x.dim(0)) {
    throw ShapeError("scale_channels: gate has " + std::to_string(gate.size()) +
                     " entries for " + std::to_string(x.dim(0)) + " channels");
  }
  Tensor out(x.shape());
  const std::size_t plane = x.dim(1) * x.dim(2);
  for (std::size_t c = 0; c < x.dim(0); ++c) {
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] = x[c * plane + i] * gate[c];
  }
  require_finite(out, "scale_channels");
  return out;
}

namespace {

// C[rows,n] += A[rows,k] * B[k,n]. Every C element accumulates its k products
// in ascending order, one multiply and one add each, so the result is
// bitwise identical to the naive triple loop. Blocking only changes which
// elements are in flight at once.
constexpr std::size_t kTileRows = 4;
constexpr std::size_t kTileCols = 8;
constexpr std::size_t kPanelInner = 128;
constexpr std::size_t kPanelCols = 256;

using Vec4 = double __attribute__((vector_size(32)));

#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Wpsabi"
[[gnu::always_inline]] inline Vec4 load4(const double* p) {
  Vec4 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

[[gnu::always_inline]] inline void store4(double* p, Vec4 v) { std::memcpy(p, &v, sizeof v); }

// One panel: C[rows, n] += A[rows, inner] * B[inner, n] with row strides
// lda, ldb, ldc.
[[gnu::always_inline]] inline void gemm_panel(const double* a, std::size_t lda, const double* b,
                                              std::size_t ldb, double* c, std::size_t ldc,
                                              std::size_t rows, std::size_t inner,
                                              std::size_t n) {
  std::size_t i = 0;
  for (; i + kTileRows <= rows; i += kTileRows) {
    const double* a0 = a + i * lda;
    const double* a1 = a0 + lda;
    const double* a2 = a1 + lda;
    const double* a3 = a2 + lda;
    double* c0 = c + i * ldc;
    double* c1 = c0 + ldc;
    double* c2 = c1 + ldc;
    double* c3 = c2 + ldc;
    std::size_t j = 0;
    for (; j + kTileCols <= n; j += kTileCols) {
      Vec4 x0 = load4(c0 + j), y0 = load4(c0 + j + 4);
      Vec4 x1 = load4(c1 + j), y1 = load4(c1 + j + 4);
      Vec4 x2 = load4(c2 + j), y2 = load4(c2 + j + 4);
      Vec4 x3 = load4(c3 + j), y3 = load4(c3 + j + 4);
      const double* bk = b + j;
      for (std::size_t k = 0; k < inner; ++k, bk += ldb) {
        const Vec4 lo = load4(bk), hi = load4(bk + 4);
        x0 += a0[k] * lo;
        y0 += a0[k] * hi;
        x1 += a1[k] * lo;
        y1 += a1[k] * hi;
        x2 += a2[k] * lo;
        y2 += a2[k] * hi;
        x3 += a3[k] * lo;
        y3 += a3[k] * hi;
      }
      store4(c0 + j, x0), store4(c0 + j + 4, y0);
      store4(c1 + j, x1), store4(c1 + j + 4, y1);
      store4(c2 + j, x2), store4(c2 + j + 4, y2);
      store4(c3 + j, x3), store4(c3 + j + 4, y3);
    }
    for (std::size_t r = i; r < i + kTileRows; ++r) {
      for (std::size_t k = 0; k < inner; ++k) {
        const double av = a[r * lda + k];
        for (std::size_t jj = j; jj < n; ++jj) c[r * ldc + jj] += av * b[k * ldb + jj];
      }
    }
  }
  for (; i < rows; ++i) {
    for (std::size_t k = 0; k < inner; ++k) {
      const double av = a[i * lda + k];
      for (std::size_t jj = 0; jj < n; ++jj) c[i * ldc + jj] += av * b[k * ldb + jj];
    }
  }
}

// C[rows,n] += A[rows,inner] * B[inner,n]. Each C element accumulates its
// products in ascending k, one multiply and one add at a time, so the result
// is bitwise identical to the naive triple loop; the tiling and the k/column
// panels only change which elements are in flight together.
[[gnu::target_clones("avx2", "default")]]
void gemm_accumulate(const double* a, const double* b, double* c, std::size_t rows,
                     std::size_t inner, std::size_t n) {
  for (std::size_t k0 = 0; k0 < inner; k0 += kPanelInner) {
    const std::size_t kk = std::min(kPanelInner, inner - k0);
    for (std::size_t j0 = 0; j0 < n; j0 += kPanelCols) {
      const std::size_t jj = std::min(kPanelCols, n - j0);
      gemm_panel(a + k0, inner, b + k0 * n + j0, n, c + j0, n, rows, kk, jj);
    }
  }
}
#pragma GCC diagnostic pop

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t rows = a.dim(0), inner = a.dim(1), cols = b.dim(1);
  if (b.dim(0) != inner) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  Tensor out({rows, cols});
  gemm_accumulate(a.data().data(), b.data().data(), out.data().data(), rows, inner, cols);
  require_finite(out, "matmul");
  return out;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  Tensor out({cols, rows});
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out.at(j, i) = a.at(i, j);
  }
  return out;
}

Tensor conv2d(const Tensor& x, const Tensor& k, int padding, int stride,
              std::span<const double> bias) {
  require_rank(x, 3, "conv2d");
  require_rank(k, 4, "conv2d");
  if (padding < 0 || stride < 1) throw ShapeError("conv2d: padding must be >= 0 and stride >= 1");
  const std::size_t in_ch = x.dim(0), height = x.dim(1), width = x.dim(2);
  const std::size_t out_ch = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  if (k.dim(1) != in_ch) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(k.dim(1)) +
                     " input channels, input has " + std::to_string(in_ch));
  }
  if (!bias.empty() && bias.size() != out_ch) throw ShapeError("conv2d: bias size mismatch");
  const auto pad = static_cast<std::size_t>(padding);
  const auto step = static_cast<std::size_t>(stride);
  if (kh > height + 2 * pad || kw > width + 2 * pad) {
    throw ShapeError("conv2d: kernel larger than padded input");
  }
  if ((height + 2 * pad - kh) % step != 0 || (width + 2 * pad - kw) % step != 0) {
    throw ShapeError("conv2d: non-integer output extent for input " + shape_string(x.shape()) +
                     ", kernel " + shape_string(k.shape()) + ", stride " +
                     std::to_string(stride));
  }
  const std::size_t out_h = (height + 2 * pad - kh) / step + 1;
  const std::size_t out_w = (width + 2 * pad - kw) / step + 1;
  const std::size_t out_plane = out_h * out_w;
  const std::size_t taps = in_ch * kh * kw;

  Tensor out({out_ch, out_h, out_w});
  double* po = out.data().data();
  for (std::size_t co = 0; co < out_ch; ++co) {
    const double b = bias.empty() ? 0.0 : bias[co];
    std::fill(po + co * out_plane, po + (co + 1) * out_plane, b);
  }

  // Both paths accumulate each output over (ci, ky, kx) in the same order.
  if (taps * out_plane <= (std::size_t{1} << 22)) {
    // im2col: one row per kernel tap, one column per output position.
    std::vector<double> cols(taps * out_plane, 0.0);
    for (std::size_t ci = 0; ci < in_ch; ++ci) {
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          double* row = cols.data() + ((ci * kh + ky) * kw + kx) * out_plane;
          for (std::size_t oy = 0; oy < out_h; ++oy) {
            const std::size_t sy = oy * step + ky;
            if (sy < pad || sy - pad >= height) continue;
            const double* src = &x.data()[(ci * height + (sy - pad)) * width];
            for (std::size_t ox = 0; ox < out_w; ++ox) {
              const std::size_t sx = ox * step + kx;
              if (sx < pad || sx - pad >= width) continue;
              row[oy * out_w + ox] = src[sx - pad];
            }
          }
        }
      }
    }
    gemm_accumulate(k.data().data(), cols.data(), po, out_ch, taps, out_plane);
  } else {
    for (std::size_t co = 0; co < out_ch; ++co) {
      double* oplane = po + co * out_plane;
      for (std::size_t ci = 0; ci < in_ch; ++ci) {
        for (std::size_t ky = 0; ky < kh; ++ky) {
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const double w = k.data()[((co * in_ch + ci) * kh + ky) * kw + kx];
            for (std::size_t oy = 0; oy < out_h; ++oy) {
              const std::size_t sy = oy * step + ky;
              if (sy < pad || sy - pad >= height) continue;
              const double* src = &x.data()[(ci * height + (sy - pad)) * width];
              double* dst = oplane + oy * out_w;
              for (std::size_t ox = 0; ox < out_w; ++ox) {
                const std::size_t sx = ox * step + kx;
                if (sx < pad || sx - pad >= width) continue;
                dst[ox] += w * src[sx - pad];
              }
            }
          }
        }
      }
    }
  }
  require_finite(out, "conv2d");
  return out;
}

Tensor gap(const Tensor& x) {
  require_rank(x, 3, "gap");
  const std::size_t plane = x.dim(1) * x.dim(2);
  if (plane == 0) throw ShapeError("gap: empty spatial extent");
  Tensor out({x.dim(0)});
  for (std::size_t c = 0; c < x.dim(0); ++c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) sum += x[c * plane + i];
    out[c] = sum / static_cast<double>(plane);
  }
  require_finite(out, "gap");
  return out;
}

Tensor bilinear_upsample(const Tensor& x, std::size_t height, std::size_t width) {
  require_rank(x, 3, "bilinear_upsample");
  const std::size_t channels = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h == 0 || w == 0) throw ShapeError("bilinear_upsample: empty input");
  if (height < h || width < w) {
    throw ShapeError("bilinear_upsample: target " + std::to_string(height) + "x" +
                     std::to_string(width) + " smaller than source " + std::to_string(h) + "x" +
                     std::to_string(w));
  }
  if (height == h && width == w) return x;

  struct Tap {
    std::size_t lo, hi;
    double frac;
  };
  const auto taps = [](std::size_t src, std::size_t dst) {
    std::vector<Tap> out(dst);
    for (std::size_t i = 0; i < dst; ++i) {
      if (src == 1 || dst == 1) {
        out[i] = {0, 0, 0.0};
        continue;
      }
      // align corners: output i maps to i * (src-1)/(dst-1)
      const double pos = static_cast<double>(i * (src - 1)) / static_cast<double>(dst - 1);
      auto lo = static_cast<std::size_t>(pos);
      if (lo >= src - 1) lo = src - 1;
      const std::size_t hi = std::min(lo + 1, src - 1);
      out[i] = {lo, hi, pos - static_cast<double>(lo)};
    }
    return out;
  };
  const auto ty = taps(h, height);
  const auto tx = taps(w, width);

  Tensor out({channels, height, width});
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < height; ++i) {
      const Tap& a = ty[i];
      for (std::size_t j = 0; j < width; ++j) {
        const Tap& b = tx[j];
        const double v00 = x.at(c, a.lo, b.lo), v01 = x.at(c, a.lo, b.hi);
        const double v10 = x.at(c, a.hi, b.lo), v11 = x.at(c, a.hi, b.hi);
        // std::lerp stays within [v0, v1], so the output never leaves the input range.
        const double top = std::lerp(v00, v01, b.frac);
        const double bottom = std::lerp(v10, v11, b.frac);
        out.at(c, i, j) = std::lerp(top, bottom, a.frac);
      }
    }
  }
  require_finite(out, "bilinear_upsample");
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

// Row-wise softmax; `out` may alias `in`.
void softmax_rows(const double* in, double* out, std::size_t size, std::size_t n) {
  for (std::size_t r = 0; r < size / n; ++r) {
    const double* row = in + r * n;
    double* o = out + r * n;
    const double peak = *std::max_element(row, row + n);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = std::exp(row[j] - peak);
      sum += o[j];
    }
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < n; ++j) o[j] *= inv;
  }
}

}  // namespace

Tensor activate(const Tensor& x, Activation kind) {
  Tensor out(x.shape());
  switch (kind) {
    case Activation::sigmoid:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigmoid(x[i]);
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
      break;
    case Activation::softmax_lastdim:
      if (x.rank() == 0 || x.empty()) break;
      softmax_rows(x.data().data(), out.data().data(), x.size(), x.shape().back());
      break;
  }
  require_finite(out, "activate");
  return out;
}

Tensor scaled_softmax_lastdim(Tensor x, double factor) {
  if (x.rank() == 0 || x.empty()) return x;
  double* p = x.data().data();
  for (std::size_t i = 0; i < x.size(); ++i) p[i] *= factor;
  // An overflow in the scaling step surfaces as NaN after the softmax.
  softmax_rows(p, p, x.size(), x.shape().back());
  require_finite(x, "activate");
  return x;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank(w, 2, "linear");
  if (x.rank() == 0) throw ShapeError("linear: scalar input");
  const std::size_t in = w.dim(0), out_dim = w.dim(1);
  if (x.shape().back() != in) {
    throw ShapeError("linear: input last dim " + std::to_string(x.shape().back()) +
                     " does not match weight " + shape_string(w.shape()));
  }
  if (b.size() != out_dim) throw ShapeError("linear: bias size mismatch");
  const std::size_t rows = x.size() / in;
  Tensor y = matmul(x.reshaped({rows, in}), w);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < out_dim; ++j) y.at(r, j) += b[j];
  }
  Tensor::Shape shape = x.shape();
  shape.back() = out_dim;
  require_finite(y, "linear");
  return y.reshaped(std::move(shape));
}

}  // namespace mtnet

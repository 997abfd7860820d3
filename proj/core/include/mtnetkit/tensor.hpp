#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace mtnet {

/// Dense row-major array of doubles.
///
/// The shape product always equals the element count. Every operation in
/// this header checks its result for NaN/Inf and throws NumericError; a
/// non-finite value is never a legal tensor entry produced by an op.
class Tensor {
 public:
  using Shape = std::vector<std::size_t>;

  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double value) { return Tensor(std::move(shape), value); }
  static Tensor identity(std::size_t n);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t c, std::size_t i, std::size_t j) const {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }
  double& at(std::size_t c, std::size_t i, std::size_t j) {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }

  /// Same data, new shape with the same element count.
  Tensor reshaped(Shape shape) const;

  /// Bitwise equality of shape and data.
  friend bool operator==(const Tensor& a, const Tensor& b);

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::string shape_string(const Tensor::Shape& shape);
std::size_t shape_product(const Tensor::Shape& shape);

/// Throws NumericError naming `where` if any entry is NaN or Inf.
void require_finite(const Tensor& t, const char* where);

enum class ElementwiseOp { add, mul };

/// out[i] = op(a[i], b[i]). Shapes must match, except that a [1,H,W] `b`
/// broadcasts over every channel of a [C,H,W] `a`.
Tensor elementwise(const Tensor& a, const Tensor& b, ElementwiseOp op);
inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElementwiseOp::add); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElementwiseOp::mul); }

Tensor scale(const Tensor& a, double factor);

/// Multiplies each channel of x[C,H,W] by gate[C].
Tensor scale_channels(const Tensor& x, const Tensor& gate);

/// [L,K] x [K,M]. Each output is accumulated sequentially over K.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);

/// Cross-correlation (no kernel flip) of x[Ci,H,W] with k[Co,Ci,kh,kw] and
/// zero padding. `bias`, when non-empty, has Co entries. The output extent
/// (H + 2p - kh) / stride + 1 must be exact.
Tensor conv2d(const Tensor& x, const Tensor& k, int padding, int stride,
              std::span<const double> bias = {});

/// Global average pooling, [C,H,W] -> [C].
Tensor gap(const Tensor& x);

/// Align-corners bilinear interpolation, [C,h,w] -> [C,H,W] with H>=h, W>=w.
Tensor bilinear_upsample(const Tensor& x, std::size_t height, std::size_t width);

enum class Activation { sigmoid, relu, softmax_lastdim };

Tensor activate(const Tensor& x, Activation kind);
inline Tensor sigmoid(const Tensor& x) { return activate(x, Activation::sigmoid); }
inline Tensor relu(const Tensor& x) { return activate(x, Activation::relu); }
inline Tensor softmax_lastdim(const Tensor& x) { return activate(x, Activation::softmax_lastdim); }
/// softmax_lastdim(scale(x, factor)) computed in place; bitwise identical.
Tensor scaled_softmax_lastdim(Tensor x, double factor);

double sigmoid(double x);

/// Affine map along the last axis: x[..., K] * w[K,M] + b[M].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

}  // namespace mtnet

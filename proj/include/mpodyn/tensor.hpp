#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace mpodyn {

using cplx = std::complex<double>;

/// Mismatched axis extents, invalid axis lists, out-of-range indices.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Failures of the numerical backends (SVD non-convergence, overflow).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when a singular-value spectrum is identically zero.
struct DegenerateSpectrumError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense complex tensor: a shape vector plus row-major double-precision data.
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(std::vector<std::size_t> shape);
  DenseTensor(std::vector<std::size_t> shape, std::vector<cplx> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t extent(std::size_t axis) const;

  cplx* data() { return data_.data(); }
  const cplx* data() const { return data_.data(); }

  cplx& at(std::span<const std::size_t> index);
  cplx at(std::span<const std::size_t> index) const;
  cplx& at(std::initializer_list<std::size_t> index);
  cplx at(std::initializer_list<std::size_t> index) const;

  /// New tensor with axes reordered so that axis k of the result is
  /// axis_order[k] of the input.
  DenseTensor permuted(std::span<const std::size_t> axis_order) const;
  DenseTensor permuted(std::initializer_list<std::size_t> axis_order) const;

  /// Same data, new shape; total size must match.
  DenseTensor reshaped(std::vector<std::size_t> new_shape) const;

  DenseTensor conjugated() const;
  DenseTensor scaled(cplx factor) const;

  double frobenius_norm() const;
  bool all_finite() const;

  DenseTensor& operator*=(cplx factor);

 private:
  std::vector<std::size_t> shape_;
  std::vector<cplx> data_;
};

/// Pairwise contraction of axes_a of `a` with axes_b of `b`. The result
/// carries the free axes of `a` (in order) followed by the free axes of `b`.
DenseTensor contract(const DenseTensor& a, std::span<const std::size_t> axes_a,
                     const DenseTensor& b, std::span<const std::size_t> axes_b);
DenseTensor contract(const DenseTensor& a, std::initializer_list<std::size_t> axes_a,
                     const DenseTensor& b, std::initializer_list<std::size_t> axes_b);

struct SVDResult {
  DenseTensor left_isometry;            // shape: left extents ..., k
  std::vector<double> singular_values;  // non-increasing, >= 0
  DenseTensor right_isometry;           // shape: k, right extents ...
};

/// SVD of `t` viewed as a matrix with the first `n_left_axes` axes as rows.
SVDResult svd_split(const DenseTensor& t, std::size_t n_left_axes);
/// General form: `left_axes` become rows, remaining axes columns (in order).
SVDResult svd_split(const DenseTensor& t, std::span<const std::size_t> left_axes);

/// Smallest rank M with discarded weight sum_{k>M} s_k^2 / sum_k s_k^2 <=
/// epsilon. Singular values tied at the cut within 1e-13 relative are kept
/// together; the result is clamped to max_rank afterwards and is always >= 1.
std::size_t truncation_rank(std::span<const double> singular_values, double epsilon,
                            std::optional<std::size_t> max_rank = std::nullopt);

/// Discarded weight realized when keeping the leading `rank` values.
double truncation_weight(std::span<const double> singular_values, std::size_t rank);

}  // namespace mpodyn

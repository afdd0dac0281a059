#include "mpodyn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#define LAPACK_COMPLEX_CPP
#include <lapacke.h>

namespace mpodyn {

namespace {

using RowMajorMat =
    Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajorMat>;
using Map = Eigen::Map<RowMajorMat>;

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::vector<std::size_t> row_major_strides(const std::vector<std::size_t>& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;)
    strides[i - 1] = strides[i] * shape[i];
  return strides;
}

}  // namespace

DenseTensor::DenseTensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_)) {
  for (std::size_t e : shape_)
    if (e == 0) throw DimensionError("DenseTensor: zero axis extent");
}

DenseTensor::DenseTensor(std::vector<std::size_t> shape, std::vector<cplx> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (std::size_t e : shape_)
    if (e == 0) throw DimensionError("DenseTensor: zero axis extent");
  if (data_.size() != shape_product(shape_))
    throw DimensionError("DenseTensor: data size does not match shape");
}

std::size_t DenseTensor::extent(std::size_t axis) const {
  if (axis >= shape_.size()) throw DimensionError("DenseTensor: axis out of range");
  return shape_[axis];
}

cplx& DenseTensor::at(std::span<const std::size_t> index) {
  if (index.size() != shape_.size())
    throw DimensionError("DenseTensor: index rank mismatch");
  std::size_t off = 0;
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= shape_[i]) throw DimensionError("DenseTensor: index out of range");
    off = off * shape_[i] + index[i];
  }
  return data_[off];
}

cplx DenseTensor::at(std::span<const std::size_t> index) const {
  return const_cast<DenseTensor*>(this)->at(index);
}

cplx& DenseTensor::at(std::initializer_list<std::size_t> index) {
  return at(std::span<const std::size_t>(index.begin(), index.size()));
}

cplx DenseTensor::at(std::initializer_list<std::size_t> index) const {
  return at(std::span<const std::size_t>(index.begin(), index.size()));
}

DenseTensor DenseTensor::permuted(std::span<const std::size_t> axis_order) const {
  const std::size_t r = rank();
  if (axis_order.size() != r) throw DimensionError("permuted: axis list rank mismatch");
  std::vector<bool> seen(r, false);
  for (std::size_t ax : axis_order) {
    if (ax >= r || seen[ax]) throw DimensionError("permuted: invalid axis order");
    seen[ax] = true;
  }
  bool identity = true;
  for (std::size_t i = 0; i < r; ++i)
    if (axis_order[i] != i) identity = false;
  if (identity) return *this;

  std::vector<std::size_t> new_shape(r);
  for (std::size_t i = 0; i < r; ++i) new_shape[i] = shape_[axis_order[i]];
  const auto in_strides = row_major_strides(shape_);
  std::vector<std::size_t> step(r);
  for (std::size_t i = 0; i < r; ++i) step[i] = in_strides[axis_order[i]];

  DenseTensor out(new_shape);
  cplx* dst = out.data();
  const cplx* src = data_.data();
  std::vector<std::size_t> idx(r, 0);
  std::size_t in_off = 0;
  const std::size_t n = size();
  for (std::size_t pos = 0; pos < n; ++pos) {
    dst[pos] = src[in_off];
    for (std::size_t ax = r; ax-- > 0;) {
      in_off += step[ax];
      if (++idx[ax] < new_shape[ax]) break;
      in_off -= new_shape[ax] * step[ax];
      idx[ax] = 0;
    }
  }
  return out;
}

DenseTensor DenseTensor::permuted(std::initializer_list<std::size_t> axis_order) const {
  return permuted(std::span<const std::size_t>(axis_order.begin(), axis_order.size()));
}

DenseTensor DenseTensor::reshaped(std::vector<std::size_t> new_shape) const {
  if (shape_product(new_shape) != size())
    throw DimensionError("reshaped: size mismatch");
  return DenseTensor(std::move(new_shape), data_);
}

DenseTensor DenseTensor::conjugated() const {
  DenseTensor out(shape_, data_);
  for (cplx& v : out.data_) v = std::conj(v);
  return out;
}

DenseTensor DenseTensor::scaled(cplx factor) const {
  DenseTensor out(shape_, data_);
  out *= factor;
  return out;
}

DenseTensor& DenseTensor::operator*=(cplx factor) {
  for (cplx& v : data_) v *= factor;
  return *this;
}

double DenseTensor::frobenius_norm() const {
  double acc = 0.0;
  for (const cplx& v : data_) acc += std::norm(v);
  return std::sqrt(acc);
}

bool DenseTensor::all_finite() const {
  for (const cplx& v : data_)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  return true;
}

DenseTensor contract(const DenseTensor& a, std::span<const std::size_t> axes_a,
                     const DenseTensor& b, std::span<const std::size_t> axes_b) {
  if (axes_a.size() != axes_b.size())
    throw DimensionError("contract: axis lists differ in length");
  const std::size_t ra = a.rank(), rb = b.rank(), nc = axes_a.size();
  std::vector<bool> used_a(ra, false), used_b(rb, false);
  std::size_t contracted = 1;
  for (std::size_t k = 0; k < nc; ++k) {
    const std::size_t ia = axes_a[k], ib = axes_b[k];
    if (ia >= ra || ib >= rb) throw DimensionError("contract: axis out of range");
    if (used_a[ia] || used_b[ib]) throw DimensionError("contract: repeated axis");
    if (a.extent(ia) != b.extent(ib))
      throw DimensionError("contract: paired axes have different extents (" +
                           std::to_string(a.extent(ia)) + " vs " +
                           std::to_string(b.extent(ib)) + ")");
    used_a[ia] = used_b[ib] = true;
    contracted *= a.extent(ia);
  }

  std::vector<std::size_t> perm_a, perm_b, out_shape;
  std::size_t free_a = 1, free_b = 1;
  for (std::size_t i = 0; i < ra; ++i)
    if (!used_a[i]) {
      perm_a.push_back(i);
      out_shape.push_back(a.extent(i));
      free_a *= a.extent(i);
    }
  perm_a.insert(perm_a.end(), axes_a.begin(), axes_a.end());
  perm_b.assign(axes_b.begin(), axes_b.end());
  for (std::size_t i = 0; i < rb; ++i)
    if (!used_b[i]) {
      perm_b.push_back(i);
      out_shape.push_back(b.extent(i));
      free_b *= b.extent(i);
    }

  const DenseTensor ap = a.permuted(perm_a);
  const DenseTensor bp = b.permuted(perm_b);

  DenseTensor out(out_shape.empty() ? std::vector<std::size_t>{} : out_shape);
  ConstMap ma(ap.data(), static_cast<Eigen::Index>(free_a),
              static_cast<Eigen::Index>(contracted));
  ConstMap mb(bp.data(), static_cast<Eigen::Index>(contracted),
              static_cast<Eigen::Index>(free_b));
  Map mo(out.data(), static_cast<Eigen::Index>(free_a),
         static_cast<Eigen::Index>(free_b));
  mo.noalias() = ma * mb;
  return out;
}

DenseTensor contract(const DenseTensor& a, std::initializer_list<std::size_t> axes_a,
                     const DenseTensor& b, std::initializer_list<std::size_t> axes_b) {
  return contract(a, std::span<const std::size_t>(axes_a.begin(), axes_a.size()),
                  b, std::span<const std::size_t>(axes_b.begin(), axes_b.size()));
}

namespace {

// Thin SVD of an m x n row-major matrix. Calls zgesdd on the transposed
// col-major view so no layout copies are needed; falls back to zgesvd when
// the divide-and-conquer driver fails to converge.
void dense_svd(std::vector<cplx> a, std::size_t m, std::size_t n,
               std::vector<cplx>& u, std::vector<double>& s, std::vector<cplx>& vt) {
  const std::size_t k = std::min(m, n);
  s.assign(k, 0.0);
  // In the transposed problem A^T = Utilde S Vtilde^H the buffer of Vtilde^H
  // read row-major is U, and the buffer of Utilde read row-major is V^H.
  vt.assign(n * k, cplx(0));  // Utilde: n x k col-major
  u.assign(k * m, cplx(0));   // Vtilde^H: k x m col-major

  std::vector<cplx> work = a;
  lapack_int info = LAPACKE_zgesdd(
      LAPACK_COL_MAJOR, 'S', static_cast<lapack_int>(n), static_cast<lapack_int>(m),
      reinterpret_cast<lapack_complex_double*>(work.data()), static_cast<lapack_int>(n),
      s.data(), reinterpret_cast<lapack_complex_double*>(vt.data()),
      static_cast<lapack_int>(n), reinterpret_cast<lapack_complex_double*>(u.data()),
      static_cast<lapack_int>(k));
  if (info != 0) {
    std::vector<double> superb(k > 1 ? k - 1 : 1);
    work = std::move(a);
    info = LAPACKE_zgesvd(
        LAPACK_COL_MAJOR, 'S', 'S', static_cast<lapack_int>(n), static_cast<lapack_int>(m),
        reinterpret_cast<lapack_complex_double*>(work.data()), static_cast<lapack_int>(n),
        s.data(), reinterpret_cast<lapack_complex_double*>(vt.data()),
        static_cast<lapack_int>(n), reinterpret_cast<lapack_complex_double*>(u.data()),
        static_cast<lapack_int>(k), superb.data());
    if (info != 0)
      throw NumericalError("SVD failed to converge (zgesdd/zgesvd info=" +
                           std::to_string(info) + ")");
  }
  // u is now m x k row-major, vt is k x n row-major.
}

}  // namespace

SVDResult svd_split(const DenseTensor& t, std::size_t n_left_axes) {
  if (n_left_axes == 0 || n_left_axes >= t.rank())
    throw DimensionError("svd_split: need at least one left and one right axis");
  std::size_t m = 1, n = 1;
  std::vector<std::size_t> left_shape, right_shape;
  for (std::size_t i = 0; i < t.rank(); ++i) {
    if (i < n_left_axes) {
      m *= t.extent(i);
      left_shape.push_back(t.extent(i));
    } else {
      n *= t.extent(i);
      right_shape.push_back(t.extent(i));
    }
  }
  const std::size_t k = std::min(m, n);

  std::vector<cplx> u, vt;
  std::vector<double> s;
  dense_svd(std::vector<cplx>(t.data(), t.data() + t.size()), m, n, u, s, vt);

  SVDResult out;
  left_shape.push_back(k);
  right_shape.insert(right_shape.begin(), k);
  out.left_isometry = DenseTensor(std::move(left_shape), std::move(u));
  out.right_isometry = DenseTensor(std::move(right_shape), std::move(vt));
  out.singular_values = std::move(s);
  if (!out.left_isometry.all_finite() || !out.right_isometry.all_finite())
    throw NumericalError("svd_split: non-finite factor entries");
  return out;
}

SVDResult svd_split(const DenseTensor& t, std::span<const std::size_t> left_axes) {
  if (left_axes.empty() || left_axes.size() >= t.rank())
    throw DimensionError("svd_split: need at least one left and one right axis");
  std::vector<std::size_t> perm(left_axes.begin(), left_axes.end());
  std::vector<bool> used(t.rank(), false);
  for (std::size_t ax : left_axes) {
    if (ax >= t.rank() || used[ax]) throw DimensionError("svd_split: invalid axis list");
    used[ax] = true;
  }
  for (std::size_t i = 0; i < t.rank(); ++i)
    if (!used[i]) perm.push_back(i);
  return svd_split(t.permuted(perm), left_axes.size());
}

std::size_t truncation_rank(std::span<const double> singular_values, double epsilon,
                            std::optional<std::size_t> max_rank) {
  const std::size_t n = singular_values.size();
  if (n == 0) throw DegenerateSpectrumError("truncation_rank: empty spectrum");
  if (epsilon < 0.0 || epsilon >= 1.0)
    throw DimensionError("truncation_rank: epsilon must be in [0, 1)");
  for (std::size_t i = 0; i < n; ++i) {
    if (singular_values[i] < 0.0)
      throw DimensionError("truncation_rank: negative singular value");
    if (i + 1 < n && singular_values[i + 1] > singular_values[i] * (1.0 + 1e-12))
      throw DimensionError("truncation_rank: values not sorted non-increasing");
  }

  // Suffix sums accumulated from the smallest values for accuracy.
  std::vector<double> tail(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;)
    tail[i] = tail[i + 1] + singular_values[i] * singular_values[i];
  const double total = tail[0];
  if (total <= 0.0)
    throw DegenerateSpectrumError("truncation_rank: all singular values are zero");

  std::size_t rank = n;
  for (std::size_t m = 1; m <= n; ++m) {
    if (tail[m] <= epsilon * total) {
      rank = m;
      break;
    }
  }
  // Degenerate groups straddling the cut are kept together.
  while (rank < n && singular_values[rank] > 0.0 &&
         (singular_values[rank - 1] - singular_values[rank]) <
             1e-13 * singular_values[rank - 1])
    ++rank;
  if (max_rank) rank = std::min(rank, std::max<std::size_t>(1, *max_rank));
  return std::max<std::size_t>(1, rank);
}

double truncation_weight(std::span<const double> singular_values, std::size_t rank) {
  const std::size_t n = singular_values.size();
  double total = 0.0, tail = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double w = singular_values[i] * singular_values[i];
    total += w;
    if (i >= rank) tail += w;
  }
  if (total <= 0.0)
    throw DegenerateSpectrumError("truncation_weight: all singular values are zero");
  return tail / total;
}

}  // namespace mpodyn

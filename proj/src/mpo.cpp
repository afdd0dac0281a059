#include "mpodyn/mpo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace mpodyn {

namespace {

constexpr char kMagic[8] = {'M', 'P', 'O', 'B', 'I', 'N', '0', '1'};

void check_chain(const MPO& x) {
  if (x.sites.empty()) throw DimensionError("MPO: empty chain");
  if (x.sites.front().extent(0) != 1 || x.sites.back().extent(3) != 1)
    throw DimensionError("MPO: boundary bonds must have dimension 1");
}

void check_same_lattice(const MPO& a, const MPO& b) {
  if (a.length() != b.length() || a.phys_dim() != b.phys_dim())
    throw DimensionError("MPO: length or local dimension mismatch");
}

using ColMat = Eigen::MatrixXcd;
using RowMajorMat =
    Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Thin QR of the tensor viewed as (rows x cols): Q (rows x k), R (k x cols).
void thin_qr(const DenseTensor& t, std::size_t rows, std::size_t cols,
             DenseTensor& q, DenseTensor& r) {
  const std::size_t k = std::min(rows, cols);
  Eigen::Map<const RowMajorMat> a(t.data(), rows, cols);
  Eigen::HouseholderQR<ColMat> qr(a);
  ColMat qm = qr.householderQ() * ColMat::Identity(rows, k);
  ColMat rm = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  q = DenseTensor({rows, k});
  r = DenseTensor({k, cols});
  Eigen::Map<RowMajorMat>(q.data(), rows, k) = qm;
  Eigen::Map<RowMajorMat>(r.data(), k, cols) = rm;
}

// Thin LQ: L (rows x k), Q (k x cols) with orthonormal rows.
void thin_lq(const DenseTensor& t, std::size_t rows, std::size_t cols,
             DenseTensor& l, DenseTensor& q) {
  const std::size_t k = std::min(rows, cols);
  Eigen::Map<const RowMajorMat> a(t.data(), rows, cols);
  Eigen::HouseholderQR<ColMat> qr(a.adjoint());
  ColMat qm = qr.householderQ() * ColMat::Identity(cols, k);
  ColMat rm = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  l = DenseTensor({rows, k});
  q = DenseTensor({k, cols});
  Eigen::Map<RowMajorMat>(l.data(), rows, k) = rm.adjoint();
  Eigen::Map<RowMajorMat>(q.data(), k, cols) = qm.adjoint();
}

DenseTensor slice_first_axis(const DenseTensor& t, std::size_t k) {
  std::vector<std::size_t> shape = t.shape();
  const std::size_t row = t.size() / shape[0];
  shape[0] = k;
  std::vector<cplx> data(t.data(), t.data() + k * row);
  return DenseTensor(std::move(shape), std::move(data));
}

DenseTensor slice_last_axis(const DenseTensor& t, std::size_t k) {
  std::vector<std::size_t> shape = t.shape();
  const std::size_t last = shape.back();
  const std::size_t nrows = t.size() / last;
  shape.back() = k;
  DenseTensor out(shape);
  for (std::size_t r = 0; r < nrows; ++r)
    std::copy(t.data() + r * last, t.data() + r * last + k, out.data() + r * k);
  return out;
}

}  // namespace

int BondProfile::max_dim() const {
  int m = 1;
  for (int v : dims) m = std::max(m, v);
  return m;
}

MPO identity_mpo(int L, int d) {
  if (L < 2 || d < 2) throw DimensionError("identity_mpo: need L >= 2 and d >= 2");
  MPO x;
  DenseTensor site({1, static_cast<std::size_t>(d), static_cast<std::size_t>(d), 1});
  for (int s = 0; s < d; ++s)
    site.at({0, static_cast<std::size_t>(s), static_cast<std::size_t>(s), 0}) = 1.0;
  x.sites.assign(L, site);
  return x;
}

MPO single_site_mpo(int L, int d, int site, const Eigen::MatrixXcd& op) {
  if (site < 0 || site >= L)
    throw DimensionError("single_site_mpo: site index out of range");
  if (op.rows() != d || op.cols() != d)
    throw DimensionError("single_site_mpo: operator dimension mismatch");
  MPO x = identity_mpo(L, d);
  DenseTensor t({1, static_cast<std::size_t>(d), static_cast<std::size_t>(d), 1});
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      t.at({0, static_cast<std::size_t>(i), static_cast<std::size_t>(j), 0}) = op(i, j);
  x.sites[site] = std::move(t);
  return x;
}

MPO sum_local_mpo(int L, int d, const Eigen::MatrixXcd& op) {
  if (L < 2) throw DimensionError("sum_local_mpo: need L >= 2");
  if (op.rows() != d || op.cols() != d)
    throw DimensionError("sum_local_mpo: operator dimension mismatch");
  const std::size_t du = static_cast<std::size_t>(d);
  // Block structure [[I, op], [0, I]] with boundary row (I, op) and
  // boundary column (op, I)^T realizes sum_i op_i with interior bonds of 2.
  MPO x;
  DenseTensor first({1, du, du, 2});
  DenseTensor bulk({2, du, du, 2});
  DenseTensor last({2, du, du, 1});
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const std::size_t iu = i, ju = j;
      const cplx idv = (i == j) ? cplx(1) : cplx(0);
      first.at({0, iu, ju, 0}) = idv;
      first.at({0, iu, ju, 1}) = op(i, j);
      bulk.at({0, iu, ju, 0}) = idv;
      bulk.at({0, iu, ju, 1}) = op(i, j);
      bulk.at({1, iu, ju, 1}) = idv;
      last.at({0, iu, ju, 0}) = op(i, j);
      last.at({1, iu, ju, 0}) = idv;
    }
  x.sites.push_back(std::move(first));
  for (int s = 1; s < L - 1; ++s) x.sites.push_back(bulk);
  x.sites.push_back(std::move(last));
  return x;
}

MPO two_site_mpo(int L, int d, int bond, const Eigen::MatrixXcd& op) {
  if (bond < 0 || bond >= L - 1) throw DimensionError("two_site_mpo: bond out of range");
  if (op.rows() != d * d || op.cols() != d * d)
    throw DimensionError("two_site_mpo: operator dimension mismatch");
  const std::size_t du = static_cast<std::size_t>(d);
  DenseTensor t({du, du, du, du});  // (s1, s1', s2, s2')
  for (int r = 0; r < d * d; ++r)
    for (int c = 0; c < d * d; ++c)
      t.at({static_cast<std::size_t>(r / d), static_cast<std::size_t>(c / d),
            static_cast<std::size_t>(r % d), static_cast<std::size_t>(c % d)}) = op(r, c);
  SVDResult svd = svd_split(t, 2);
  const std::size_t k = svd.singular_values.size();
  DenseTensor right = svd.right_isometry;  // (k, s2, s2', 1 after reshape)
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c = 0; c < du * du; ++c)
      right.data()[r * du * du + c] *= svd.singular_values[r];
  MPO x = identity_mpo(L, d);
  x.sites[bond] = svd.left_isometry.reshaped({1, du, du, k});
  x.sites[bond + 1] = right.reshaped({k, du, du, 1});
  return x;
}

BondProfile bond_profile(const MPO& x) {
  check_chain(x);
  BondProfile p;
  p.dims.reserve(x.length() + 1);
  for (const DenseTensor& t : x.sites) p.dims.push_back(static_cast<int>(t.extent(0)));
  p.dims.push_back(static_cast<int>(x.sites.back().extent(3)));
  return p;
}

MPO dagger(const MPO& x) {
  MPO out;
  out.log_scale = x.log_scale;
  out.center = x.center;
  out.sites.reserve(x.sites.size());
  for (const DenseTensor& t : x.sites)
    out.sites.push_back(t.permuted({0, 2, 1, 3}).conjugated());
  return out;
}

double log_schatten2_norm(const MPO& x) {
  check_chain(x);
  DenseTensor env({1, 1});
  env.at({0, 0}) = 1.0;
  double log_acc = 0.0;
  for (const DenseTensor& site : x.sites) {
    DenseTensor half = contract(env, {0}, site, {0});           // (a', s, s', b)
    env = contract(half, {0, 1, 2}, site.conjugated(), {0, 1, 2});  // (b, b')
    const double m = env.frobenius_norm();
    if (m == 0.0) return -std::numeric_limits<double>::infinity();
    env *= cplx(1.0 / m);
    log_acc += std::log(m);
  }
  const double val = std::max(env.at({0, 0}).real(), 0.0);
  if (val == 0.0) return -std::numeric_limits<double>::infinity();
  return 0.5 * (std::log(val) + log_acc) + x.log_scale;
}

double schatten2_norm(const MPO& x) {
  const double ln = log_schatten2_norm(x);
  if (ln > std::log(std::numeric_limits<double>::max()))
    throw NumericalError(
        "schatten2_norm: overflow; log_scale rebalancing required "
        "(use log_schatten2_norm)");
  return std::exp(ln);
}

cplx ScaledValue::value() const {
  if (mantissa == cplx(0.0, 0.0)) return {0.0, 0.0};
  return mantissa * std::exp(log_mag);
}

double ScaledValue::log_abs() const {
  if (mantissa == cplx(0.0, 0.0)) return -std::numeric_limits<double>::infinity();
  return std::log(std::abs(mantissa)) + log_mag;
}

ScaledValue hs_trace_scaled(const MPO& y, const MPO& b, const MPO& x) {
  check_same_lattice(y, b);
  check_same_lattice(y, x);
  DenseTensor env({1, 1, 1});
  env.at({0, 0, 0}) = 1.0;
  double log_acc = 0.0;
  for (int i = 0; i < y.length(); ++i) {
    // Tr(Y B X): Y_{s1 s2} B_{s2 s3} X_{s3 s1} per site, bonds carried along.
    DenseTensor e1 = contract(env, {0}, y.sites[i], {0});     // (ab, ax, s1, s2, by)
    DenseTensor e2 = contract(e1, {0, 3}, b.sites[i], {0, 1});  // (ax, s1, by, s3, bb)
    env = contract(e2, {0, 3, 1}, x.sites[i], {0, 1, 2});       // (by, bb, bx)
    const double m = env.frobenius_norm();
    if (m == 0.0) return {cplx(0.0, 0.0), 0.0};
    env *= cplx(1.0 / m);
    log_acc += std::log(m);
  }
  return {env.at({0, 0, 0}), log_acc + y.log_scale + b.log_scale + x.log_scale};
}

ScaledValue hs_trace_scaled(const MPO& y, const MPO& x) {
  check_same_lattice(y, x);
  DenseTensor env({1, 1});
  env.at({0, 0}) = 1.0;
  double log_acc = 0.0;
  for (int i = 0; i < y.length(); ++i) {
    DenseTensor e1 = contract(env, {0}, y.sites[i], {0});  // (ax, s1, s2, by)
    env = contract(e1, {0, 2, 1}, x.sites[i], {0, 1, 2});  // (by, bx)
    const double m = env.frobenius_norm();
    if (m == 0.0) return {cplx(0.0, 0.0), 0.0};
    env *= cplx(1.0 / m);
    log_acc += std::log(m);
  }
  return {env.at({0, 0}), log_acc + y.log_scale + x.log_scale};
}

cplx hs_trace(const MPO& y, const MPO& b, const MPO& x) {
  return hs_trace_scaled(y, b, x).value();
}

cplx hs_trace(const MPO& y, const MPO& x) { return hs_trace_scaled(y, x).value(); }

MPO mpo_multiply(const MPO& a, const MPO& b) {
  check_same_lattice(a, b);
  MPO out;
  out.log_scale = a.log_scale + b.log_scale;
  out.sites.reserve(a.sites.size());
  for (int i = 0; i < a.length(); ++i) {
    DenseTensor c = contract(a.sites[i], {2}, b.sites[i], {1});  // (a1,s,b1,a2,s'',b2)
    c = c.permuted({0, 3, 1, 4, 2, 5});
    const auto& s = c.shape();
    out.sites.push_back(c.reshaped({s[0] * s[1], s[2], s[3], s[4] * s[5]}));
  }
  return out;
}

namespace detail {

void shift_center_right(MPO& x) {
  const int c = *x.center;
  DenseTensor& t = x.sites[c];
  const auto sh = t.shape();
  DenseTensor q, r;
  thin_qr(t, sh[0] * sh[1] * sh[2], sh[3], q, r);
  const std::size_t k = q.extent(1);
  x.sites[c] = q.reshaped({sh[0], sh[1], sh[2], k});
  x.sites[c + 1] = contract(r, {1}, x.sites[c + 1], {0});
  x.center = c + 1;
}

void shift_center_left(MPO& x) {
  const int c = *x.center;
  DenseTensor& t = x.sites[c];
  const auto sh = t.shape();
  DenseTensor l, q;
  thin_lq(t, sh[0], sh[1] * sh[2] * sh[3], l, q);
  const std::size_t k = q.extent(0);
  x.sites[c] = q.reshaped({k, sh[1], sh[2], sh[3]});
  DenseTensor prev = contract(x.sites[c - 1], {3}, l, {0});
  x.sites[c - 1] = std::move(prev);
  x.center = c - 1;
}

void ensure_center(MPO& x, int site) {
  if (!x.center) {
    x = canonicalize(std::move(x), site);
    return;
  }
  while (*x.center < site) shift_center_right(x);
  while (*x.center > site) shift_center_left(x);
}

void rebalance_log_scale(MPO& x) {
  if (!x.center) throw NumericalError("rebalance_log_scale: no canonical center");
  DenseTensor& t = x.sites[*x.center];
  const double n = t.frobenius_norm();
  if (n == 0.0 || !std::isfinite(n))
    throw NumericalError("rebalance_log_scale: center norm is zero or non-finite");
  t *= cplx(1.0 / n);
  x.log_scale += std::log(n);
}

TruncationInfo apply_gate_in_place(MPO& x, int bond, const Eigen::Matrix4cd* gate_out,
                                   const Eigen::Matrix4cd* gate_in, double epsilon,
                                   std::optional<int> max_rank, bool move_right) {
  const int L = x.length();
  const std::size_t d = x.sites[0].extent(1);
  if (bond < 0 || bond >= L - 1) throw DimensionError("gate: bond index out of range");
  if (!x.center)
    x = canonicalize(std::move(x), bond);
  else if (*x.center < bond)
    ensure_center(x, bond);
  else if (*x.center > bond + 1)
    ensure_center(x, bond + 1);

  DenseTensor theta = contract(x.sites[bond], {3}, x.sites[bond + 1], {0});
  // theta axes: (Ml, s1, s1', s2, s2', Mr)

  auto gate_tensor = [d](const Eigen::Matrix4cd& g) {
    DenseTensor gt({d, d, d, d});
    for (std::size_t i = 0; i < d * d; ++i)
      for (std::size_t j = 0; j < d * d; ++j)
        gt.at({i / d, i % d, j / d, j % d}) =
            g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return gt;
  };

  if (gate_out) {
    DenseTensor g = gate_tensor(*gate_out);      // (s1, s2, t1, t2)
    theta = contract(g, {2, 3}, theta, {1, 3});  // (s1, s2, Ml, s1', s2', Mr)
    theta = theta.permuted({2, 0, 3, 1, 4, 5});
  }
  if (gate_in) {
    DenseTensor g = gate_tensor(*gate_in);       // (t1, t2, s1'', s2'')
    theta = contract(theta, {2, 4}, g, {0, 1});  // (Ml, s1, s2, Mr, s1'', s2'')
    theta = theta.permuted({0, 1, 4, 2, 5, 3});
  }

  SVDResult svd;
  try {
    svd = svd_split(theta, 3);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(e.what()) + " at bond " + std::to_string(bond));
  }

  TruncationInfo info;
  std::size_t rank;
  try {
    rank = truncation_rank(svd.singular_values, epsilon,
                           max_rank ? std::optional<std::size_t>(
                                          static_cast<std::size_t>(*max_rank))
                                    : std::nullopt);
  } catch (const DegenerateSpectrumError&) {
    // Gate annihilated the pair; keep a rank-1 zero block.
    rank = 1;
  }
  info.rank = static_cast<int>(rank);
  info.weight = truncation_weight(svd.singular_values, rank);
  info.saturated = info.weight > epsilon;

  DenseTensor u = slice_last_axis(svd.left_isometry, rank);
  DenseTensor vt = slice_first_axis(svd.right_isometry, rank);
  if (move_right) {
    const std::size_t cols = vt.size() / rank;
    for (std::size_t r = 0; r < rank; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        vt.data()[r * cols + c] *= svd.singular_values[r];
    x.sites[bond] = std::move(u);
    x.sites[bond + 1] = std::move(vt);
    x.center = bond + 1;
  } else {
    const std::size_t rows = u.size() / rank;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < rank; ++c)
        u.data()[r * rank + c] *= svd.singular_values[c];
    x.sites[bond] = std::move(u);
    x.sites[bond + 1] = std::move(vt);
    x.center = bond;
  }
  if (!x.sites[bond].all_finite() || !x.sites[bond + 1].all_finite())
    throw NumericalError("gate: non-finite tensor entries at bond " +
                         std::to_string(bond));
  return info;
}

}  // namespace detail

MPO canonicalize(MPO x, int center) {
  check_chain(x);
  const int L = x.length();
  if (center < 0 || center >= L) throw DimensionError("canonicalize: center out of range");
  if (x.center) {
    detail::ensure_center(x, center);
    return x;
  }
  x.center = 0;
  // Left-to-right QR pass up to the center, then right-to-left from the end.
  for (int i = 0; i < center; ++i) {
    x.center = i;
    detail::shift_center_right(x);
  }
  x.center = center;
  for (int i = L - 1; i > center; --i) {
    const auto sh = x.sites[i].shape();
    DenseTensor l, q;
    thin_lq(x.sites[i], sh[0], sh[1] * sh[2] * sh[3], l, q);
    x.sites[i] = q.reshaped({q.extent(0), sh[1], sh[2], sh[3]});
    x.sites[i - 1] = contract(x.sites[i - 1], {3}, l, {0});
  }
  return x;
}

std::pair<MPO, TruncationInfo> apply_two_site_gate(MPO x, int bond,
                                                   const Eigen::Matrix4cd& gate,
                                                   GateSide side, double epsilon,
                                                   std::optional<int> max_rank) {
  TruncationInfo info = detail::apply_gate_in_place(
      x, bond, side == GateSide::Left ? &gate : nullptr,
      side == GateSide::Right ? &gate : nullptr, epsilon, max_rank, true);
  return {std::move(x), info};
}

std::pair<MPO, std::vector<TruncationInfo>> compress(MPO x, double epsilon,
                                                     std::optional<int> max_rank) {
  // Two truncating passes; the second sees the environments already
  // compressed by the first, which settles the profile.
  x = canonicalize(std::move(x), 0);
  std::vector<TruncationInfo> infos;
  for (int bond = 0; bond < x.length() - 1; ++bond)
    infos.push_back(detail::apply_gate_in_place(x, bond, nullptr, nullptr, epsilon,
                                                max_rank, true));
  for (int bond = x.length() - 2; bond >= 0; --bond)
    infos.push_back(detail::apply_gate_in_place(x, bond, nullptr, nullptr, epsilon,
                                                max_rank, false));
  return {std::move(x), std::move(infos)};
}

void save_mpo(const MPO& x, const std::filesystem::path& path) {
  check_chain(x);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NumericalError("save_mpo: cannot open " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t L = static_cast<std::uint32_t>(x.length());
  const std::uint32_t d = static_cast<std::uint32_t>(x.phys_dim());
  const std::int32_t has_center = x.center ? 1 : 0;
  const std::int32_t center = x.center.value_or(0);
  out.write(reinterpret_cast<const char*>(&L), sizeof(L));
  out.write(reinterpret_cast<const char*>(&d), sizeof(d));
  out.write(reinterpret_cast<const char*>(&x.log_scale), sizeof(double));
  out.write(reinterpret_cast<const char*>(&has_center), sizeof(has_center));
  out.write(reinterpret_cast<const char*>(&center), sizeof(center));
  for (const DenseTensor& t : x.sites) {
    std::uint64_t dims[4];
    for (int i = 0; i < 4; ++i) dims[i] = t.extent(i);
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(cplx)));
  }
  if (!out) throw NumericalError("save_mpo: write failed for " + path.string());
}

MPO load_mpo(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NumericalError("load_mpo: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw NumericalError("load_mpo: bad magic in " + path.string());
  std::uint32_t L = 0, d = 0;
  std::int32_t has_center = 0, center = 0;
  MPO x;
  in.read(reinterpret_cast<char*>(&L), sizeof(L));
  in.read(reinterpret_cast<char*>(&d), sizeof(d));
  in.read(reinterpret_cast<char*>(&x.log_scale), sizeof(double));
  in.read(reinterpret_cast<char*>(&has_center), sizeof(has_center));
  in.read(reinterpret_cast<char*>(&center), sizeof(center));
  if (!in || L < 2 || d < 2) throw NumericalError("load_mpo: corrupt header");
  for (std::uint32_t s = 0; s < L; ++s) {
    std::uint64_t dims[4];
    in.read(reinterpret_cast<char*>(dims), sizeof(dims));
    if (!in) throw NumericalError("load_mpo: truncated file");
    DenseTensor t({dims[0], dims[1], dims[2], dims[3]});
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(cplx)));
    if (!in) throw NumericalError("load_mpo: truncated tensor data");
    x.sites.push_back(std::move(t));
  }
  if (has_center) x.center = center;
  check_chain(x);
  return x;
}

}  // namespace mpodyn

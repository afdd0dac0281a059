#include "mpodyn/xxz.hpp"

#include <string>

namespace mpodyn {

Eigen::Matrix2cd spin_z() {
  Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
  m(0, 0) = 0.5;
  m(1, 1) = -0.5;
  return m;
}

Eigen::Matrix2cd spin_plus() {
  Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
  m(0, 1) = 1.0;
  return m;
}

Eigen::Matrix2cd spin_minus() {
  Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
  m(1, 0) = 1.0;
  return m;
}

Eigen::Matrix2cd spin_x() { return 0.5 * (spin_plus() + spin_minus()); }

Eigen::Matrix2cd spin_y() {
  return cplx(0.0, -0.5) * (spin_plus() - spin_minus());
}

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

BondTerm bond_term(const XXZParams& p, int bond) {
  if (p.L < 2) throw DimensionError("bond_term: need L >= 2");
  if (bond < 0 || bond >= p.L - 1)
    throw DimensionError("bond_term: bond index " + std::to_string(bond) +
                         " out of range for L=" + std::to_string(p.L));
  const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
  Eigen::Matrix4cd m = kron(spin_x(), spin_x()) + kron(spin_y(), spin_y()) +
                       p.jz * kron(spin_z(), spin_z());
  const double w_left = (bond == 0) ? 1.0 : 0.5;
  const double w_right = (bond == p.L - 2) ? 1.0 : 0.5;
  m -= p.h * (w_left * kron(spin_z(), id) + w_right * kron(id, spin_z()));
  return BondTerm{bond, m};
}

MPO observable(const XXZParams& p, ObservableKind kind, std::optional<int> site) {
  switch (kind) {
    case ObservableKind::SpK0:
      return sum_local_mpo(p.L, p.d, spin_plus());
    case ObservableKind::SpLocal:
    case ObservableKind::SmLocal:
    case ObservableKind::SzLocal:
      break;
  }
  if (!site)
    throw DimensionError("observable: local operator kinds require a site index");
  switch (kind) {
    case ObservableKind::SpLocal:
      return single_site_mpo(p.L, p.d, *site, spin_plus());
    case ObservableKind::SmLocal:
      return single_site_mpo(p.L, p.d, *site, spin_minus());
    default:
      return single_site_mpo(p.L, p.d, *site, spin_z());
  }
}

std::pair<std::vector<int>, std::vector<int>> split_even_odd(const XXZParams& p) {
  if (p.L < 2) throw DimensionError("split_even_odd: need L >= 2");
  std::vector<int> odd, even;
  for (int i = 0; i < p.L - 1; ++i)
    (i % 2 == 0 ? odd : even).push_back(i);
  return {odd, even};
}

}  // namespace mpodyn

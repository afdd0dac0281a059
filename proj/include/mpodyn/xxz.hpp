#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mpodyn/mpo.hpp"

namespace mpodyn {

/// Spin-1/2 XXZ chain parameters. Couplings are in units of the transverse
/// exchange; open boundary conditions.
struct XXZParams {
  int L = 2;          // site count
  double jz = 1.0;    // anisotropy
  double h = 0.0;     // magnetic field
  static constexpr int d = 2;
};

/// Two-site Hamiltonian term for the bond (i, i+1), stored as a d^2 x d^2
/// Hermitian matrix in the (sigma_i * d + sigma_{i+1}) basis.
struct BondTerm {
  int bond = 0;
  Eigen::Matrix4cd matrix;
};

// Spin-1/2 operator matrices.
Eigen::Matrix2cd spin_z();
Eigen::Matrix2cd spin_plus();
Eigen::Matrix2cd spin_minus();
Eigen::Matrix2cd spin_x();
Eigen::Matrix2cd spin_y();

/// Bond term including the field share: -h S^z is split half-and-half onto
/// the two adjacent bonds, with the full share at the chain ends, so that the
/// bond terms sum exactly to the Hamiltonian.
BondTerm bond_term(const XXZParams& p, int bond);

enum class ObservableKind { SpLocal, SmLocal, SzLocal, SpK0 };

/// Observable operators as MPOs: local S^+/S^-/S^z embeddings, or the
/// k=0 spin raiser sum_i S^+_i.
MPO observable(const XXZParams& p, ObservableKind kind,
               std::optional<int> site = std::nullopt);

/// Disjoint partition of bond indices into the odd group {0, 2, ...} and the
/// even group {1, 3, ...}; terms within one group act on disjoint sites.
std::pair<std::vector<int>, std::vector<int>> split_even_odd(const XXZParams& p);

/// Kronecker product with row-major index convention (i1*d2 + i2).
Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);

}  // namespace mpodyn

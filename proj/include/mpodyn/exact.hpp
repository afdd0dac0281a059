#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "mpodyn/mpo.hpp"
#include "mpodyn/xxz.hpp"

namespace mpodyn {

/// Dense 2^L x 2^L operator for small-chain reference computations.
struct DenseOperator {
  Eigen::MatrixXcd matrix;
  int L = 0;
};

/// Default hard cap on dense chain length (2^L scaling).
inline constexpr int kDenseDefaultCap = 12;

/// op embedded at `site` of an L-site chain (identity elsewhere).
DenseOperator embed_site(int L, int site, const Eigen::Matrix2cd& op, int cap = kDenseDefaultCap);
/// Two-site operator embedded at (bond, bond+1).
DenseOperator embed_bond(int L, int bond, const Eigen::Matrix4cd& op, int cap = kDenseDefaultCap);

/// Dense Hamiltonian assembled as the exact sum of embedded bond terms.
DenseOperator dense_hamiltonian(const XXZParams& p, int cap = kDenseDefaultCap);

/// Contracts all MPO site tensors into a dense matrix (log_scale reapplied).
DenseOperator dense_reconstruct(const MPO& x, int cap = kDenseDefaultCap);

/// Exact-diagonalization reference: the eigendecomposition is computed once
/// per parameter set and cached across (beta, t) queries.
class ExactSolver {
 public:
  explicit ExactSolver(const XXZParams& p, int cap = kDenseDefaultCap);

  const XXZParams& params() const { return params_; }
  const Eigen::VectorXd& energies() const { return energies_; }
  const Eigen::MatrixXcd& vectors() const { return vectors_; }
  double ground_energy() const { return energies_(0); }

  double log_z(double beta) const;

  /// chi_AB(beta, t) = Tr(e^{-beta H} B(t) A) / Z via the eigenbasis double
  /// sum.
  cplx chi(const DenseOperator& a, const DenseOperator& b, double beta, double t) const;

  /// Same quantity through dense propagators U(t); independent code path used
  /// to cross-check `chi`.
  cplx chi_via_propagator(const DenseOperator& a, const DenseOperator& b, double beta,
                          double t) const;

  DenseOperator propagator(cplx tau) const;  // e^{-tau H}

 private:
  XXZParams params_;
  Eigen::VectorXd energies_;
  Eigen::MatrixXcd vectors_;
};

cplx exact_chi(const ExactSolver& solver, const DenseOperator& a, const DenseOperator& b,
               double beta, double t);

struct TrotterPlan;  // trotter.hpp

/// One Trotter step as a dense matrix (gate layers embedded and multiplied
/// exactly); used for the order-convergence checks.
DenseOperator dense_trotter_step(const XXZParams& p, const TrotterPlan& plan,
                                 int cap = kDenseDefaultCap);

}  // namespace mpodyn

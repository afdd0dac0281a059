#include "mpodyn/exact.hpp"

#include <cmath>
#include <string>

#include "mpodyn/trotter.hpp"

namespace mpodyn {

namespace {

void check_cap(int L, int cap) {
  if (L > cap) {
    const double gib = std::pow(4.0, L) * 16.0 / (1024.0 * 1024.0 * 1024.0);
    throw DimensionError("dense operator for L=" + std::to_string(L) +
                         " exceeds cap " + std::to_string(cap) + " (would need ~" +
                         std::to_string(gib) + " GiB)");
  }
}

Eigen::MatrixXcd identity_dense(int dim) { return Eigen::MatrixXcd::Identity(dim, dim); }

}  // namespace

DenseOperator embed_site(int L, int site, const Eigen::Matrix2cd& op, int cap) {
  check_cap(L, cap);
  if (site < 0 || site >= L) throw DimensionError("embed_site: site out of range");
  Eigen::MatrixXcd m = identity_dense(1);
  for (int i = 0; i < L; ++i)
    m = kron(m, i == site ? Eigen::MatrixXcd(op) : Eigen::MatrixXcd(identity_dense(2)));
  return {std::move(m), L};
}

DenseOperator embed_bond(int L, int bond, const Eigen::Matrix4cd& op, int cap) {
  check_cap(L, cap);
  if (bond < 0 || bond >= L - 1) throw DimensionError("embed_bond: bond out of range");
  Eigen::MatrixXcd m = identity_dense(1);
  for (int i = 0; i < L; ++i) {
    if (i == bond) {
      m = kron(m, op);
      ++i;
    } else {
      m = kron(m, identity_dense(2));
    }
  }
  return {std::move(m), L};
}

DenseOperator dense_hamiltonian(const XXZParams& p, int cap) {
  check_cap(p.L, cap);
  const int dim = 1 << p.L;
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
  for (int bond = 0; bond < p.L - 1; ++bond)
    h += embed_bond(p.L, bond, bond_term(p, bond).matrix, cap).matrix;
  return {std::move(h), p.L};
}

DenseOperator dense_reconstruct(const MPO& x, int cap) {
  const int L = x.length();
  check_cap(L, cap);
  // Accumulate (rows, cols, bond) left to right.
  DenseTensor acc({1, 1, 1});
  acc.at({0, 0, 0}) = 1.0;
  for (const DenseTensor& site : x.sites) {
    DenseTensor next = contract(acc, {2}, site, {0});  // (r, c, s, s', b)
    next = next.permuted({0, 2, 1, 3, 4});
    const auto& s = next.shape();
    acc = next.reshaped({s[0] * s[1], s[2] * s[3], s[4]});
  }
  const int dim = 1 << L;
  Eigen::MatrixXcd m(dim, dim);
  const double scale = std::exp(x.log_scale);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c)
      m(r, c) = acc.at({static_cast<std::size_t>(r), static_cast<std::size_t>(c), 0}) *
                scale;
  return {std::move(m), L};
}

ExactSolver::ExactSolver(const XXZParams& p, int cap) : params_(p) {
  DenseOperator h = dense_hamiltonian(p, cap);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(h.matrix);
  if (eig.info() != Eigen::Success)
    throw NumericalError("ExactSolver: eigendecomposition failed");
  energies_ = eig.eigenvalues();
  vectors_ = eig.eigenvectors();
}

double ExactSolver::log_z(double beta) const {
  // Z = e^{-beta E0} sum_m e^{-beta (E_m - E0)}.
  const double e0 = energies_(0);
  double acc = 0.0;
  for (Eigen::Index m = 0; m < energies_.size(); ++m)
    acc += std::exp(-beta * (energies_(m) - e0));
  return -beta * e0 + std::log(acc);
}

cplx ExactSolver::chi(const DenseOperator& a, const DenseOperator& b, double beta,
                      double t) const {
  if (a.L != params_.L || b.L != params_.L)
    throw DimensionError("exact chi: operator length mismatch");
  const Eigen::Index dim = energies_.size();
  const double e0 = energies_(0);
  const Eigen::MatrixXcd abar = vectors_.adjoint() * a.matrix * vectors_;
  const Eigen::MatrixXcd bbar = vectors_.adjoint() * b.matrix * vectors_;

  // chi = sum_{mn} w_m e^{i(E_m - E_n)t} B_{mn} A_{nm} / Z'
  //     = u^T (B .* A^T) v with u_m = w_m e^{iE_m t}, v_n = e^{-iE_n t}.
  Eigen::VectorXcd u(dim), v(dim);
  double zshift = 0.0;
  for (Eigen::Index m = 0; m < dim; ++m) {
    const double w = std::exp(-beta * (energies_(m) - e0));
    zshift += w;
    u(m) = w * std::exp(cplx(0.0, energies_(m) * t));
    v(m) = std::exp(cplx(0.0, -energies_(m) * t));
  }
  const Eigen::MatrixXcd prod = bbar.cwiseProduct(abar.transpose());
  const cplx num = u.transpose() * prod * v;
  return num / zshift;
}

cplx ExactSolver::chi_via_propagator(const DenseOperator& a, const DenseOperator& b,
                                     double beta, double t) const {
  const Eigen::Index dim = energies_.size();
  const double e0 = energies_(0);
  Eigen::VectorXd w(dim);
  Eigen::VectorXcd phase(dim);
  for (Eigen::Index m = 0; m < dim; ++m) {
    w(m) = std::exp(-beta * (energies_(m) - e0));
    phase(m) = std::exp(cplx(0.0, -energies_(m) * t));
  }
  const Eigen::MatrixXcd ut = vectors_ * phase.asDiagonal() * vectors_.adjoint();
  const Eigen::MatrixXcd rho = vectors_ * w.cast<cplx>().asDiagonal() * vectors_.adjoint();
  const Eigen::MatrixXcd bt = ut.adjoint() * b.matrix * ut;
  return (rho * bt * a.matrix).trace() / w.sum();
}

DenseOperator ExactSolver::propagator(cplx tau) const {
  const Eigen::Index dim = energies_.size();
  Eigen::VectorXcd f(dim);
  for (Eigen::Index m = 0; m < dim; ++m) f(m) = std::exp(-tau * energies_(m));
  Eigen::MatrixXcd u = vectors_ * f.asDiagonal() * vectors_.adjoint();
  return {std::move(u), params_.L};
}

cplx exact_chi(const ExactSolver& solver, const DenseOperator& a, const DenseOperator& b,
               double beta, double t) {
  return solver.chi(a, b, beta, t);
}

DenseOperator dense_trotter_step(const XXZParams& p, const TrotterPlan& plan, int cap) {
  check_cap(p.L, cap);
  const int dim = 1 << p.L;
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(dim, dim);
  for (const GateLayer& layer : plan.layers) {
    Eigen::MatrixXcd lmat = Eigen::MatrixXcd::Identity(dim, dim);
    for (std::size_t g = 0; g < layer.bonds.size(); ++g)
      lmat = embed_bond(p.L, layer.bonds[g], layer.gates[g], cap).matrix * lmat;
    u = lmat * u;  // layers are stored in ket-application order
  }
  return {std::move(u), p.L};
}

}  // namespace mpodyn

#include "mpodyn/trotter.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <string>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace mpodyn {

namespace {

struct BondEig {
  Eigen::Matrix4cd vectors;
  Eigen::Vector4d values;
};

Eigen::Matrix4cd stage_gate(const BondEig& eig, cplx exponent) {
  Eigen::Vector4cd f;
  for (int k = 0; k < 4; ++k) f(k) = std::exp(-exponent * eig.values(k));
  return eig.vectors * f.asDiagonal() * eig.vectors.adjoint();
}

}  // namespace

TrotterPlan build_plan(const XXZParams& p, int order, cplx dtau) {
  if (order != 2 && order != 4)
    throw DimensionError("build_plan: unsupported Trotter order " + std::to_string(order));
  TrotterPlan plan;
  plan.order = order;
  plan.dtau = dtau;
  plan.L = p.L;
  plan.d = p.d;
  if (order == 2) {
    plan.stages = 1;
    plan.coeffs_a = {0.5, 0.5};
    plan.coeffs_b = {1.0};
  } else {
    // Five-stage symmetric Suzuki composition of the leapfrog step,
    // s2(w) s2(w) s2(x) s2(w) s2(w) with x = 1 - 4w, merged into the
    // alternating odd/even form.
    const double w = 1.0 / (4.0 - std::cbrt(4.0));
    const double x = 1.0 - 4.0 * w;
    plan.stages = 5;
    plan.coeffs_a = {w / 2.0, w, (w + x) / 2.0, (w + x) / 2.0, w, w / 2.0};
    plan.coeffs_b = {w, w, x, w, w};
  }

  // Eigendecompose each distinct bond term once; bulk bonds share their term.
  std::vector<BondEig> eigs;
  std::vector<int> eig_of_bond(p.L - 1, -1);
  std::vector<Eigen::Matrix4cd> terms;
  for (int bond = 0; bond < p.L - 1; ++bond) {
    const Eigen::Matrix4cd h = bond_term(p, bond).matrix;
    for (std::size_t k = 0; k < terms.size(); ++k)
      if ((terms[k] - h).cwiseAbs().maxCoeff() == 0.0) {
        eig_of_bond[bond] = static_cast<int>(k);
        break;
      }
    if (eig_of_bond[bond] < 0) {
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> solver(h);
      if (solver.info() != Eigen::Success)
        throw NumericalError("build_plan: bond term eigendecomposition failed");
      terms.push_back(h);
      eigs.push_back({solver.eigenvectors(), solver.eigenvalues()});
      eig_of_bond[bond] = static_cast<int>(terms.size()) - 1;
    }
  }

  const auto [odd_bonds, even_bonds] = split_even_odd(p);
  const int m = plan.stages;
  for (int k = 0; k < 2 * m + 1; ++k) {
    GateLayer layer;
    layer.odd_bonds = (k % 2 == 0);
    layer.coeff = layer.odd_bonds ? plan.coeffs_a[k / 2] : plan.coeffs_b[(k - 1) / 2];
    layer.bonds = layer.odd_bonds ? odd_bonds : even_bonds;
    const cplx exponent = layer.coeff * dtau;
    std::vector<Eigen::Matrix4cd> cache(eigs.size());
    std::vector<bool> have(eigs.size(), false);
    for (int bond : layer.bonds) {
      const int e = eig_of_bond[bond];
      if (!have[e]) {
        cache[e] = stage_gate(eigs[e], exponent);
        have[e] = true;
      }
      layer.gates.push_back(cache[e]);
      layer.gates_dagger.push_back(cache[e].adjoint());
    }
    plan.layers.push_back(std::move(layer));
  }
  return plan;
}

void EvolutionLog::write_jsonl(std::ostream& out, const char* phase) const {
  for (const StepRecord& rec : steps) {
    nlohmann::json j;
    if (phase) j["phase"] = phase;
    j["step"] = rec.step;
    j["epsilon"] = epsilon;
    double max_w = 0.0;
    for (double w : rec.bond_weights) max_w = std::max(max_w, w);
    j["max_weight"] = max_w;
    j["weights"] = rec.bond_weights;
    j["bond_dims"] = rec.profile.dims;
    j["wall_seconds"] = rec.wall_seconds;
    out << j.dump() << '\n';
  }
}

double per_svd_epsilon(const TrotterPlan& plan, double eps_step) {
  std::size_t n = 0;
  for (const GateLayer& layer : plan.layers) n += layer.bonds.size();
  if (n == 0) return eps_step;
  return eps_step / (static_cast<double>(n) * static_cast<double>(n));
}

EvolveResult evolve(MPO x, const TrotterPlan& plan, EvolveSide side, int steps,
                    double epsilon, std::optional<int> max_rank, EvolutionLog* log) {
  if (x.length() != plan.L || x.phys_dim() != plan.d)
    throw DimensionError("evolve: plan and MPO lattice mismatch");
  if (log) log->epsilon = epsilon;
  const double eps_svd = per_svd_epsilon(plan, epsilon);

  EvolveResult result;
  result.steps_completed = 0;
  const int n_layers = static_cast<int>(plan.layers.size());

  for (int step = 0; step < steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> weights(plan.L - 1, 0.0);
    bool saturated = false;

    for (int li = 0; li < n_layers; ++li) {
      const GateLayer& layer =
          plan.layers[side == EvolveSide::Right ? n_layers - 1 - li : li];
      if (layer.bonds.empty()) continue;

      // Sweep toward whatever end is closer to the current center.
      bool left_to_right = true;
      if (x.center && *x.center > (layer.bonds.front() + layer.bonds.back()) / 2)
        left_to_right = false;

      const int n_gates = static_cast<int>(layer.bonds.size());
      for (int gi = 0; gi < n_gates; ++gi) {
        const int g = left_to_right ? gi : n_gates - 1 - gi;
        const int bond = layer.bonds[g];
        const Eigen::Matrix4cd* out = nullptr;
        const Eigen::Matrix4cd* in = nullptr;
        switch (side) {
          case EvolveSide::Left:
            out = &layer.gates[g];
            break;
          case EvolveSide::Right:
            in = &layer.gates[g];
            break;
          case EvolveSide::Conjugate:
            out = &layer.gates[g];
            in = &layer.gates_dagger[g];
            break;
        }
        const TruncationInfo info = detail::apply_gate_in_place(
            x, bond, out, in, eps_svd, max_rank, left_to_right);
        weights[bond] = std::max(weights[bond], info.weight);
        saturated = saturated || info.saturated;
      }
      detail::rebalance_log_scale(x);
    }

    result.steps_completed = step + 1;
    if (log) {
      StepRecord rec;
      rec.step = step + 1;
      rec.bond_weights = std::move(weights);
      rec.profile = bond_profile(x);
      rec.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      log->steps.push_back(std::move(rec));
    }
    if (saturated) {
      result.cap_exceeded = true;
      break;
    }
  }
  result.mpo = std::move(x);
  return result;
}

MPO thermal_half(const XXZParams& p, double beta, double dbeta, double epsilon_beta,
                 int order, EvolutionLog* log, std::optional<int> max_rank) {
  if (beta < 0.0) throw DimensionError("thermal_half: beta must be non-negative");
  MPO x = identity_mpo(p.L, p.d);
  if (beta == 0.0) return x;
  if (dbeta <= 0.0) throw DimensionError("thermal_half: dbeta must be positive");
  const double ratio = beta / dbeta;
  const int steps = static_cast<int>(std::lround(ratio));
  if (steps < 1 || std::abs(ratio - steps) > 1e-12 * std::max(1.0, ratio))
    throw DimensionError("thermal_half: dbeta does not divide beta");
  // Each step applies e^{-(dbeta/2) H}; the product over beta/dbeta steps is
  // e^{-beta H / 2}.
  const TrotterPlan plan = build_plan(p, order, cplx(dbeta / 2.0, 0.0));
  EvolveResult r = evolve(std::move(x), plan, EvolveSide::Left, steps, epsilon_beta,
                          max_rank, log);
  if (r.cap_exceeded)
    throw NumericalError("thermal_half: bond cap exceeded at step " +
                         std::to_string(r.steps_completed));
  return std::move(r.mpo);
}

}  // namespace mpodyn

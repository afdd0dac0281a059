#pragma once

#include <complex>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "mpodyn/mpo.hpp"
#include "mpodyn/xxz.hpp"

namespace mpodyn {

/// One alternating odd/even gate layer of a Trotter-Suzuki step.
struct GateLayer {
  bool odd_bonds = true;   // acts on bonds {0,2,...} if true, {1,3,...} else
  double coeff = 0.0;      // stage coefficient multiplying dtau
  std::vector<int> bonds;  // ascending
  std::vector<Eigen::Matrix4cd> gates;          // exp(-coeff dtau h_i), per bond
  std::vector<Eigen::Matrix4cd> gates_dagger;   // adjoints, for conjugation
};

/// Precomputed gate circuit for one step of e^{-dtau H}, decomposed as
/// A(a_1) B(b_1) ... A(a_{m+1}) with A acting on odd bonds and B on even
/// bonds; `layers` holds the 2m+1 factors in the order they are applied to a
/// ket (rightmost factor first).
struct TrotterPlan {
  int order = 2;
  int stages = 1;
  std::vector<double> coeffs_a;  // m+1 values, sum 1
  std::vector<double> coeffs_b;  // m values, sum 1
  cplx dtau{0.0, 0.0};
  int L = 0;
  int d = 2;
  std::vector<GateLayer> layers;
};

/// Builds the gate plan for e^{-dtau H}: dtau real for imaginary time,
/// +i dt / -i dt for forward/backward real time. Order 2 is the leapfrog
/// (m=1) decomposition; order 4 the five-stage symmetric Suzuki composition.
TrotterPlan build_plan(const XXZParams& p, int order, cplx dtau);

/// Per-step evolution record.
struct StepRecord {
  int step = 0;
  std::vector<double> bond_weights;  // realized truncation weight per bond (max over layers)
  BondProfile profile;               // after the step
  double wall_seconds = 0.0;
};

struct EvolutionLog {
  double epsilon = 0.0;
  std::vector<StepRecord> steps;

  /// Line-delimited JSON records for external analysis; `phase` labels the
  /// records when several logs share one stream.
  void write_jsonl(std::ostream& out, const char* phase = nullptr) const;
};

enum class EvolveSide { Left, Right, Conjugate };

struct EvolveResult {
  MPO mpo;
  bool cap_exceeded = false;
  int steps_completed = 0;
};

/// Per-SVD truncation bound that guarantees a total per-step truncation
/// weight of at most eps_step: with N gate SVDs per step, the step's relative
/// error is bounded by the sum of the per-SVD amplitudes sqrt(w_i), so
/// w_i <= eps_step / N^2 keeps the squared step error within eps_step.
double per_svd_epsilon(const TrotterPlan& plan, double eps_step);

/// Applies `steps` full Trotter steps to x. Left multiplies U x, Right x U,
/// Conjugate U x U^dag (each layer is applied on both sides before the one
/// truncation of the touched bond). `epsilon` bounds the truncation weight
/// per time step (allocated across the step's SVDs via per_svd_epsilon).
/// When max_rank forces a bond to miss its bound, evolution stops at the end
/// of that step and the partial result is returned with cap_exceeded set and
/// steps_completed reporting the step reached.
EvolveResult evolve(MPO x, const TrotterPlan& plan, EvolveSide side, int steps,
                    double epsilon, std::optional<int> max_rank = std::nullopt,
                    EvolutionLog* log = nullptr);

/// MPO approximation of e^{-beta H / 2}, built by left-evolving the identity
/// in imaginary time with steps of e^{-(dbeta/2) H}.
MPO thermal_half(const XXZParams& p, double beta, double dbeta, double epsilon_beta,
                 int order, EvolutionLog* log = nullptr,
                 std::optional<int> max_rank = std::nullopt);

}  // namespace mpodyn

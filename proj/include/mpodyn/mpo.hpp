#pragma once

#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mpodyn/tensor.hpp"

namespace mpodyn {

/// Bond dimensions M_0..M_L of an MPO; M_0 = M_L = 1 always.
struct BondProfile {
  std::vector<int> dims;

  int length() const { return static_cast<int>(dims.size()) - 1; }
  int max_dim() const;
  bool operator==(const BondProfile&) const = default;
};

/// Matrix product operator on a chain of L sites with local dimension d.
///
/// Site tensors carry axes (left bond, sigma out, sigma in, right bond); the
/// represented operator is exp(log_scale) times the contraction of the site
/// tensors. Magnitudes factored out during evolution accumulate in log_scale
/// so that entries stay O(1) even when the operator norm spans hundreds of
/// orders of magnitude.
///
/// `center`, when set, marks a site such that all tensors to its left are
/// left-isometric and all tensors to its right are right-isometric.
class MPO {
 public:
  std::vector<DenseTensor> sites;
  double log_scale = 0.0;
  std::optional<int> center;

  int length() const { return static_cast<int>(sites.size()); }
  int phys_dim() const { return sites.empty() ? 0 : static_cast<int>(sites[0].extent(1)); }
};

MPO identity_mpo(int L, int d);
MPO single_site_mpo(int L, int d, int site, const Eigen::MatrixXcd& op);
MPO sum_local_mpo(int L, int d, const Eigen::MatrixXcd& op);
/// d^2 x d^2 operator embedded at sites (bond, bond+1), identity elsewhere.
MPO two_site_mpo(int L, int d, int bond, const Eigen::MatrixXcd& op);

BondProfile bond_profile(const MPO& x);

/// Conjugate transpose; swaps the physical axes and conjugates entries.
MPO dagger(const MPO& x);

/// log of the Schatten 2-norm sqrt(Tr x^dag x), evaluated by a transfer
/// contraction with per-site rescaling (never forms dense objects).
double log_schatten2_norm(const MPO& x);

/// Schatten 2-norm including the log_scale factor. Throws NumericalError when
/// the result overflows double precision (log_scale rebalancing required).
double schatten2_norm(const MPO& x);

/// A complex value carried as mantissa * exp(log_mag), for traces of
/// operators whose magnitude can over- or underflow.
struct ScaledValue {
  cplx mantissa{0.0, 0.0};
  double log_mag = 0.0;

  cplx value() const;
  double log_abs() const;
};

/// Tr(y * b * x) with all log_scales folded into the returned magnitude.
ScaledValue hs_trace_scaled(const MPO& y, const MPO& b, const MPO& x);
/// Tr(y * x).
ScaledValue hs_trace_scaled(const MPO& y, const MPO& x);

cplx hs_trace(const MPO& y, const MPO& b, const MPO& x);
cplx hs_trace(const MPO& y, const MPO& x);

/// Exact operator product a * b (no truncation; bond dimensions multiply).
MPO mpo_multiply(const MPO& a, const MPO& b);

/// Gauge transformation into mixed-canonical form about the given center
/// site. The represented operator and its norm are unchanged; bonds whose
/// extent exceeds the maximal possible rank shrink to it.
MPO canonicalize(MPO x, int center);

enum class GateSide { Left, Right };

struct TruncationInfo {
  double weight = 0.0;  // realized discarded weight at the touched bond
  int rank = 1;         // retained bond dimension
  bool saturated = false;  // epsilon was not reachable within max_rank
};

/// Applies a d^2 x d^2 gate to sites (bond, bond+1), multiplying onto the
/// sigma (Left) or sigma' (Right) indices, then re-splits the pair with one
/// truncated SVD. Only the touched bond changes.
std::pair<MPO, TruncationInfo> apply_two_site_gate(
    MPO x, int bond, const Eigen::Matrix4cd& gate, GateSide side, double epsilon,
    std::optional<int> max_rank = std::nullopt);

/// One SVD-truncation sweep at the given tolerance.
std::pair<MPO, std::vector<TruncationInfo>> compress(
    MPO x, double epsilon, std::optional<int> max_rank = std::nullopt);

/// Binary container round-trip used for checkpointing long evolutions.
void save_mpo(const MPO& x, const std::filesystem::path& path);
MPO load_mpo(const std::filesystem::path& path);

namespace detail {

/// In-place core used by the evolution loop; `gate_out` multiplies the sigma
/// indices, `gate_in` the sigma' indices (either may be null). `move_right`
/// selects where the singular values are absorbed and hence where the
/// canonical center lands (bond+1 if true, bond otherwise).
TruncationInfo apply_gate_in_place(MPO& x, int bond, const Eigen::Matrix4cd* gate_out,
                                   const Eigen::Matrix4cd* gate_in, double epsilon,
                                   std::optional<int> max_rank, bool move_right);

void ensure_center(MPO& x, int site);
void shift_center_right(MPO& x);
void shift_center_left(MPO& x);

/// Divides the center tensor by its Frobenius norm, accumulating the factor
/// into log_scale. Requires a canonical center.
void rebalance_log_scale(MPO& x);

}  // namespace detail

}  // namespace mpodyn

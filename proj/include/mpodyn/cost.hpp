#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mpodyn/mpo.hpp"

namespace mpodyn {

/// Cost snapshot of one MPO at one (beta, t) grid point.
struct CostRecord {
  double beta = 0.0;
  double t = 0.0;
  long long sum_m3 = 0;  // sum_i M_i^3
  int max_m = 1;
  BondProfile profile;
  std::string branch;
};

CostRecord make_cost_record(double beta, double t, const MPO& x, std::string branch);

/// sum_{i=1..L} M_i^3 with M_i the right bond of site i (M_L = 1 contributes 1).
long long step_cost(const BondProfile& p);
long long step_cost(const MPO& x);

/// sum_{i=1..L} max(M_i M'_i^2, M_i^2 M'_i) over aligned profiles.
long long pair_cost(const BondProfile& a, const BondProfile& b);
long long pair_cost(const MPO& x, const MPO& y);

/// Rectangular (beta, t) grid of cost records for one scheme.
struct CostMap {
  std::string scheme;
  std::vector<double> betas;
  std::vector<std::vector<CostRecord>> rows;  // rows[i] sampled at betas[i], t ascending
};

/// Per beta row: the largest time whose per-step cost stays within budget,
/// linearly interpolated in t between the last sample within budget and the
/// first sample beyond it.
std::vector<std::pair<double, double>> tmax_contour(const CostMap& map, long long budget);

/// Outermost bonds whose dimension exceeds the base profile by more than
/// `tolerance`, per time sample; -1 marks an empty cone.
struct LightconeFrontier {
  std::vector<double> times;
  std::vector<int> left;
  std::vector<int> right;

  bool empty_at(std::size_t k) const { return left[k] < 0; }
};

LightconeFrontier lightcone_extent(std::span<const BondProfile> profiles,
                                   std::span<const double> times,
                                   const BondProfile& base, int tolerance);

/// Least-squares slope of the cone radius max(right - origin, origin - left)
/// over time, fitted through the samples with a non-empty cone.
struct VelocityFit {
  double velocity = 0.0;
  double intercept = 0.0;
  int samples = 0;
};

VelocityFit fit_frontier_velocity(const LightconeFrontier& frontier, int origin_bond);

void write_costmap_csv(const CostMap& map, std::ostream& out);
void write_contour_csv(const std::string& scheme, long long budget,
                       std::span<const std::pair<double, double>> contour,
                       std::ostream& out);

}  // namespace mpodyn

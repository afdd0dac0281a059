#include "mpodyn/cost.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

namespace mpodyn {

CostRecord make_cost_record(double beta, double t, const MPO& x, std::string branch) {
  CostRecord rec;
  rec.beta = beta;
  rec.t = t;
  rec.profile = bond_profile(x);
  rec.sum_m3 = step_cost(rec.profile);
  rec.max_m = rec.profile.max_dim();
  rec.branch = std::move(branch);
  return rec;
}

long long step_cost(const BondProfile& p) {
  long long acc = 0;
  for (std::size_t i = 1; i < p.dims.size(); ++i) {
    const long long m = p.dims[i];
    acc += m * m * m;
  }
  return acc;
}

long long step_cost(const MPO& x) { return step_cost(bond_profile(x)); }

long long pair_cost(const BondProfile& a, const BondProfile& b) {
  if (a.dims.size() != b.dims.size())
    throw DimensionError("pair_cost: profiles of different length");
  long long acc = 0;
  for (std::size_t i = 1; i < a.dims.size(); ++i) {
    const long long m = a.dims[i], mp = b.dims[i];
    acc += std::max(m * mp * mp, m * m * mp);
  }
  return acc;
}

long long pair_cost(const MPO& x, const MPO& y) {
  return pair_cost(bond_profile(x), bond_profile(y));
}

std::vector<std::pair<double, double>> tmax_contour(const CostMap& map, long long budget) {
  std::vector<std::pair<double, double>> out;
  for (std::size_t r = 0; r < map.betas.size(); ++r) {
    const auto& row = map.rows[r];
    if (row.empty()) continue;
    double tmax = 0.0;
    if (row.front().sum_m3 > budget) {
      tmax = 0.0;
    } else {
      std::size_t last = 0;
      for (std::size_t k = 0; k < row.size(); ++k)
        if (row[k].sum_m3 <= budget) last = k;
      if (last + 1 >= row.size()) {
        tmax = row.back().t;  // budget never exceeded on the sampled grid
      } else {
        const double t0 = row[last].t, t1 = row[last + 1].t;
        const double c0 = static_cast<double>(row[last].sum_m3);
        const double c1 = static_cast<double>(row[last + 1].sum_m3);
        tmax = c1 > c0 ? t0 + (static_cast<double>(budget) - c0) * (t1 - t0) / (c1 - c0)
                       : t1;
      }
    }
    out.emplace_back(map.betas[r], tmax);
  }
  return out;
}

LightconeFrontier lightcone_extent(std::span<const BondProfile> profiles,
                                   std::span<const double> times,
                                   const BondProfile& base, int tolerance) {
  if (profiles.size() != times.size())
    throw DimensionError("lightcone_extent: profiles/times length mismatch");
  LightconeFrontier f;
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    const BondProfile& p = profiles[k];
    if (p.dims.size() != base.dims.size())
      throw DimensionError("lightcone_extent: profile length mismatch");
    int left = -1, right = -1;
    for (std::size_t i = 1; i + 1 < p.dims.size(); ++i) {
      if (p.dims[i] > base.dims[i] + tolerance) {
        if (left < 0) left = static_cast<int>(i);
        right = static_cast<int>(i);
      }
    }
    f.times.push_back(times[k]);
    f.left.push_back(left);
    f.right.push_back(right);
  }
  return f;
}

VelocityFit fit_frontier_velocity(const LightconeFrontier& frontier, int origin_bond) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t k = 0; k < frontier.times.size(); ++k) {
    if (frontier.empty_at(k)) continue;
    const double radius = std::max(frontier.right[k] - origin_bond,
                                   origin_bond - frontier.left[k]);
    const double t = frontier.times[k];
    sx += t;
    sy += radius;
    sxx += t * t;
    sxy += t * radius;
    ++n;
  }
  VelocityFit fit;
  fit.samples = n;
  if (n >= 2 && sxx * n - sx * sx > 0) {
    fit.velocity = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    fit.intercept = (sy - fit.velocity * sx) / n;
  }
  return fit;
}

void write_costmap_csv(const CostMap& map, std::ostream& out) {
  out << "beta,t,scheme,sum_M3,max_M\n";
  char buf[128];
  for (std::size_t r = 0; r < map.betas.size(); ++r)
    for (const CostRecord& rec : map.rows[r]) {
      std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%s,%lld,%d\n", map.betas[r], rec.t,
                    map.scheme.c_str(), rec.sum_m3, rec.max_m);
      out << buf;
    }
}

void write_contour_csv(const std::string& scheme, long long budget,
                       std::span<const std::pair<double, double>> contour,
                       std::ostream& out) {
  out << "scheme,budget,beta,t_max\n";
  char buf[128];
  for (const auto& [beta, tmax] : contour) {
    std::snprintf(buf, sizeof(buf), "%s,%lld,%.12g,%.12g\n", scheme.c_str(), budget,
                  beta, tmax);
    out << buf;
  }
}

}  // namespace mpodyn

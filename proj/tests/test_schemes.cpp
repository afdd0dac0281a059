#include "mpodyn/schemes.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "mpodyn/exact.hpp"

using namespace mpodyn;

namespace {

EvolutionSettings fast_settings() {
  EvolutionSettings s;
  s.order = 4;
  s.dbeta = 1.0 / 16.0;
  s.dt = 1.0 / 16.0;
  s.eps_beta = 1e-12;
  s.eps_t = 1e-10;
  return s;
}

double max_series_dev(const ResponseSeries& a, const ResponseSeries& b) {
  EXPECT_EQ(a.times.size(), b.times.size());
  double dev = 0.0;
  for (std::size_t k = 0; k < a.times.size(); ++k)
    dev = std::max(dev, std::abs(a.values[k] - b.values[k]));
  return dev;
}

double max_oracle_dev(const ResponseSeries& series, const ExactSolver& exact,
                      const DenseOperator& a, const DenseOperator& b) {
  double dev = 0.0;
  for (std::size_t k = 0; k < series.times.size(); ++k)
    dev = std::max(dev, std::abs(series.values[k] -
                                 exact.chi(a, b, series.beta, series.times[k])));
  return dev;
}

}  // namespace

TEST(PartitionFunction, InfiniteTemperatureAndOracle) {
  const XXZParams p{6, 1.0, 0.0};
  EXPECT_NEAR(partition_function(identity_mpo(p.L, p.d)), p.L * std::log(2.0), 1e-12);

  ExactSolver exact(p);
  const MPO th = thermal_half(p, 2.0, 1.0 / 32.0, 1e-12, 4);
  EXPECT_NEAR(partition_function(th), exact.log_z(2.0), 1e-6);
}

TEST(PartitionFunction, ShiftedMonotonicity) {
  // log Z_beta itself can grow (ground energy is negative); the shifted
  // log Z_beta + beta E_0 = log sum_m e^{-beta(E_m - E_0)} strictly decreases.
  const XXZParams p{6, 1.0, 0.0};
  ExactSolver exact(p);
  const double e0 = exact.ground_energy();
  double prev = p.L * std::log(2.0);  // beta = 0 value of the shifted quantity
  for (double beta : {0.5, 1.0, 2.0}) {
    const MPO th = thermal_half(p, beta, 1.0 / 32.0, 1e-12, 4);
    const double log_z = partition_function(th);
    EXPECT_NEAR(log_z, exact.log_z(beta), 1e-6);
    const double shifted = log_z + beta * e0;
    EXPECT_LT(shifted, prev);
    prev = shifted;
  }
}

TEST(Schemes, IdentityOperatorsGiveUnity) {
  const XXZParams p{4, 1.0, 0.0};
  const MPO id = identity_mpo(p.L, p.d);
  EvolutionSettings s = fast_settings();
  for (auto spec : {SchemeSpec::scheme_a(), SchemeSpec::scheme_b(), SchemeSpec::scheme_c(),
                    SchemeSpec::custom(0.75, 0.0, 0.0)}) {
    const ResponseSeries series =
        general_scheme_series(p, id, id, spec, 0.75, 2.0 * s.dt, s);
    ASSERT_GE(series.times.size(), 1u);
    EXPECT_LT(std::abs(series.values[0] - cplx(1.0)), 1e-8) << spec.name();
  }
}

TEST(Schemes, StaticCorrelatorAtTimeZero) {
  const XXZParams p{6, 1.0, 0.0};
  ExactSolver exact(p);
  const MPO a = observable(p, ObservableKind::SpLocal, 3);
  const MPO b = observable(p, ObservableKind::SmLocal, 3);
  const DenseOperator ad = embed_site(p.L, 3, spin_plus());
  const DenseOperator bd = embed_site(p.L, 3, spin_minus());
  EvolutionSettings s = fast_settings();
  const double beta = 1.0;
  const cplx expect = exact.chi(ad, bd, beta, 0.0);
  for (auto spec : {SchemeSpec::scheme_a(), SchemeSpec::scheme_b(),
                    SchemeSpec::scheme_c(), SchemeSpec::custom(beta, 0.0, 0.0)}) {
    const ResponseSeries series = general_scheme_series(p, a, b, spec, beta, 0.0, s);
    ASSERT_EQ(series.times.size(), 1u);
    EXPECT_LT(std::abs(series.values[0] - expect), 1e-6) << spec.name();
  }
}

// Scheme equivalence plus oracle agreement on a reduced grid; the acceptance
// suite runs the full criterion-1 matrix.
TEST(Schemes, MutualAndOracleAgreement) {
  const XXZParams p{6, 1.0, 0.0};
  ExactSolver exact(p);
  const MPO a = observable(p, ObservableKind::SpLocal, 3);
  const MPO b = observable(p, ObservableKind::SmLocal, 3);
  const DenseOperator ad = embed_site(p.L, 3, spin_plus());
  const DenseOperator bd = embed_site(p.L, 3, spin_minus());
  EvolutionSettings s = fast_settings();
  const double beta = 0.5, tmax = 1.0;

  std::vector<ResponseSeries> all;
  for (auto spec : {SchemeSpec::scheme_a(), SchemeSpec::scheme_b(), SchemeSpec::scheme_c(),
                    SchemeSpec::custom(beta, 0.0, 0.0),
                    SchemeSpec::custom(beta / 2.0, 2.0 * s.dt, 2.0 * s.dt)}) {
    all.push_back(general_scheme_series(p, a, b, spec, beta, tmax, s));
    EXPECT_LT(max_oracle_dev(all.back(), exact, ad, bd), 1e-5) << spec.name();
  }
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j)
      EXPECT_LT(max_series_dev(all[i], all[j]), 1e-5)
          << all[i].scheme.name() << " vs " << all[j].scheme.name();
}

TEST(Schemes, AsymmetricCustomTimesMatchOracle) {
  const XXZParams p{5, 0.8, 0.0};
  ExactSolver exact(p);
  const MPO a = observable(p, ObservableKind::SpLocal, 2);
  const MPO b = observable(p, ObservableKind::SmLocal, 2);
  const DenseOperator ad = embed_site(p.L, 2, spin_plus());
  const DenseOperator bd = embed_site(p.L, 2, spin_minus());
  EvolutionSettings s = fast_settings();
  const double beta = 1.0;
  // t' != t'' exercises the full three-parameter family.
  const SchemeSpec spec = SchemeSpec::custom(0.25, 3.0 * s.dt, 1.0 * s.dt);
  const ResponseSeries series = general_scheme_series(p, a, b, spec, beta, 0.75, s);
  EXPECT_LT(max_oracle_dev(series, exact, ad, bd), 1e-5);
}

TEST(Schemes, PresetDispatchIsSamePath) {
  const XXZParams p{4, 1.0, 0.0};
  const MPO a = observable(p, ObservableKind::SpLocal, 2);
  const MPO b = observable(p, ObservableKind::SmLocal, 2);
  EvolutionSettings s = fast_settings();
  const ResponseSeries direct = scheme_b_series(p, a, b, 0.5, 0.5, s);
  const ResponseSeries via =
      general_scheme_series(p, a, b, SchemeSpec::scheme_b(), 0.5, 0.5, s);
  ASSERT_EQ(direct.times.size(), via.times.size());
  for (std::size_t k = 0; k < direct.times.size(); ++k)
    EXPECT_EQ(direct.values[k], via.values[k]);
}

TEST(SchemeC, SplitInvariance) {
  const XXZParams p{6, 1.0, 0.0};
  const MPO a = observable(p, ObservableKind::SpLocal, 3);
  const MPO b = observable(p, ObservableKind::SmLocal, 3);
  EvolutionSettings s = fast_settings();
  const double beta = 0.5, t = 11 * s.dt;  // odd grid: uneven balanced split
  const ResponseSeries balanced = scheme_c_series(p, a, b, beta, 6 * s.dt, 5 * s.dt, s);
  const ResponseSeries all_a = scheme_c_series(p, a, b, beta, t, 0.0, s);
  const ResponseSeries all_b = scheme_c_series(p, a, b, beta, 0.0, t, s);
  EXPECT_LT(max_series_dev(balanced, all_a), 1e-5);
  EXPECT_LT(max_series_dev(balanced, all_b), 1e-5);
}

TEST(Schemes, HermiticityRelationViaOracle) {
  // For B = A^dag: chi_AB(beta, t) = conj(chi_BA(beta, -t)); scheme on the
  // left, oracle on the right.
  const XXZParams p{6, 1.0, 0.0};
  ExactSolver exact(p);
  const MPO a = observable(p, ObservableKind::SpLocal, 3);
  const MPO b = observable(p, ObservableKind::SmLocal, 3);
  const DenseOperator ad = embed_site(p.L, 3, spin_plus());
  const DenseOperator bd = embed_site(p.L, 3, spin_minus());
  EvolutionSettings s = fast_settings();
  const double beta = 0.5;
  const ResponseSeries series = scheme_b_series(p, a, b, beta, 0.5, s);
  for (std::size_t k = 0; k < series.times.size(); ++k) {
    const cplx swapped = exact.chi(bd, ad, beta, -series.times[k]);
    EXPECT_LT(std::abs(series.values[k] - std::conj(swapped)), 1e-5);
  }
}

TEST(Schemes, EnergyConservationUnderConjugateEvolution) {
  // Tr(e^{-beta H} h_i(t)) / Z summed over bonds is t-independent.
  const XXZParams p{4, 1.0, 0.0};
  EvolutionSettings s = fast_settings();
  const double beta = 1.0, tmax = 0.5;
  const MPO id = identity_mpo(p.L, p.d);
  std::vector<ResponseSeries> per_bond;
  for (int bond = 0; bond < p.L - 1; ++bond) {
    const MPO hb = two_site_mpo(p.L, p.d, bond, bond_term(p, bond).matrix);
    per_bond.push_back(scheme_b_series(p, id, hb, beta, tmax, s));
  }
  const std::size_t n = per_bond[0].times.size();
  cplx e0 = 0;
  for (const auto& series : per_bond) e0 += series.values[0];
  for (std::size_t k = 1; k < n; ++k) {
    cplx ek = 0;
    for (const auto& series : per_bond) ek += series.values[k];
    EXPECT_LT(std::abs(ek - e0), 1e-6);
  }
}

TEST(Schemes, DeterministicReruns) {
  const XXZParams p{4, 1.0, 0.0};
  const MPO a = observable(p, ObservableKind::SpLocal, 2);
  const MPO b = observable(p, ObservableKind::SmLocal, 2);
  EvolutionSettings s = fast_settings();
  const ResponseSeries s1 = scheme_a_series(p, a, b, 0.5, 0.5, s);
  const ResponseSeries s2 = scheme_a_series(p, a, b, 0.5, 0.5, s);
  ASSERT_EQ(s1.times.size(), s2.times.size());
  for (std::size_t k = 0; k < s1.times.size(); ++k)
    EXPECT_EQ(s1.values[k], s2.values[k]);
  std::ostringstream o1, o2;
  write_series_csv(s1, o1);
  write_series_csv(s2, o2);
  EXPECT_EQ(o1.str(), o2.str());
}

TEST(Schemes, CapExceededTruncatesSeries) {
  const XXZParams p{6, 1.0, 0.0};
  const MPO a = observable(p, ObservableKind::SpLocal, 3);
  const MPO b = observable(p, ObservableKind::SmLocal, 3);
  EvolutionSettings s = fast_settings();
  s.max_rank = 2;
  // beta = 0 keeps the thermal stage trivial; real-time spreading then hits
  // the cap.
  const ResponseSeries series = scheme_b_series(p, a, b, 0.0, 2.0, s);
  EXPECT_TRUE(series.truncated);
  EXPECT_LT(series.t_reached(), 2.0);
}

TEST(Schemes, CheckpointResumeReproducesSeries) {
  const XXZParams p{4, 1.0, 0.0};
  const MPO a = observable(p, ObservableKind::SpLocal, 2);
  const MPO b = observable(p, ObservableKind::SmLocal, 2);
  EvolutionSettings s = fast_settings();
  const auto dir = std::filesystem::temp_directory_path() / "mpodyn_ckpt_test";
  std::filesystem::remove_all(dir);

  CheckpointIO ckpt{dir, 3, "tag-b-beta0.5"};
  const ResponseSeries full = scheme_b_series(p, a, b, 0.5, 1.0, s, nullptr, &ckpt);
  // The stored state sits at an intermediate sample; a fresh call resumes
  // from it and must land on the identical series.
  ASSERT_TRUE(std::filesystem::exists(dir / "checkpoint_state.json"));
  const ResponseSeries resumed = scheme_b_series(p, a, b, 0.5, 1.0, s, nullptr, &ckpt);
  ASSERT_EQ(full.times.size(), resumed.times.size());
  for (std::size_t k = 0; k < full.times.size(); ++k)
    EXPECT_EQ(full.values[k], resumed.values[k]);

  // A different tag must not resume; the run still completes correctly.
  CheckpointIO other{dir, 0, "different-tag"};
  const ResponseSeries fresh = scheme_b_series(p, a, b, 0.5, 1.0, s, nullptr, &other);
  EXPECT_LT(max_series_dev(full, fresh), 1e-12);
  std::filesystem::remove_all(dir);
}

TEST(OptimizeTmax, ConcaveAndDegenerate) {
  // Concave samples: optimum at beta/2.
  std::vector<double> grid, vals;
  for (double x = 0.0; x <= 4.0 + 1e-12; x += 0.25) {
    grid.push_back(x);
    vals.push_back(std::sqrt(x + 1.0));
  }
  const TmaxOptimum opt = optimize_tmax(grid, vals, 4.0);
  EXPECT_NEAR(opt.beta_prime, 2.0, 1e-12);
  EXPECT_NEAR(opt.t_sum, 2.0 * std::sqrt(3.0), 1e-12);

  // Linear samples: every split ties; tie-break returns beta/2.
  std::vector<double> lin;
  for (double x : grid) lin.push_back(0.7 * x);
  const TmaxOptimum flat = optimize_tmax(grid, lin, 4.0);
  EXPECT_NEAR(flat.beta_prime, 2.0, 1e-12);
}

TEST(OptimizeTmax, BimodalMatchesBruteForce) {
  std::vector<double> grid, vals;
  for (double x = 0.0; x <= 4.0 + 1e-12; x += 0.1) {
    grid.push_back(x);
    // Two humps: non-concave, optimum away from beta/2.
    vals.push_back(std::exp(-10.0 * (x - 0.5) * (x - 0.5)) +
                   std::exp(-10.0 * (x - 3.0) * (x - 3.0)));
  }
  const double beta = 3.5;
  const TmaxOptimum opt = optimize_tmax(grid, vals, beta);

  double best = -1.0, best_x = 0.0;
  for (double x = 0.0; x <= beta + 1e-12; x += 0.1 / 64.0) {
    auto interp = [&](double q) {
      q = std::clamp(q, grid.front(), grid.back());
      std::size_t hi = 1;
      while (hi + 1 < grid.size() && grid[hi] < q) ++hi;
      return vals[hi - 1] +
             (vals[hi] - vals[hi - 1]) * (q - grid[hi - 1]) / (grid[hi] - grid[hi - 1]);
    };
    const double v = interp(x) + interp(beta - x);
    if (v > best + 1e-12) {
      best = v;
      best_x = x;
    }
  }
  EXPECT_GT(std::abs(opt.beta_prime - beta / 2.0), 0.1);  // genuinely off-center
  EXPECT_NEAR(opt.t_sum, best, 1e-9);
  EXPECT_NEAR(opt.beta_prime, best_x, 0.1 / 32.0);
}

TEST(OptimizeTmax, RandomSetsAgainstGridOracle) {
  std::mt19937 rng(4242);
  std::uniform_real_distribution<double> ud(0.1, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> grid, vals;
    const int n = 17;
    const double beta = 4.0;
    for (int i = 0; i < n; ++i) {
      grid.push_back(beta * i / (n - 1));
      vals.push_back(ud(rng));
    }
    const TmaxOptimum opt = optimize_tmax(grid, vals, beta);
    // Exhaustive oracle over the sample grid (reflections land on the grid).
    double best = -1.0;
    double best_x = beta / 2.0;
    for (int i = 0; i < n; ++i) {
      const double v = vals[i] + vals[n - 1 - i];
      if (v > best + 1e-12 ||
          (std::abs(v - best) <= 1e-12 &&
           std::abs(grid[i] - beta / 2) < std::abs(best_x - beta / 2))) {
        best = v;
        best_x = grid[i];
      }
    }
    EXPECT_NEAR(opt.t_sum, best, 1e-12);
    EXPECT_NEAR(opt.beta_prime, best_x, 1e-12);
  }
}

TEST(OptimizeTmax, InsufficientSamplesThrow) {
  std::vector<double> grid{0.0}, vals{1.0};
  EXPECT_THROW(optimize_tmax(grid, vals, 1.0), DimensionError);
  std::vector<double> part{0.0, 0.5}, pv{1.0, 1.0};
  EXPECT_THROW(optimize_tmax(part, pv, 2.0), DimensionError);
}

TEST(SeriesCsv, ColumnsAndValues) {
  const XXZParams p{4, 1.0, 0.0};
  const MPO a = observable(p, ObservableKind::SpLocal, 2);
  const MPO b = observable(p, ObservableKind::SmLocal, 2);
  EvolutionSettings s = fast_settings();
  const ResponseSeries series = scheme_a_series(p, a, b, 0.5, 2 * s.dt, s);
  std::ostringstream os;
  write_series_csv(series, os);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, "beta,t,re_chi,im_chi,log_z,sum_M3_branchA,sum_M3_branchB,max_M");
  int rows = 0;
  std::string line;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 3);
}

#include "mpodyn/tensor.hpp"

#include <algorithm>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

using namespace mpodyn;

namespace {

std::mt19937 rng(20240811);

DenseTensor random_tensor(std::vector<std::size_t> shape) {
  std::normal_distribution<double> nd;
  DenseTensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = cplx(nd(rng), nd(rng));
  return t;
}

double max_abs_diff(const DenseTensor& a, const DenseTensor& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace

TEST(DenseTensor, ShapeAndIndexing) {
  DenseTensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  t.at({1, 2, 3}) = cplx(5, -1);
  EXPECT_EQ(t.at({1, 2, 3}), cplx(5, -1));
  EXPECT_THROW(t.at({2, 0, 0}), DimensionError);
  EXPECT_THROW(DenseTensor({2, 0}), DimensionError);
  EXPECT_THROW(DenseTensor({2, 2}, std::vector<cplx>(3)), DimensionError);
}

TEST(DenseTensor, PermuteRoundTrip) {
  DenseTensor t = random_tensor({3, 4, 5});
  DenseTensor p = t.permuted({2, 0, 1});
  EXPECT_EQ(p.shape(), (std::vector<std::size_t>{5, 3, 4}));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t k = 0; k < 5; ++k)
        EXPECT_EQ(p.at({k, i, j}), t.at({i, j, k}));
  DenseTensor back = p.permuted({1, 2, 0});
  EXPECT_EQ(max_abs_diff(back, t), 0.0);
}

TEST(Contract, IdentityTimesIdentity) {
  DenseTensor id({2, 2});
  id.at({0, 0}) = 1;
  id.at({1, 1}) = 1;
  DenseTensor prod = contract(id, {1}, id, {0});
  EXPECT_NEAR(std::abs(prod.at({0, 0}) - 1.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(prod.at({1, 1}) - 1.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(prod.at({0, 1})), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(prod.at({1, 0})), 0.0, 1e-15);
}

TEST(Contract, DotProduct) {
  DenseTensor a({2}, {cplx(1), cplx(2)});
  DenseTensor b({2}, {cplx(3), cplx(4)});
  DenseTensor s = contract(a, {0}, b, {0});
  EXPECT_EQ(s.rank(), 0u);
  EXPECT_EQ(s.size(), 1u);
  EXPECT_NEAR(std::abs(s.data()[0] - cplx(11)), 0.0, 1e-15);
}

// Oracle: naive triple loop over all index tuples.
TEST(Contract, MatchesNaiveLoopOracle) {
  DenseTensor a = random_tensor({3, 4, 5});
  DenseTensor b = random_tensor({5, 4});
  DenseTensor c = contract(a, {2, 1}, b, {0, 1});
  ASSERT_EQ(c.shape(), (std::vector<std::size_t>{3}));
  for (std::size_t i = 0; i < 3; ++i) {
    cplx acc = 0;
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t k = 0; k < 5; ++k) acc += a.at({i, j, k}) * b.at({k, j});
    EXPECT_LT(std::abs(c.at({i}) - acc), 1e-12);
  }
}

TEST(Contract, ExtentMismatchThrows) {
  DenseTensor a = random_tensor({3, 4});
  DenseTensor b = random_tensor({5, 4});
  EXPECT_THROW(contract(a, {0}, b, {0}), DimensionError);
}

// Property: bilinearity in the first argument.
TEST(Contract, Bilinear) {
  for (int trial = 0; trial < 5; ++trial) {
    DenseTensor a = random_tensor({4, 3});
    DenseTensor b = random_tensor({3, 5});
    const cplx alpha(1.7, -0.3);
    DenseTensor lhs = contract(a.scaled(alpha), {1}, b, {0});
    DenseTensor rhs = contract(a, {1}, b, {0}).scaled(alpha);
    EXPECT_LT(max_abs_diff(lhs, rhs), 1e-12);
  }
}

TEST(SvdSplit, DiagonalMatrix) {
  DenseTensor t({2, 2});
  t.at({0, 0}) = 3;
  t.at({1, 1}) = 1;
  SVDResult r = svd_split(t, 1);
  ASSERT_EQ(r.singular_values.size(), 2u);
  EXPECT_NEAR(r.singular_values[0], 3.0, 1e-12);
  EXPECT_NEAR(r.singular_values[1], 1.0, 1e-12);
}

TEST(SvdSplit, RankOneOuterProduct) {
  DenseTensor u = random_tensor({6});
  DenseTensor v = random_tensor({5});
  DenseTensor t({6, 5});
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 5; ++j) t.at({i, j}) = u.at({i}) * v.at({j});
  SVDResult r = svd_split(t, 1);
  int above = 0;
  for (double s : r.singular_values)
    if (s > 1e-12) ++above;
  EXPECT_EQ(above, 1);
}

// Oracle: singular values = square roots of the Gram matrix eigenvalues.
TEST(SvdSplit, MatchesGramEigenvalueOracle) {
  DenseTensor t = random_tensor({8, 6});
  SVDResult r = svd_split(t, 1);

  Eigen::MatrixXcd m(8, 6);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 6; ++j) m(i, j) = t.at({i, j});
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(m.adjoint() * m);
  std::vector<double> expected;
  for (int i = 5; i >= 0; --i) expected.push_back(std::sqrt(std::max(0.0, eig.eigenvalues()(i))));

  ASSERT_EQ(r.singular_values.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i)
    EXPECT_NEAR(r.singular_values[i], expected[i], 1e-10);
}

TEST(SvdSplit, ReconstructionAndIsometry) {
  DenseTensor t = random_tensor({4, 3, 5, 2});
  SVDResult r = svd_split(t, 2);
  // Sorted non-increasing and non-negative.
  for (std::size_t i = 0; i + 1 < r.singular_values.size(); ++i)
    EXPECT_GE(r.singular_values[i], r.singular_values[i + 1]);
  EXPECT_GE(r.singular_values.back(), 0.0);

  const std::size_t k = r.singular_values.size();
  // Isometry within 1e-10 (Frobenius).
  DenseTensor utu = contract(r.left_isometry.conjugated(), {0, 1}, r.left_isometry, {0, 1});
  DenseTensor vvt = contract(r.right_isometry, {1, 2}, r.right_isometry.conjugated(), {1, 2});
  double dev = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const cplx e = (i == j) ? cplx(1) : cplx(0);
      dev = std::max(dev, std::abs(utu.at({i, j}) - e));
      dev = std::max(dev, std::abs(vvt.at({i, j}) - e));
    }
  EXPECT_LT(dev, 1e-10);

  // Full-rank recombination reproduces the input.
  DenseTensor us = r.left_isometry;
  for (std::size_t row = 0; row < us.size() / k; ++row)
    for (std::size_t c = 0; c < k; ++c) us.data()[row * k + c] *= r.singular_values[c];
  DenseTensor rec = contract(us, {2}, r.right_isometry, {0});
  EXPECT_LT(max_abs_diff(rec, t) / t.frobenius_norm(), 1e-10);
}

TEST(TruncationRank, ExactZerosDropped) {
  std::vector<double> v{1.0, 0.0, 0.0};
  EXPECT_EQ(truncation_rank(v, 0.0), 1u);
}

TEST(TruncationRank, NothingDiscardable) {
  std::vector<double> v{1.0, 1.0, 1.0, 1.0};
  EXPECT_EQ(truncation_rank(v, 0.0), 4u);
}

// Oracle: direct evaluation of the discarded-weight formula.
TEST(TruncationRank, SmallTailDropped) {
  std::vector<double> v{1.0, 1e-7};
  const double weight = (1e-7 * 1e-7) / (1.0 + 1e-7 * 1e-7);
  ASSERT_LE(weight, 1e-12);
  EXPECT_EQ(truncation_rank(v, 1e-12), 1u);
}

TEST(TruncationRank, AllZeroThrows) {
  std::vector<double> v{0.0, 0.0};
  EXPECT_THROW(truncation_rank(v, 0.5), DegenerateSpectrumError);
}

TEST(TruncationRank, MaxRankClamp) {
  std::vector<double> v{1.0, 1.0, 1.0, 1.0};
  EXPECT_EQ(truncation_rank(v, 0.0, 2), 2u);
}

TEST(TruncationRank, DegenerateGroupKeptTogether) {
  // The second value ties the first within 1e-13 relative; both stay even
  // though the weight bound alone would allow rank 1.
  std::vector<double> v{1.0, 1.0 - 1e-14, 1e-9};
  const std::size_t r = truncation_rank(v, 0.9);
  EXPECT_GE(r, 2u);
}

// Properties: monotonicity in epsilon and the realized-weight bound.
TEST(TruncationRank, MonotoneAndWeightBound) {
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(12);
    for (double& x : v) x = std::pow(10.0, -6.0 * ud(rng));
    std::sort(v.rbegin(), v.rend());
    double eps1 = std::pow(10.0, -10.0 * ud(rng));
    double eps2 = std::pow(10.0, -10.0 * ud(rng));
    if (eps1 > eps2) std::swap(eps1, eps2);
    const std::size_t r1 = truncation_rank(v, eps1);
    const std::size_t r2 = truncation_rank(v, eps2);
    EXPECT_GE(r1, r2);  // larger epsilon never yields a larger rank
    EXPECT_LE(truncation_weight(v, r1), eps1);
    EXPECT_LE(truncation_weight(v, r2), eps2);
  }
}

#include <gtest/gtest.h>

#include <sstream>

#include <Eigen/SVD>

#include "cpmm/linear_map.hpp"
#include "cpmm/operator_norm.hpp"

using namespace cpmm;

namespace {

Mat random_matrix(Index rows, Index cols, std::uint64_t seed) {
  Rng rng(mix_seed(seed));
  return gaussian_matrix(rows, cols, rng);
}

double svd_norm(const Mat& m) { return Eigen::JacobiSVD<Mat>(m).singularValues()(0); }

}  // namespace

TEST(LinearMap, DenseApplyMatchesMatrix) {
  const Mat m = random_matrix(4, 3, 1);
  const LinearMap map = dense_map(m);
  const Vec x = Vec::LinSpaced(3, -1.0, 2.0);
  const Vec y = Vec::LinSpaced(4, 0.5, 1.5);
  EXPECT_LT((map.apply(x) - m * x).norm(), 1e-14);
  EXPECT_LT((map.apply_transpose(y) - m.transpose() * y).norm(), 1e-14);
  ASSERT_NE(map.matrix(), nullptr);
}

TEST(LinearMap, WrongSizeThrowsDimensionMismatch) {
  const LinearMap map = dense_map(Mat::Ones(2, 3));
  try {
    map.apply(Vec::Ones(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
  EXPECT_THROW(map.apply_transpose(Vec::Ones(3)), Error);
}

TEST(LinearMap, StackTransposeSumsBlocks) {
  const Mat a = random_matrix(3, 4, 2);
  const Mat b = random_matrix(2, 4, 3);
  Mat ab(5, 4);
  ab << a, b;
  const LinearMap s = stack({dense_map(a), dense_map(b)});
  EXPECT_EQ(s.rows(), 5);
  EXPECT_LT((assemble_apply(s) - ab).norm(), 1e-14);
  EXPECT_LT((assemble_transpose(s) - ab).norm(), 1e-14);
  EXPECT_THROW(stack({dense_map(a), dense_map(Mat::Ones(2, 5))}), Error);
}

TEST(LinearMap, WithTransposeOfMixesMaps) {
  const Mat a = random_matrix(3, 3, 4);
  const Mat v = random_matrix(3, 3, 5);
  const LinearMap mixed = with_transpose_of(dense_map(a), dense_map(v));
  EXPECT_LT((assemble_apply(mixed) - a).norm(), 1e-14);
  EXPECT_LT((assemble_transpose(mixed) - v).norm(), 1e-14);
}

TEST(LinearMap, CountedWrapperCountsCalls) {
  auto counts = std::make_shared<CallCounts>();
  const LinearMap map = counted(identity_map(3), counts);
  map.apply(Vec::Ones(3));
  map.apply(Vec::Ones(3));
  map.apply_transpose(Vec::Ones(3));
  EXPECT_EQ(counts->apply.load(), 2);
  EXPECT_EQ(counts->apply_transpose.load(), 1);
}

TEST(LinearMap, MatrixTextRoundTripIsExact) {
  const Mat m = random_matrix(3, 5, 6);
  std::stringstream ss;
  write_matrix_text(ss, m);
  const Mat back = read_matrix_text(ss);
  EXPECT_EQ((back - m).cwiseAbs().maxCoeff(), 0.0);
}

TEST(LinearMap, MatrixTextRejectsMalformedInput) {
  std::stringstream truncated("2 2\n1 2 3\n");
  EXPECT_THROW(read_matrix_text(truncated), Error);
  std::stringstream trailing("1 1\n1 7\n");
  EXPECT_THROW(read_matrix_text(trailing), Error);
  std::stringstream header("x y\n");
  try {
    read_matrix_text(header);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ParseError);
  }
}

TEST(OperatorNorm, IdentityAndDiagonal) {
  EXPECT_NEAR(estimate_operator_norm(identity_map(7)).value, 1.0, 1e-12);
  Mat d = Mat::Zero(3, 3);
  d.diagonal() << 1.0, -4.0, 2.0;
  EXPECT_NEAR(estimate_operator_norm(dense_map(d)).value, 4.0, 1e-8);
}

TEST(OperatorNorm, ZeroMapIsZero) {
  const NormEstimate est = estimate_operator_norm(zero_map(3, 4));
  EXPECT_EQ(est.value, 0.0);
  EXPECT_TRUE(est.converged);
}

TEST(OperatorNorm, AgreesWithSvdOnRandomMatrices) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Mat m = random_matrix(12 + seed % 5, 9, 100 + seed);
    const double oracle = svd_norm(m);
    const NormEstimate est = estimate_operator_norm(dense_map(m), 1e-13, 100000, seed);
    EXPECT_LE(std::abs(est.value - oracle), 1e-6 * oracle) << "seed " << seed;
    EXPECT_LE(est.value, oracle * (1.0 + 1e-12));
  }
}

TEST(OperatorNorm, ReportsNonConvergenceWithinBudget) {
  const Mat m = random_matrix(30, 30, 7);
  const NormEstimate est = estimate_operator_norm(dense_map(m), 1e-15, 2);
  EXPECT_FALSE(est.converged);
  EXPECT_EQ(est.iterations, 2);
  EXPECT_GT(est.value, 0.0);
}

TEST(OperatorNorm, RejectsBadTolerance) {
  EXPECT_THROW(estimate_operator_norm(identity_map(2), 0.0), Error);
}

TEST(Adjointness, ExactPairHasNegligibleDefect) {
  EXPECT_LT(adjointness_defect(dense_map(random_matrix(6, 4, 8))), 1e-14);
}

TEST(Adjointness, MismatchedPairHasVisibleDefect) {
  const Mat a = random_matrix(6, 4, 9);
  const Mat v = a + 0.1 * random_matrix(6, 4, 10);
  EXPECT_GT(adjointness_defect(with_transpose_of(dense_map(a), dense_map(v))), 1e-3);
}

TEST(MismatchedPair, NormMatchesSvdOfDifferenceAndIsCached) {
  const Mat a = random_matrix(5, 7, 11);
  const Mat v = random_matrix(5, 7, 12);
  MismatchedPair pair(dense_map(a), dense_map(v));
  const double oracle = svd_norm(a - v);
  EXPECT_NEAR(mismatch_norm(pair, 1e-13), oracle, 1e-6 * oracle);
  ASSERT_TRUE(pair.mismatch_norm.has_value());
  pair.mismatch_norm = 42.0;
  EXPECT_EQ(mismatch_norm(pair), 42.0);
}

TEST(MismatchedPair, RejectsShapeMismatch) {
  EXPECT_THROW(MismatchedPair(dense_map(Mat::Ones(2, 3)), dense_map(Mat::Ones(3, 2))), Error);
}

TEST(MismatchedPair, SameOperatorHasZeroMismatch) {
  const LinearMap a = dense_map(random_matrix(4, 4, 13));
  MismatchedPair pair(a, a);
  EXPECT_EQ(mismatch_norm(pair), 0.0);
}

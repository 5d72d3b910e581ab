#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "mmssl/error.hpp"
#include "mmssl/linalg.hpp"
#include "test_util.hpp"

namespace mmssl {
namespace {

using testing::random_matrix;
using testing::random_orthogonal;

TEST(L2Normalize, ThreeFourGivesSixTenthsEightTenths) {
  const Vec u = l2_normalize(Vec{3.0, 4.0});
  EXPECT_DOUBLE_EQ(u[0], 0.6);
  EXPECT_DOUBLE_EQ(u[1], 0.8);
}

TEST(L2Normalize, UnitVectorUnchanged) {
  EXPECT_EQ(l2_normalize(Vec{1.0, 0.0, 0.0}), (Vec{1.0, 0.0, 0.0}));
}

TEST(L2Normalize, Random128HasUnitNormByScalarLoop) {
  SeededRng rng(11);
  Vec v(128);
  for (double& x : v) x = rng.normal(0.0, 3.0);
  const Vec u = l2_normalize(v);
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * u[i];
  EXPECT_NEAR(std::sqrt(s), 1.0, 1e-10);
}

TEST(L2Normalize, Idempotent) {
  SeededRng rng(12);
  for (int t = 0; t < 50; ++t) {
    Vec v(17);
    for (double& x : v) x = rng.normal();
    const Vec once = l2_normalize(v);
    const Vec twice = l2_normalize(once);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(once[i], twice[i], 1e-12);
  }
}

TEST(L2Normalize, ZeroVectorRejected) {
  try {
    l2_normalize(Vec{0.0, 0.0});
    FAIL() << "expected ZeroVector";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroVector);
  }
  EXPECT_THROW(l2_normalize(Vec{1e-13, 0.0}), Error);
}

TEST(CosineSimilarity, Examples) {
  EXPECT_DOUBLE_EQ(cosine_similarity(Vec{1, 0}, Vec{1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(Vec{1, 0}, Vec{0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(Vec{1, 0}, Vec{0.6, 0.8}), 0.6);
}

TEST(CosineSimilarity, ClampedToUnitInterval) {
  const Vec u = l2_normalize(Vec{1.0, 1.0, 1.0});
  const double c = cosine_similarity(u, u);
  EXPECT_LE(c, 1.0);
  EXPECT_GE(c, -1.0);
}

TEST(CosineSimilarity, SymmetricAndRotationInvariant) {
  SeededRng rng(13);
  const std::size_t d = 9;
  const Mat q = random_orthogonal(d, rng);
  for (int t = 0; t < 30; ++t) {
    const Vec u = l2_normalize(random_matrix(1, d, rng).values());
    const Vec v = l2_normalize(random_matrix(1, d, rng).values());
    EXPECT_EQ(cosine_similarity(u, v), cosine_similarity(v, u));
    Vec ru(d, 0.0), rv(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        ru[i] += q(i, j) * u[j];
        rv[i] += q(i, j) * v[j];
      }
    }
    EXPECT_NEAR(cosine_similarity(ru, rv), cosine_similarity(u, v), 1e-10);
  }
}

TEST(Dot, DimensionMismatchRejected) {
  EXPECT_THROW(dot(Vec{1, 2}, Vec{1, 2, 3}), Error);
}

TEST(Mat, ValueCountMustMatchShape) {
  EXPECT_THROW(Mat(2, 2, Vec{1, 2, 3}), Error);
  const Mat m(2, 3, Vec{1, 2, 3, 4, 5, 6});
  EXPECT_EQ(m(1, 0), 4.0);
  EXPECT_EQ(m.transposed()(0, 1), 4.0);
}

TEST(MatmulAbt, MatchesScalarLoops) {
  SeededRng rng(14);
  const Mat a = random_matrix(5, 7, rng);
  const Mat b = random_matrix(3, 7, rng);
  const Mat c = matmul_abt(a, b);
  ASSERT_EQ(c.rows(), 5u);
  ASSERT_EQ(c.cols(), 3u);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 7; ++k) s += a(i, k) * b(j, k);
      EXPECT_NEAR(c(i, j), s, 1e-12);
    }
  }
  EXPECT_THROW(matmul_abt(a, random_matrix(3, 6, rng)), Error);
}

TEST(Vstack, StacksAndSlicesBack) {
  SeededRng rng(15);
  const Mat a = random_matrix(2, 4, rng);
  const Mat b = random_matrix(3, 4, rng);
  const Mat* parts[] = {&a, &b};
  const Mat s = vstack(parts);
  EXPECT_EQ(s.rows(), 5u);
  EXPECT_EQ(row_slice(s, 0, 2), a);
  EXPECT_EQ(row_slice(s, 2, 3), b);
  EXPECT_THROW(row_slice(s, 4, 2), Error);
  const Mat c = random_matrix(1, 3, rng);
  const Mat* bad[] = {&a, &c};
  EXPECT_THROW(vstack(bad), Error);
}

TEST(AllFinite, DetectsNanAndInf) {
  EXPECT_TRUE(all_finite(Vec{1.0, -2.0}));
  EXPECT_FALSE(all_finite(Vec{1.0, std::nan("")}));
  EXPECT_FALSE(all_finite(Vec{INFINITY}));
}

TEST(SeededRng, EngineIsStandardMt19937_64) {
  SeededRng rng(5489);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next_u64();
  EXPECT_EQ(v, 9981545732273789042ULL);
}

TEST(SeededRng, EqualSeedsGiveEqualStreams) {
  SeededRng a(99), b(99);
  for (int i = 0; i < 1000; ++i) {
    ASSERT_EQ(a.uniform(), b.uniform());
    ASSERT_EQ(a.normal(), b.normal());
    ASSERT_EQ(a.below(17), b.below(17));
  }
  SeededRng ca = a.split(), cb = b.split();
  for (int i = 0; i < 100; ++i) ASSERT_EQ(ca.next_u64(), cb.next_u64());
}

TEST(SeededRng, UniformUsesTop53Bits) {
  SeededRng a(3), b(3);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, static_cast<double>(b.next_u64() >> 11) / 9007199254740992.0);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(SeededRng, BelowStaysInRangeAndCoversIt) {
  SeededRng rng(4);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = rng.below(7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
  EXPECT_EQ(rng.below(1), 0u);
}

TEST(SeededRng, NormalMomentsAreStandard) {
  SeededRng rng(5);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  const double mean = s / n;
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(s2 / n - mean * mean, 1.0, 0.01);
}

TEST(SeededRng, SplitStreamsDiffer) {
  SeededRng rng(6);
  SeededRng a = rng.split();
  SeededRng b = rng.split();
  int equal = 0;
  for (int i = 0; i < 100; ++i) equal += a.next_u64() == b.next_u64();
  EXPECT_EQ(equal, 0);
}

TEST(Shuffle, IsAPermutationAndDeterministic) {
  std::vector<int> a(50), b;
  for (int i = 0; i < 50; ++i) a[i] = i;
  b = a;
  SeededRng r1(8), r2(8);
  shuffle(a, r1);
  shuffle(b, r2);
  EXPECT_EQ(a, b);
  std::set<int> s(a.begin(), a.end());
  EXPECT_EQ(s.size(), 50u);
}

}  // namespace
}  // namespace mmssl

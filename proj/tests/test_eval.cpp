#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <cmath>
#include <numeric>

#include "mmssl/error.hpp"
#include "mmssl/eval.hpp"
#include "test_util.hpp"

namespace mmssl {
namespace {

using testing::random_orthogonal;
using testing::random_unit_rows;
using testing::rotate_rows;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::ZeroVector;
}

// Exhaustive sort of all training points, then a majority vote with the
// documented tie rules.
std::vector<std::size_t> brute_force_knn(const Mat& train, const std::vector<std::size_t>& labels,
                                         const Mat& query, std::size_t k, std::size_t n_classes) {
  std::vector<std::size_t> out;
  for (std::size_t q = 0; q < query.rows(); ++q) {
    std::vector<std::pair<double, std::size_t>> sims;
    for (std::size_t t = 0; t < train.rows(); ++t) {
      double s = 0.0;
      for (std::size_t c = 0; c < train.cols(); ++c) s += train(t, c) * query(q, c);
      sims.push_back({-std::clamp(s, -1.0, 1.0), t});
    }
    std::sort(sims.begin(), sims.end());
    std::vector<double> votes(n_classes, 0.0), sim_sum(n_classes, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      votes[labels[sims[i].second]] += 1.0;
      sim_sum[labels[sims[i].second]] += -sims[i].first;
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < n_classes; ++c) {
      if (votes[c] > votes[best] || (votes[c] == votes[best] && sim_sum[c] > sim_sum[best])) best = c;
    }
    out.push_back(best);
  }
  return out;
}

double pairwise_auc(const std::vector<double>& s, const std::vector<std::size_t>& y) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] == 1 && y[j] == 0) {
        den += 1.0;
        num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
    }
  }
  return num / den;
}

TEST(Knn, NearestNeighbourExample) {
  const Mat train(2, 2, Vec{1, 0, 0, 1});
  const std::vector<std::size_t> labels{0, 1};
  const Vec q = l2_normalize(Vec{0.994, 0.110});
  KnnConfig c;
  c.k = 1;
  const KnnResult r = knn_classify(train, labels, Mat(1, 2, q), c);
  EXPECT_EQ(r.predictions, (std::vector<std::size_t>{0}));
  EXPECT_EQ(r.class_scores(0, 0), 1.0);
  EXPECT_EQ(r.positive_scores[0], 0.0);
}

TEST(Knn, FullKPredictsGlobalMajority) {
  SeededRng rng(1);
  const Mat train = random_unit_rows(9, 4, rng);
  const std::vector<std::size_t> labels{0, 2, 2, 1, 2, 0, 2, 1, 1};
  KnnConfig c;
  c.k = 9;
  const KnnResult r = knn_classify(train, labels, random_unit_rows(15, 4, rng), c);
  for (std::size_t p : r.predictions) EXPECT_EQ(p, 2u);
}

TEST(Knn, MatchesBruteForceOracle) {
  SeededRng rng(2);
  for (int t = 0; t < 5; ++t) {
    const Mat train = random_unit_rows(30, 5, rng);
    std::vector<std::size_t> labels(30);
    for (auto& l : labels) l = rng.below(3);
    const Mat query = random_unit_rows(100, 5, rng);
    for (std::size_t k : {1, 5, 7, 30}) {
      KnnConfig c;
      c.k = k;
      EXPECT_EQ(knn_classify(train, labels, query, c, 3).predictions, brute_force_knn(train, labels, query, k, 3))
          << "k=" << k;
    }
  }
}

TEST(Knn, DuplicateNeighboursTieToLowerIndex) {
  // Train rows 0 and 1 are identical with different labels; k=1 picks row 0.
  const Mat train(3, 2, Vec{1, 0, 1, 0, 0, 1});
  const std::vector<std::size_t> labels{1, 0, 0};
  KnnConfig c;
  c.k = 1;
  EXPECT_EQ(knn_classify(train, labels, Mat(1, 2, Vec{1, 0}), c).predictions[0], 1u);
}

TEST(Knn, VoteTieBrokenBySummedSimilarity) {
  const Vec a = l2_normalize(Vec{1.0, 0.2});
  const Vec b = l2_normalize(Vec{0.2, 1.0});
  const Mat train(2, 2, Vec{a[0], a[1], b[0], b[1]});
  KnnConfig c;
  c.k = 2;
  const Vec q = l2_normalize(Vec{0.3, 1.0});
  EXPECT_EQ(knn_classify(train, std::vector<std::size_t>{0, 1}, Mat(1, 2, q), c).predictions[0], 1u);
}

TEST(Knn, WeightedVoteFollowsSimilarity) {
  // Two far neighbours of class 0 against one close neighbour of class 1.
  const Vec close = l2_normalize(Vec{1.0, 0.05});
  const Vec far1 = l2_normalize(Vec{0.3, 1.0});
  const Vec far2 = l2_normalize(Vec{0.3, -1.0});
  const Mat train(3, 2, Vec{close[0], close[1], far1[0], far1[1], far2[0], far2[1]});
  const std::vector<std::size_t> labels{1, 0, 0};
  KnnConfig c;
  c.k = 3;
  EXPECT_EQ(knn_classify(train, labels, Mat(1, 2, Vec{1, 0}), c).predictions[0], 0u);
  c.vote = KnnVote::SimilarityWeighted;
  const KnnResult r = knn_classify(train, labels, Mat(1, 2, Vec{1, 0}), c);
  EXPECT_EQ(r.predictions[0], 1u);
  const double w_close = std::exp(close[0] / 0.1);
  const double w_far = std::exp(far1[0] / 0.1);
  EXPECT_NEAR(r.class_scores(0, 1), w_close / (w_close + 2 * w_far), 1e-12);
}

TEST(Knn, RotationInvariant) {
  SeededRng rng(3);
  const Mat train = random_unit_rows(40, 6, rng);
  std::vector<std::size_t> labels(40);
  for (auto& l : labels) l = rng.below(4);
  const Mat query = random_unit_rows(30, 6, rng);
  const Mat q = random_orthogonal(6, rng);
  KnnConfig c;
  c.k = 7;
  EXPECT_EQ(knn_classify(train, labels, query, c).predictions,
            knn_classify(testing::normalize_rows(rotate_rows(train, q)), labels,
                         testing::normalize_rows(rotate_rows(query, q)), c)
                .predictions);
}

TEST(Knn, Errors) {
  const Mat train(2, 2, Vec{1, 0, 0, 1});
  KnnConfig c;
  c.k = 3;
  EXPECT_EQ(code_of([&] { knn_classify(train, std::vector<std::size_t>{0, 1}, train, c); }), ErrorCode::KTooLarge);
  c.k = 1;
  EXPECT_EQ(code_of([&] { knn_classify(Mat(0, 2), std::vector<std::size_t>{}, train, c); }),
            ErrorCode::EmptyTrainSet);
  c.k = 0;
  EXPECT_THROW(knn_classify(train, std::vector<std::size_t>{0, 1}, train, c), Error);
  EXPECT_EQ(parse_knn_vote("weighted"), KnnVote::SimilarityWeighted);
  EXPECT_EQ(parse_knn_vote(knn_vote_name(KnnVote::Majority)), KnnVote::Majority);
  EXPECT_THROW(parse_knn_vote("other"), Error);
}

TEST(Auc, Examples) {
  EXPECT_EQ(auc(Vec{0.1, 0.2, 0.8, 0.9}, std::vector<std::size_t>{0, 0, 1, 1}), 1.0);
  EXPECT_EQ(auc(Vec{0.9, 0.8, 0.7}, std::vector<std::size_t>{1, 0, 1}), 0.5);
  EXPECT_EQ(auc(Vec{0.3, 0.3, 0.3, 0.3}, std::vector<std::size_t>{1, 0, 1, 0}), 0.5);
  EXPECT_EQ(code_of([] { auc(Vec{0.1, 0.2}, std::vector<std::size_t>{1, 1}); }), ErrorCode::SingleClass);
  EXPECT_EQ(code_of([] { auc(Vec{0.1}, std::vector<std::size_t>{1, 0}); }), ErrorCode::LengthMismatch);
}

TEST(Auc, MatchesPairwiseEnumeration) {
  SeededRng rng(4);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.below(30);
    std::vector<double> s(n);
    std::vector<std::size_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(6)) / 5.0;  // many ties
      y[i] = rng.below(2);
    }
    y[0] = 0;
    y[1] = 1;
    EXPECT_EQ(auc(s, y), pairwise_auc(s, y));
  }
}

TEST(Auc, InvariantUnderIncreasingTransform) {
  SeededRng rng(5);
  std::vector<double> s(25), t(25);
  std::vector<std::size_t> y(25);
  for (std::size_t i = 0; i < 25; ++i) {
    s[i] = rng.normal();
    t[i] = std::exp(3.0 * s[i]) + 7.0;
    y[i] = i % 3 == 0;
  }
  EXPECT_EQ(auc(s, y), auc(t, y));
}

TEST(MacroAuc, AveragesOneVsRest) {
  const Mat scores(4, 3, Vec{0.8, 0.1, 0.1,  //
                             0.2, 0.7, 0.1,  //
                             0.1, 0.2, 0.7,  //
                             0.5, 0.4, 0.1});
  const std::vector<std::size_t> labels{0, 1, 2, 1};
  double expect = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<double> s;
    std::vector<std::size_t> y;
    for (std::size_t i = 0; i < 4; ++i) {
      s.push_back(scores(i, c));
      y.push_back(labels[i] == c);
    }
    expect += pairwise_auc(s, y) / 3.0;
  }
  EXPECT_NEAR(macro_auc(scores, labels, 3), expect, 1e-15);
  const Mat binary(3, 2, Vec{0.9, 0.1, 0.4, 0.6, 0.2, 0.8});
  EXPECT_EQ(macro_auc(binary, std::vector<std::size_t>{0, 1, 1}, 2), 1.0);
  EXPECT_EQ(code_of([&] { macro_auc(binary, std::vector<std::size_t>{1, 1, 1}, 2); }), ErrorCode::SingleClass);
}

TEST(Metrics, PerfectPredictions) {
  const std::vector<std::size_t> y{0, 1, 2, 1};
  const MetricsReport m = classification_metrics(y, y, 3);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  EXPECT_EQ(m.f1, 1.0);
  EXPECT_FALSE(m.auc.has_value());
}

TEST(Metrics, HandConfusionMatrix) {
  const MetricsReport m =
      classification_metrics(std::vector<std::size_t>{1, 1, 0}, std::vector<std::size_t>{1, 0, 0}, 2);
  EXPECT_NEAR(m.accuracy, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.precision, 0.75, 1e-15);
  EXPECT_NEAR(m.recall, 0.75, 1e-15);
  EXPECT_NEAR(m.f1, 2.0 / 3.0, 1e-15);
  ASSERT_EQ(m.per_class.size(), 2u);
  EXPECT_EQ(m.per_class[0].support, 2u);
  EXPECT_NEAR(m.per_class[0].precision, 1.0, 1e-15);
  EXPECT_NEAR(m.per_class[0].recall, 0.5, 1e-15);
}

TEST(Metrics, SingleClassPredictions) {
  const MetricsReport m =
      classification_metrics(std::vector<std::size_t>{0, 0, 0, 0}, std::vector<std::size_t>{0, 1, 0, 1}, 2);
  EXPECT_EQ(m.per_class[0].recall, 1.0);
  EXPECT_EQ(m.per_class[1].recall, 0.0);
  EXPECT_EQ(m.recall, 0.5);
  EXPECT_EQ(m.per_class[1].f1, 0.0);
}

TEST(Metrics, AccuracyIsConfusionTrace) {
  SeededRng rng(6);
  std::vector<std::size_t> p(60), y(60);
  for (std::size_t i = 0; i < 60; ++i) {
    p[i] = rng.below(4);
    y[i] = rng.below(4);
  }
  std::size_t trace = 0;
  for (std::size_t i = 0; i < 60; ++i) trace += p[i] == y[i];
  EXPECT_NEAR(classification_metrics(p, y, 4).accuracy, static_cast<double>(trace) / 60.0, 1e-15);
  EXPECT_EQ(code_of([&] { classification_metrics(std::vector<std::size_t>{1}, y, 4); }), ErrorCode::LengthMismatch);
}

TEST(Probe, SeparableClustersReachPerfectAccuracy) {
  SeededRng rng(7);
  Mat train(40, 2), test(20, 2);
  std::vector<std::size_t> ytr(40), yte(20);
  for (std::size_t i = 0; i < 40; ++i) {
    ytr[i] = i % 2;
    train(i, 0) = (ytr[i] ? 1.0 : -1.0) + rng.normal(0.0, 0.1);
    train(i, 1) = rng.normal(0.0, 0.1);
  }
  for (std::size_t i = 0; i < 20; ++i) {
    yte[i] = i % 2;
    test(i, 0) = (yte[i] ? 1.0 : -1.0) + rng.normal(0.0, 0.1);
    test(i, 1) = rng.normal(0.0, 0.1);
  }
  const MetricsReport m = linear_probe(train, ytr, test, yte, 2, ProbeConfig{});
  EXPECT_EQ(m.accuracy, 1.0);
  ASSERT_TRUE(m.auc.has_value());
  EXPECT_EQ(*m.auc, 1.0);
}

TEST(Probe, ZeroEpochsPredictsClassZero) {
  SeededRng rng(8);
  const Mat x = random_unit_rows(10, 3, rng);
  const std::vector<std::size_t> y{0, 1, 1, 1, 0, 1, 1, 0, 1, 1};
  ProbeConfig c;
  c.epochs = 0;
  const MetricsReport m = linear_probe(x, y, x, y, 2, c);
  EXPECT_NEAR(m.accuracy, 0.3, 1e-15);
  const ProbeModel model = train_probe(x, y, 2, c);
  const Mat p = probe_predict_proba(model, x);
  for (double v : p.values()) EXPECT_EQ(v, 0.5);
}

TEST(Probe, GradientMatchesFiniteDifferences) {
  SeededRng rng(9);
  const Mat x = testing::random_matrix(12, 4, rng);
  std::vector<std::size_t> y(12);
  for (auto& v : y) v = rng.below(3);
  ProbeModel m{testing::random_matrix(3, 4, rng), Vec{0.1, -0.2, 0.3}};
  ProbeModel g;
  probe_loss_and_grad(m, x, y, &g);
  const double h = 1e-6;
  double worst = 0.0;
  const auto check = [&](double& param, double analytic) {
    const double keep = param;
    param = keep + h;
    const double up = probe_loss_and_grad(m, x, y, nullptr);
    param = keep - h;
    const double down = probe_loss_and_grad(m, x, y, nullptr);
    param = keep;
    worst = std::max(worst, testing::rel_error(analytic, (up - down) / (2 * h)));
  };
  for (std::size_t i = 0; i < m.weights.size(); ++i) check(m.weights.values()[i], g.weights.values()[i]);
  for (std::size_t i = 0; i < m.bias.size(); ++i) check(m.bias[i], g.bias[i]);
  EXPECT_LT(worst, 1e-6);
}

TEST(Pca, CollinearRowsHaveZeroSecondCoordinate) {
  Mat x(8, 5);
  const Vec dir{0.1, -0.4, 0.3, 0.8, 0.2};
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t c = 0; c < 5; ++c) x(i, c) = 1.5 + (static_cast<double>(i) - 3.0) * dir[c];
  const Projection2 p = pca_project2(x);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(p.coords(i, 1), 0.0, 1e-10);
}

TEST(Pca, TwoDimensionalDataKeepsDistances) {
  SeededRng rng(10);
  Mat x(12, 2);
  for (std::size_t i = 0; i < 12; ++i) {
    x(i, 0) = rng.normal(0.0, 3.0);
    x(i, 1) = rng.normal(0.0, 1.0);
  }
  const Projection2 p = pca_project2(x);
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = 0; j < 12; ++j) {
      const double d0 = std::hypot(x(i, 0) - x(j, 0), x(i, 1) - x(j, 1));
      const double d1 = std::hypot(p.coords(i, 0) - p.coords(j, 0), p.coords(i, 1) - p.coords(j, 1));
      EXPECT_NEAR(d0, d1, 1e-10);
    }
  }
}

TEST(Pca, MatchesEigenSolver) {
  SeededRng rng(11);
  const Mat x = testing::random_matrix(10, 6, rng);
  const Projection2 p = pca_project2(x);

  Eigen::MatrixXd m(10, 6);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 6; ++j) m(i, j) = x(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  const Eigen::MatrixXd centered = m.rowwise() - m.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / 9.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd vals = es.eigenvalues();  // ascending
  ASSERT_GE(p.variances[0], p.variances[1]);
  for (int c = 0; c < 2; ++c) {
    Eigen::VectorXd v = es.eigenvectors().col(5 - c);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    for (int j = 0; j < 6; ++j) EXPECT_NEAR(p.components(static_cast<std::size_t>(c), static_cast<std::size_t>(j)), v(j), 1e-8);
    const Eigen::VectorXd proj = centered * v;
    for (int i = 0; i < 10; ++i) EXPECT_NEAR(p.coords(static_cast<std::size_t>(i), static_cast<std::size_t>(c)), proj(i), 1e-8);
    double var = 0.0;
    for (int i = 0; i < 10; ++i) var += proj(i) * proj(i) / 9.0;
    EXPECT_NEAR(var, vals(5 - c), 1e-8);
  }
}

TEST(Pca, TranslationInvariant) {
  SeededRng rng(12);
  const Mat x = testing::random_matrix(9, 4, rng);
  Mat shifted = x;
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t c = 0; c < 4; ++c) shifted(i, c) += 5.0 - static_cast<double>(c);
  const Projection2 a = pca_project2(x);
  const Projection2 b = pca_project2(shifted);
  for (std::size_t i = 0; i < a.coords.size(); ++i) EXPECT_NEAR(a.coords.values()[i], b.coords.values()[i], 1e-9);
}

TEST(Pca, DegenerateInputs) {
  EXPECT_THROW(pca_project2(Mat(1, 3, Vec{1, 2, 3})), Error);
  EXPECT_THROW(pca_project2(Mat(3, 1, Vec{1, 2, 3})), Error);
}

// Two-sided p-value by Simpson integration of the t density on [0, |t|].
double quadrature_p(double t, double df) {
  const double logc = std::lgamma((df + 1) / 2) - std::lgamma(df / 2) - 0.5 * std::log(df * M_PI);
  const auto f = [&](double x) { return std::exp(logc - (df + 1) / 2 * std::log1p(x * x / df)); };
  const int n = 20000;
  const double a = std::abs(t), h = a / n;
  double s = f(0) + f(a);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return 1.0 - 2.0 * s * h / 3.0;
}

TEST(TTest, IdenticalSamples) {
  const TTestResult r = t_test(Vec{1, 2, 3}, Vec{1, 2, 3});
  EXPECT_EQ(r.t, 0.0);
  EXPECT_EQ(r.p, 1.0);
  const TTestResult c = t_test(Vec{2, 2}, Vec{2, 2, 2});
  EXPECT_EQ(c.t, 0.0);
  EXPECT_EQ(c.p, 1.0);
}

TEST(TTest, PooledFormulaByHand) {
  const TTestResult r = t_test(Vec{2, 4}, Vec{1, 3});
  EXPECT_NEAR(r.t, 1.0 / std::sqrt(2.0), 1e-10);
  EXPECT_EQ(r.df, 2.0);
  EXPECT_NEAR(r.p, quadrature_p(r.t, 2.0), 1e-6);
}

TEST(TTest, PValueMatchesQuadrature) {
  SeededRng rng(13);
  for (int t = 0; t < 20; ++t) {
    const std::size_t na = 2 + rng.below(8), nb = 2 + rng.below(8);
    Vec a(na), b(nb);
    for (double& v : a) v = rng.normal(0.3, 1.0);
    for (double& v : b) v = rng.normal(0.0, 1.5);
    const TTestResult r = t_test(a, b);
    EXPECT_EQ(r.df, static_cast<double>(na + nb - 2));
    EXPECT_NEAR(r.p, quadrature_p(r.t, r.df), 1e-6);
  }
}

TEST(TTest, Errors) {
  EXPECT_EQ(code_of([] { t_test(Vec{1}, Vec{1, 2}); }), ErrorCode::InsufficientSamples);
  EXPECT_EQ(code_of([] { t_test(Vec{1, 1}, Vec{2, 2}); }), ErrorCode::DegenerateTest);
}

TEST(Format, MetricsTextAndRecord) {
  MetricsReport m;
  m.accuracy = 0.5;
  m.precision = 0.25;
  m.recall = 0.75;
  m.f1 = 0.375;
  EXPECT_EQ(format_metrics_record(m), ",0.5,0.25,0.75,0.375");
  m.auc = 1.0;
  EXPECT_EQ(format_metrics_record(m), "1,0.5,0.25,0.75,0.375");
  const std::string text = format_metrics_text(m, "x.");
  EXPECT_NE(text.find("x.auc = 1\n"), std::string::npos);
  EXPECT_NE(text.find("x.accuracy = 0.5\n"), std::string::npos);
  EXPECT_EQ(std::string(kMetricsRecordHeader), "auc,accuracy,precision,recall,f1");
}

}  // namespace
}  // namespace mmssl

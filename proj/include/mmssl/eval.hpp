#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmssl/linalg.hpp"

namespace mmssl {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;

  bool operator==(const ClassMetrics&) const = default;
};

struct MetricsReport {
  std::optional<double> auc;
  double accuracy = 0.0;
  double precision = 0.0;  // macro
  double recall = 0.0;     // macro
  double f1 = 0.0;         // macro
  std::vector<ClassMetrics> per_class;

  bool operator==(const MetricsReport&) const = default;
};

enum class KnnVote { Majority, SimilarityWeighted };

const char* knn_vote_name(KnnVote vote);
KnnVote parse_knn_vote(const std::string& name);

struct KnnConfig {
  std::size_t k = 100;
  KnnVote vote = KnnVote::Majority;
  /// Temperature of the exp(similarity / tau) weights of the weighted vote.
  double weight_tau = 0.1;
};

struct KnnResult {
  std::vector<std::size_t> predictions;
  /// Per query, the (weighted) fraction of neighbours in each class.
  Mat class_scores;
  /// Column 1 of class_scores (zeros when there is a single class).
  Vec positive_scores;
};

/// Frozen-feature KNN. Neighbours are ranked by cosine similarity, ties going
/// to the lower training index; vote ties go to the larger summed similarity,
/// then to the lower class index. `n_classes` of 0 means max label + 1.
KnnResult knn_classify(const Mat& train_embeddings, std::span<const std::size_t> train_labels,
                       const Mat& query_embeddings, const KnnConfig& cfg, std::size_t n_classes = 0);

/// Mann-Whitney AUC: fraction of (positive, negative) pairs ranked correctly,
/// ties counting one half. Labels are 0/1.
double auc(std::span<const double> scores, std::span<const std::size_t> binary_labels);

/// Mean one-vs-rest AUC over the classes that have both positives and
/// negatives; the plain binary AUC when n_classes == 2.
double macro_auc(const Mat& class_scores, std::span<const std::size_t> labels, std::size_t n_classes);

/// Accuracy and macro precision/recall/F1; `auc` is left empty.
MetricsReport classification_metrics(std::span<const std::size_t> predictions,
                                     std::span<const std::size_t> labels, std::size_t n_classes);

struct ProbeConfig {
  std::size_t epochs = 500;
  double lr = 0.5;
};

/// Softmax classifier weights: logits = W x + b.
struct ProbeModel {
  Mat weights;  // n_classes x d
  Vec bias;
};

/// Mean cross-entropy of the probe and its gradient.
double probe_loss_and_grad(const ProbeModel& model, const Mat& inputs,
                           std::span<const std::size_t> labels, ProbeModel* grad);

ProbeModel train_probe(const Mat& inputs, std::span<const std::size_t> labels, std::size_t n_classes,
                       const ProbeConfig& cfg);

/// Softmax probabilities, one row per input.
Mat probe_predict_proba(const ProbeModel& model, const Mat& inputs);

/// Fits a fully-connected softmax layer on frozen training embeddings by
/// full-batch gradient descent from zero weights and reports test metrics.
MetricsReport linear_probe(const Mat& train_embeddings, std::span<const std::size_t> train_labels,
                           const Mat& test_embeddings, std::span<const std::size_t> test_labels,
                           std::size_t n_classes, const ProbeConfig& cfg);

struct Projection2 {
  Mat coords;        // n x 2
  Mat components;    // 2 x d, orthonormal rows
  Vec variances;     // eigenvalues of the two components
};

/// Projects mean-centred rows onto the top two principal axes. Each axis is
/// signed so that its largest-magnitude loading is positive.
Projection2 pca_project2(const Mat& embeddings);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
};

/// Pooled-variance two-sample t test, two-sided p-value.
TTestResult t_test(std::span<const double> a, std::span<const double> b);

/// "key = value" lines.
std::string format_metrics_text(const MetricsReport& report, const std::string& prefix = "");
/// One line: auc,accuracy,precision,recall,f1 (auc empty when absent).
std::string format_metrics_record(const MetricsReport& report);
inline constexpr const char* kMetricsRecordHeader = "auc,accuracy,precision,recall,f1";

}  // namespace mmssl

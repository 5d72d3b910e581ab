#pragma once

#include <cstddef>
#include <string>

#include "mmssl/linalg.hpp"

namespace mmssl {

/// Unit-norm embeddings for n patients: row i of each matrix belongs to
/// patient i (fundus view, augmented fundus view, second modality).
struct EmbeddingBatch {
  Mat fundus;
  Mat augmented;
  Mat modality;

  std::size_t size() const noexcept { return fundus.rows(); }
  std::size_t dim() const noexcept { return fundus.cols(); }

  /// Shapes agree, n >= 1 and every row has unit norm within 1e-8.
  void validate() const;
};

struct LossConfig {
  double tau = 0.1;
  /// Subtracted from the cross-modal positive logit only.
  double margin = 0.0;
  bool use_transform_term = true;
  bool use_modality_term = true;
  bool use_negative_terms = true;

  void validate() const;
};

/// How the second modality enters training.
///  - Ours: patient triplets, both positive terms.
///  - EnlargedData: every modality image is a patient of its own; only the
///    augmentation positive is used.
///  - AsAugmentation: the modality image is one more random view of the
///    fundus; only the augmentation positive is used.
enum class LossMode { Ours, EnlargedData, AsAugmentation };

const char* loss_mode_name(LossMode mode);
LossMode parse_loss_mode(const std::string& name);

/// Loss configuration a mode trains with, starting from `base`.
LossConfig preset_for_mode(LossMode mode, LossConfig base);

struct LossValue {
  double total = 0.0;
  Vec per_patient;
};

struct LossGradient {
  Mat fundus;
  Mat augmented;
  Mat modality;
};

enum class QueryModality { Fundus, Modality };

/// P(i | augmented view of i): softmax over fundus embeddings f_k against
/// the query f̂_i.
double positive_prob_transform(const EmbeddingBatch& batch, std::size_t i, const LossConfig& cfg);

/// P(i | modality image of i), with the margin taken off the numerator.
double positive_prob_modality(const EmbeddingBatch& batch, std::size_t i, const LossConfig& cfg);

/// P(i | image of patient j) for j != i, the query being f_j or g_j. The
/// denominator runs over every k, j included.
double negative_prob(const EmbeddingBatch& batch, std::size_t i, std::size_t j,
                     QueryModality query, const LossConfig& cfg);

/// Negative log-likelihood L_i of patient i.
double patient_loss(const EmbeddingBatch& batch, std::size_t i, const LossConfig& cfg);

/// Mean of patient_loss over the batch.
LossValue batch_loss(const EmbeddingBatch& batch, const LossConfig& cfg);

/// Gradient of batch_loss().total with respect to every embedding entry.
LossGradient batch_loss_gradient(const EmbeddingBatch& batch, const LossConfig& cfg);

/// Value and gradient in one pass (the training path).
LossValue batch_loss_with_gradient(const EmbeddingBatch& batch, const LossConfig& cfg,
                                   LossGradient& grad);

}  // namespace mmssl

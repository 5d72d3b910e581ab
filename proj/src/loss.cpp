#include "mmssl/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mmssl/error.hpp"

namespace mmssl {

void EmbeddingBatch::validate() const {
  if (fundus.rows() == 0) throw Error(ErrorCode::ShapeMismatch, "empty embedding batch");
  if (augmented.rows() != fundus.rows() || modality.rows() != fundus.rows() ||
      augmented.cols() != fundus.cols() || modality.cols() != fundus.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "fundus/augmented/modality shapes differ");
  }
  for (const Mat* m : {&fundus, &augmented, &modality}) {
    for (std::size_t r = 0; r < m->rows(); ++r) {
      const double n = norm2(m->row(r));
      if (!(std::abs(n - 1.0) <= 1e-8)) {
        throw Error(ErrorCode::InvalidConfig,
                    "embedding row " + std::to_string(r) + " has norm " + std::to_string(n));
      }
    }
  }
}

void LossConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw Error(ErrorCode::InvalidConfig, "tau must be positive, got " + std::to_string(tau));
  }
  if (!(margin >= 0.0) || !std::isfinite(margin)) {
    throw Error(ErrorCode::InvalidConfig, "margin must be >= 0");
  }
  if (!use_transform_term && !use_modality_term) {
    throw Error(ErrorCode::InvalidConfig, "at least one positive term must be enabled");
  }
  if (!use_negative_terms) {
    throw Error(ErrorCode::InvalidConfig, "negative terms cannot be disabled");
  }
}

const char* loss_mode_name(LossMode mode) {
  switch (mode) {
    case LossMode::Ours: return "ours";
    case LossMode::EnlargedData: return "enlarged-data";
    case LossMode::AsAugmentation: return "as-augmentation";
  }
  return "?";
}

LossMode parse_loss_mode(const std::string& name) {
  if (name == "ours") return LossMode::Ours;
  if (name == "enlarged-data") return LossMode::EnlargedData;
  if (name == "as-augmentation") return LossMode::AsAugmentation;
  throw Error(ErrorCode::InvalidConfig, "unknown mode '" + name + "'");
}

LossConfig preset_for_mode(LossMode mode, LossConfig base) {
  if (mode != LossMode::Ours) {
    base.use_transform_term = true;
    base.use_modality_term = false;
  }
  return base;
}

namespace {

void check_index(const EmbeddingBatch& batch, std::size_t i) {
  if (i >= batch.size()) {
    throw Error(ErrorCode::IndexOutOfRange,
                std::to_string(i) + " not below batch size " + std::to_string(batch.size()));
  }
}

double log_sum_exp(std::span<const double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - mx);
  return mx + std::log(s);
}

// Logits f_k . q / tau for every k.
Vec query_logits(const Mat& fundus, std::span<const double> query, double tau) {
  Vec z(fundus.rows());
  for (std::size_t k = 0; k < fundus.rows(); ++k) z[k] = dot(fundus.row(k), query) / tau;
  return z;
}

// Column-wise softmax statistics for one set of queries: logits(k, j) is
// f_k . q_j / tau and lse[j] normalizes column j.
struct QuerySoftmax {
  Mat logits;
  Vec lse;

  double log_prob(std::size_t k, std::size_t j) const { return logits(k, j) - lse[j]; }
  double prob(std::size_t k, std::size_t j) const { return std::exp(log_prob(k, j)); }

  // log(1 - P(k|q_j)) without cancellation when P is close to 1.
  double log_complement(std::size_t k, std::size_t j) const {
    const double p = prob(k, j);
    double out;
    if (p < 0.5) {
      out = std::log1p(-p);
    } else {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < logits.rows(); ++r)
        if (r != k) mx = std::max(mx, logits(r, j));
      double s = 0.0;
      for (std::size_t r = 0; r < logits.rows(); ++r)
        if (r != k) s += std::exp(logits(r, j) - mx);
      out = mx + std::log(s) - lse[j];
    }
    if (!std::isfinite(out)) {
      throw Error(ErrorCode::NumericalOverflow, "1 - P(" + std::to_string(k) + "|" +
                                                    std::to_string(j) + ") underflowed to 0");
    }
    return out;
  }
};

QuerySoftmax softmax_over(const Mat& fundus, const Mat& queries, double tau) {
  QuerySoftmax s{matmul_abt(fundus, queries), Vec(queries.rows())};
  for (double& v : s.logits.values()) v /= tau;
  const std::size_t n = fundus.rows();
  Vec column(n);
  for (std::size_t j = 0; j < queries.rows(); ++j) {
    for (std::size_t k = 0; k < n; ++k) column[k] = s.logits(k, j);
    s.lse[j] = log_sum_exp(column);
  }
  return s;
}

// Accumulates dL/dlogits into the embedding gradients of F and the queries.
void backprop_logits(const Mat& dlogits, const Mat& fundus, const Mat& queries, double tau,
                     Mat& dfundus, Mat& dqueries) {
  const std::size_t n = fundus.rows();
  const std::size_t d = fundus.cols();
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < queries.rows(); ++j) {
      const double g = dlogits(k, j) / tau;
      if (g == 0.0) continue;
      const auto fk = fundus.row(k);
      const auto qj = queries.row(j);
      auto dfk = dfundus.row(k);
      auto dqj = dqueries.row(j);
      for (std::size_t c = 0; c < d; ++c) {
        dfk[c] += g * qj[c];
        dqj[c] += g * fk[c];
      }
    }
  }
}

// Per-patient losses, plus the gradient when `grad` is non-null.
LossValue evaluate(const EmbeddingBatch& batch, const LossConfig& cfg, LossGradient* grad) {
  cfg.validate();
  batch.validate();
  const std::size_t n = batch.size();
  const double tau = cfg.tau;

  const QuerySoftmax by_aug = softmax_over(batch.fundus, batch.augmented, tau);
  const QuerySoftmax by_fundus = softmax_over(batch.fundus, batch.fundus, tau);
  const QuerySoftmax by_modality = softmax_over(batch.fundus, batch.modality, tau);

  // log(1 - P(i|q_j)) for i != j; diagonal unused.
  Mat neg_fundus(n, n), neg_modality(n, n);
  if (cfg.use_negative_terms) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        neg_fundus(i, j) = by_fundus.log_complement(i, j);
        neg_modality(i, j) = by_modality.log_complement(i, j);
      }
  }

  LossValue out;
  out.per_patient.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double li = 0.0;
    if (cfg.use_transform_term) li -= by_aug.log_prob(i, i);
    if (cfg.use_modality_term) li -= by_modality.log_prob(i, i) - cfg.margin / tau;
    if (cfg.use_negative_terms) {
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        li -= neg_fundus(i, j);
        li -= neg_modality(i, j);
      }
    }
    // Rounding can leave a tiny negative value when every probability is ~1.
    out.per_patient[i] = std::max(li, 0.0);
  }
  double total = 0.0;
  for (double li : out.per_patient) total += li;
  out.total = total / static_cast<double>(n);
  if (!std::isfinite(out.total)) throw Error(ErrorCode::NumericalOverflow, "non-finite loss");

  if (grad == nullptr) return out;

  const double inv_n = 1.0 / static_cast<double>(n);
  Mat d_aug(n, n), d_fundus(n, n), d_modality(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double delta = k == i ? 1.0 : 0.0;
      if (cfg.use_transform_term) d_aug(k, i) += inv_n * (by_aug.prob(k, i) - delta);
      if (cfg.use_modality_term) d_modality(k, i) += inv_n * (by_modality.prob(k, i) - delta);
    }
  }
  if (cfg.use_negative_terms) {
    // d/dz_kj of -log(1 - P_ij) = w_ij (delta_ki - P_kj), w_ij = P_ij / (1 - P_ij).
    const auto add_negatives = [&](const QuerySoftmax& s, const Mat& log_comp, Mat& dl) {
      for (std::size_t j = 0; j < n; ++j) {
        double wsum = 0.0;
        Vec w(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          if (i == j) continue;
          w[i] = std::exp(s.log_prob(i, j) - log_comp(i, j));
          wsum += w[i];
        }
        for (std::size_t k = 0; k < n; ++k) dl(k, j) += inv_n * (w[k] - s.prob(k, j) * wsum);
      }
    };
    add_negatives(by_fundus, neg_fundus, d_fundus);
    add_negatives(by_modality, neg_modality, d_modality);
  }

  const std::size_t d = batch.dim();
  grad->fundus = Mat(n, d);
  grad->augmented = Mat(n, d);
  grad->modality = Mat(n, d);
  backprop_logits(d_aug, batch.fundus, batch.augmented, tau, grad->fundus, grad->augmented);
  backprop_logits(d_modality, batch.fundus, batch.modality, tau, grad->fundus, grad->modality);
  Mat d_fundus_queries(n, d);
  backprop_logits(d_fundus, batch.fundus, batch.fundus, tau, grad->fundus, d_fundus_queries);
  for (std::size_t x = 0; x < grad->fundus.size(); ++x)
    grad->fundus.values()[x] += d_fundus_queries.values()[x];
  return out;
}

}  // namespace

double positive_prob_transform(const EmbeddingBatch& batch, std::size_t i, const LossConfig& cfg) {
  cfg.validate();
  check_index(batch, i);
  const Vec z = query_logits(batch.fundus, batch.augmented.row(i), cfg.tau);
  return std::exp(z[i] - log_sum_exp(z));
}

double positive_prob_modality(const EmbeddingBatch& batch, std::size_t i, const LossConfig& cfg) {
  cfg.validate();
  check_index(batch, i);
  const Vec z = query_logits(batch.fundus, batch.modality.row(i), cfg.tau);
  return std::exp(z[i] - cfg.margin / cfg.tau - log_sum_exp(z));
}

double negative_prob(const EmbeddingBatch& batch, std::size_t i, std::size_t j,
                     QueryModality query, const LossConfig& cfg) {
  cfg.validate();
  check_index(batch, i);
  check_index(batch, j);
  if (i == j) throw Error(ErrorCode::SameIndex, "negative pair needs i != j");
  const Mat& queries = query == QueryModality::Fundus ? batch.fundus : batch.modality;
  const Vec z = query_logits(batch.fundus, queries.row(j), cfg.tau);
  return std::exp(z[i] - log_sum_exp(z));
}

double patient_loss(const EmbeddingBatch& batch, std::size_t i, const LossConfig& cfg) {
  check_index(batch, i);
  return evaluate(batch, cfg, nullptr).per_patient[i];
}

LossValue batch_loss(const EmbeddingBatch& batch, const LossConfig& cfg) {
  return evaluate(batch, cfg, nullptr);
}

LossGradient batch_loss_gradient(const EmbeddingBatch& batch, const LossConfig& cfg) {
  LossGradient g;
  evaluate(batch, cfg, &g);
  return g;
}

LossValue batch_loss_with_gradient(const EmbeddingBatch& batch, const LossConfig& cfg,
                                   LossGradient& grad) {
  return evaluate(batch, cfg, &grad);
}

}  // namespace mmssl

#include "mmssl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "mmssl/error.hpp"

namespace mmssl {

const char* knn_vote_name(KnnVote vote) {
  return vote == KnnVote::Majority ? "majority" : "weighted";
}

KnnVote parse_knn_vote(const std::string& name) {
  if (name == "majority") return KnnVote::Majority;
  if (name == "weighted") return KnnVote::SimilarityWeighted;
  throw Error(ErrorCode::InvalidConfig, "unknown KNN vote '" + name + "' (majority|weighted)");
}

KnnResult knn_classify(const Mat& train_embeddings, std::span<const std::size_t> train_labels,
                       const Mat& query_embeddings, const KnnConfig& cfg, std::size_t n_classes) {
  const std::size_t n_train = train_embeddings.rows();
  if (n_train == 0) throw Error(ErrorCode::EmptyTrainSet, "no training embeddings");
  if (train_labels.size() != n_train) {
    throw Error(ErrorCode::LengthMismatch, "train labels vs embeddings");
  }
  if (cfg.k == 0) throw Error(ErrorCode::InvalidConfig, "k must be >= 1");
  if (cfg.k > n_train) {
    throw Error(ErrorCode::KTooLarge, "k = " + std::to_string(cfg.k) + " exceeds " +
                                          std::to_string(n_train) + " training points");
  }
  if (query_embeddings.rows() > 0 && query_embeddings.cols() != train_embeddings.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "query vs train embedding width");
  }
  if (n_classes == 0) n_classes = *std::max_element(train_labels.begin(), train_labels.end()) + 1;
  for (std::size_t l : train_labels)
    if (l >= n_classes) throw Error(ErrorCode::InvalidConfig, "train label out of range");

  KnnResult out;
  out.predictions.resize(query_embeddings.rows());
  out.class_scores = Mat(query_embeddings.rows(), n_classes);
  out.positive_scores.assign(query_embeddings.rows(), 0.0);

  std::vector<double> sims(n_train);
  std::vector<std::size_t> order(n_train);
  std::vector<double> votes(n_classes), sim_sums(n_classes);
  for (std::size_t q = 0; q < query_embeddings.rows(); ++q) {
    const auto qrow = query_embeddings.row(q);
    for (std::size_t t = 0; t < n_train; ++t)
      sims[t] = std::clamp(dot(train_embeddings.row(t), qrow), -1.0, 1.0);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cfg.k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        return sims[a] != sims[b] ? sims[a] > sims[b] : a < b;
                      });
    std::fill(votes.begin(), votes.end(), 0.0);
    std::fill(sim_sums.begin(), sim_sums.end(), 0.0);
    double total = 0.0;
    for (std::size_t r = 0; r < cfg.k; ++r) {
      const std::size_t t = order[r];
      const double w = cfg.vote == KnnVote::Majority ? 1.0 : std::exp(sims[t] / cfg.weight_tau);
      votes[train_labels[t]] += w;
      sim_sums[train_labels[t]] += sims[t];
      total += w;
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < n_classes; ++c) {
      if (votes[c] > votes[best] || (votes[c] == votes[best] && sim_sums[c] > sim_sums[best])) best = c;
    }
    out.predictions[q] = best;
    for (std::size_t c = 0; c < n_classes; ++c) out.class_scores(q, c) = votes[c] / total;
    if (n_classes > 1) out.positive_scores[q] = out.class_scores(q, 1);
  }
  return out;
}

double auc(std::span<const double> scores, std::span<const std::size_t> binary_labels) {
  if (scores.size() != binary_labels.size()) throw Error(ErrorCode::LengthMismatch, "scores vs labels");
  // Rank-sum form of the pairwise count, with average ranks for ties.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t l : binary_labels) {
    if (l > 1) throw Error(ErrorCode::InvalidConfig, "AUC labels must be 0 or 1");
    n_pos += l;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(ErrorCode::SingleClass, "AUC needs both classes");
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t r = i; r <= j; ++r)
      if (binary_labels[order[r]] == 1) positive_rank_sum += avg_rank;
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos);
  const double u = positive_rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

double macro_auc(const Mat& class_scores, std::span<const std::size_t> labels, std::size_t n_classes) {
  if (class_scores.rows() != labels.size()) throw Error(ErrorCode::LengthMismatch, "scores vs labels");
  if (n_classes == 2) {
    Vec s(labels.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = class_scores(i, 1);
    return auc(s, labels);
  }
  double sum = 0.0;
  std::size_t used = 0;
  Vec s(labels.size());
  std::vector<std::size_t> is_class(labels.size());
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      s[i] = class_scores(i, c);
      is_class[i] = labels[i] == c ? 1 : 0;
      pos += is_class[i];
    }
    if (pos == 0 || pos == labels.size()) continue;
    sum += auc(s, is_class);
    ++used;
  }
  if (used == 0) throw Error(ErrorCode::SingleClass, "no class has both positives and negatives");
  return sum / static_cast<double>(used);
}

MetricsReport classification_metrics(std::span<const std::size_t> predictions,
                                     std::span<const std::size_t> labels, std::size_t n_classes) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                               std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw Error(ErrorCode::LengthMismatch, "no labels");
  std::vector<std::size_t> tp(n_classes), fp(n_classes), fn(n_classes);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= n_classes || predictions[i] >= n_classes) {
      throw Error(ErrorCode::InvalidConfig, "label outside [0, n_classes)");
    }
    if (predictions[i] == labels[i]) {
      ++correct;
      ++tp[labels[i]];
    } else {
      ++fp[predictions[i]];
      ++fn[labels[i]];
    }
  }
  MetricsReport r;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  for (std::size_t c = 0; c < n_classes; ++c) {
    ClassMetrics m;
    const auto ratio = [](std::size_t num, std::size_t den) {
      return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    m.precision = ratio(tp[c], tp[c] + fp[c]);
    m.recall = ratio(tp[c], tp[c] + fn[c]);
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    m.support = tp[c] + fn[c];
    r.precision += m.precision;
    r.recall += m.recall;
    r.f1 += m.f1;
    r.per_class.push_back(m);
  }
  const double nc = static_cast<double>(n_classes);
  r.precision /= nc;
  r.recall /= nc;
  r.f1 /= nc;
  return r;
}

// ---------------------------------------------------------------------------
// Linear probe.

namespace {

Vec softmax_row(const ProbeModel& model, std::span<const double> x) {
  const std::size_t c = model.weights.rows();
  Vec logits(c);
  for (std::size_t k = 0; k < c; ++k) logits[k] = dot(model.weights.row(k), x) + model.bias[k];
  const double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double& v : logits) s += (v = std::exp(v - mx));
  for (double& v : logits) v /= s;
  return logits;
}

}  // namespace

double probe_loss_and_grad(const ProbeModel& model, const Mat& inputs,
                           std::span<const std::size_t> labels, ProbeModel* grad) {
  if (inputs.rows() != labels.size()) throw Error(ErrorCode::LengthMismatch, "probe inputs vs labels");
  if (inputs.rows() == 0) throw Error(ErrorCode::EmptyTrainSet, "probe has no training rows");
  const std::size_t c = model.weights.rows();
  if (grad) {
    grad->weights = Mat(c, model.weights.cols());
    grad->bias.assign(c, 0.0);
  }
  const double inv_n = 1.0 / static_cast<double>(inputs.rows());
  double loss = 0.0;
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    const auto x = inputs.row(i);
    const Vec p = softmax_row(model, x);
    loss -= std::log(std::max(p[labels[i]], 1e-300)) * inv_n;
    if (!grad) continue;
    for (std::size_t k = 0; k < c; ++k) {
      const double g = (p[k] - (k == labels[i] ? 1.0 : 0.0)) * inv_n;
      grad->bias[k] += g;
      auto gw = grad->weights.row(k);
      for (std::size_t j = 0; j < x.size(); ++j) gw[j] += g * x[j];
    }
  }
  return loss;
}

ProbeModel train_probe(const Mat& inputs, std::span<const std::size_t> labels, std::size_t n_classes,
                       const ProbeConfig& cfg) {
  if (n_classes < 2) throw Error(ErrorCode::InvalidConfig, "probe needs at least two classes");
  for (std::size_t l : labels)
    if (l >= n_classes) throw Error(ErrorCode::InvalidConfig, "probe label out of range");
  ProbeModel model{Mat(n_classes, inputs.cols()), Vec(n_classes, 0.0)};
  ProbeModel grad;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    probe_loss_and_grad(model, inputs, labels, &grad);
    for (std::size_t x = 0; x < model.weights.size(); ++x)
      model.weights.values()[x] -= cfg.lr * grad.weights.values()[x];
    for (std::size_t k = 0; k < n_classes; ++k) model.bias[k] -= cfg.lr * grad.bias[k];
  }
  return model;
}

Mat probe_predict_proba(const ProbeModel& model, const Mat& inputs) {
  Mat out(inputs.rows(), model.weights.rows());
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    const Vec p = softmax_row(model, inputs.row(i));
    std::copy(p.begin(), p.end(), out.row(i).begin());
  }
  return out;
}

MetricsReport linear_probe(const Mat& train_embeddings, std::span<const std::size_t> train_labels,
                           const Mat& test_embeddings, std::span<const std::size_t> test_labels,
                           std::size_t n_classes, const ProbeConfig& cfg) {
  const ProbeModel model = train_probe(train_embeddings, train_labels, n_classes, cfg);
  const Mat proba = probe_predict_proba(model, test_embeddings);
  std::vector<std::size_t> preds(proba.rows());
  for (std::size_t i = 0; i < proba.rows(); ++i) {
    const auto row = proba.row(i);
    // max_element returns the first maximum, so exact ties go to class 0.
    preds[i] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  MetricsReport r = classification_metrics(preds, test_labels, n_classes);
  r.auc = macro_auc(proba, test_labels, n_classes);
  return r;
}

// ---------------------------------------------------------------------------
// Principal-component projection by subspace iteration with a 2x2
// Rayleigh-Ritz step.

Projection2 pca_project2(const Mat& embeddings) {
  const std::size_t n = embeddings.rows();
  const std::size_t d = embeddings.cols();
  if (n < 2) throw Error(ErrorCode::InsufficientSamples, "projection needs at least two rows");
  if (d < 2) throw Error(ErrorCode::DimensionMismatch, "projection needs at least two columns");

  Vec mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += embeddings(i, j);
  for (double& m : mean) m /= static_cast<double>(n);
  Mat centred(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centred(i, j) = embeddings(i, j) - mean[j];

  Mat cov(d, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = centred.row(i);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) cov(a, b) += r[a] * r[b];
  }
  double trace = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      cov(a, b) /= static_cast<double>(n - 1);
      cov(b, a) = cov(a, b);
    }
    trace += cov(a, a);
  }
  if (!(trace > 1e-24)) throw Error(ErrorCode::DegenerateCovariance, "all rows are identical");

  const auto matvec = [&](const Vec& v) {
    Vec out(d, 0.0);
    for (std::size_t a = 0; a < d; ++a) out[a] = dot(cov.row(a), v);
    return out;
  };
  // Orthonormalizes (u, v) in place; v may come out zero when the subspace is
  // rank one, in which case any unit vector orthogonal to u is used.
  const auto orthonormalize = [&](Vec& u, Vec& v) {
    const double nu = norm2(u);
    for (double& x : u) x /= nu;
    const double nv0 = norm2(v);
    const double p = dot(u, v);
    for (std::size_t a = 0; a < d; ++a) v[a] -= p * u[a];
    double nv = norm2(v);
    if (!(nv > 1e-10 * nv0)) {
      // Gram-Schmidt against the coordinate axis least aligned with u.
      std::size_t axis = 0;
      for (std::size_t a = 1; a < d; ++a)
        if (std::abs(u[a]) < std::abs(u[axis])) axis = a;
      std::fill(v.begin(), v.end(), 0.0);
      v[axis] = 1.0;
      const double q = dot(u, v);
      for (std::size_t a = 0; a < d; ++a) v[a] -= q * u[a];
      nv = norm2(v);
    }
    for (double& x : v) x /= nv;
  };

  // Start from the two covariance columns with the largest norms.
  std::vector<std::size_t> cols(d);
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  std::sort(cols.begin(), cols.end(), [&](std::size_t a, std::size_t b) {
    const double na = dot(cov.row(a), cov.row(a)), nb = dot(cov.row(b), cov.row(b));
    return na != nb ? na > nb : a < b;
  });
  Vec u(cov.row(cols[0]).begin(), cov.row(cols[0]).end());
  Vec v(cov.row(cols[1]).begin(), cov.row(cols[1]).end());
  orthonormalize(u, v);

  double l1 = 0.0, l2 = 0.0;
  for (int iter = 0; iter < 20000; ++iter) {
    Vec cu = matvec(u), cv = matvec(v);
    // Rayleigh-Ritz on span(u, v).
    const double a11 = dot(u, cu), a12 = dot(u, cv), a22 = dot(v, cv);
    const double half_diff = 0.5 * (a11 - a22);
    const double disc = std::sqrt(half_diff * half_diff + a12 * a12);
    const double mid = 0.5 * (a11 + a22);
    l1 = mid + disc;
    l2 = mid - disc;
    double c = 1.0, s = 0.0;
    if (disc > 0.0) {
      const double theta = 0.5 * std::atan2(2.0 * a12, a11 - a22);
      c = std::cos(theta);
      s = std::sin(theta);
    }
    Vec ru(d), rv(d);
    for (std::size_t a = 0; a < d; ++a) {
      ru[a] = c * u[a] + s * v[a];
      rv[a] = -s * u[a] + c * v[a];
    }
    // Residual of the Ritz pairs.
    const Vec cru = matvec(ru), crv = matvec(rv);
    double res = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      res = std::max(res, std::abs(cru[a] - l1 * ru[a]));
      res = std::max(res, std::abs(crv[a] - l2 * rv[a]));
    }
    u = ru;
    v = rv;
    if (res <= 1e-13 * std::max(trace, 1.0)) break;
    u = cru;
    v = crv;
    orthonormalize(u, v);
  }

  for (Vec* comp : {&u, &v}) {
    std::size_t arg = 0;
    for (std::size_t a = 1; a < d; ++a)
      if (std::abs((*comp)[a]) > std::abs((*comp)[arg])) arg = a;
    if ((*comp)[arg] < 0.0)
      for (double& x : *comp) x = -x;
  }

  Projection2 out;
  out.components = Mat(2, d);
  std::copy(u.begin(), u.end(), out.components.row(0).begin());
  std::copy(v.begin(), v.end(), out.components.row(1).begin());
  out.variances = {std::max(l1, 0.0), std::max(l2, 0.0)};
  out.coords = Mat(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    out.coords(i, 0) = dot(centred.row(i), u);
    out.coords(i, 1) = dot(centred.row(i), v);
  }
  return out;
}

TTestResult t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw Error(ErrorCode::InsufficientSamples, "each sample needs at least two values");
  }
  const auto mean = [](std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  };
  const auto ss = [](std::span<const double> x, double m) {
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s;
  };
  const double ma = mean(a), mb = mean(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  TTestResult r;
  r.df = na + nb - 2.0;
  const double pooled = (ss(a, ma) + ss(b, mb)) / r.df;
  if (pooled == 0.0) {
    if (ma == mb) return r;
    throw Error(ErrorCode::DegenerateTest, "zero variance with different means");
  }
  r.t = (ma - mb) / std::sqrt(pooled * (1.0 / na + 1.0 / nb));
  const boost::math::students_t dist(r.df);
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

// ---------------------------------------------------------------------------

namespace {

std::string num(double v) { return format_double(v); }

}  // namespace

std::string format_metrics_text(const MetricsReport& report, const std::string& prefix) {
  std::string out;
  const auto line = [&](const std::string& key, const std::string& value) {
    out += prefix + key + " = " + value + "\n";
  };
  line("auc", report.auc ? num(*report.auc) : "");
  line("accuracy", num(report.accuracy));
  line("precision", num(report.precision));
  line("recall", num(report.recall));
  line("f1", num(report.f1));
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const auto& m = report.per_class[c];
    const std::string key = "class." + std::to_string(c) + ".";
    line(key + "precision", num(m.precision));
    line(key + "recall", num(m.recall));
    line(key + "f1", num(m.f1));
    line(key + "support", std::to_string(m.support));
  }
  return out;
}

std::string format_metrics_record(const MetricsReport& report) {
  return (report.auc ? num(*report.auc) : std::string()) + "," + num(report.accuracy) + "," +
         num(report.precision) + "," + num(report.recall) + "," + num(report.f1);
}

}  // namespace mmssl

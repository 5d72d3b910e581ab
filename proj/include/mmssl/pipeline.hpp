#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmssl/config.hpp"
#include "mmssl/data.hpp"
#include "mmssl/encoder.hpp"
#include "mmssl/eval.hpp"
#include "mmssl/optim.hpp"

namespace mmssl {

/// Loads cfg.dataset, or generates the synthetic dataset from cfg.data_seed.
Dataset resolve_dataset(const RunConfig& cfg);

struct TrainResult {
  EncoderParams initial_params;
  EncoderParams params;
  /// Mean batch loss of every epoch.
  std::vector<double> epoch_losses;
};

/// Forward, loss, backward and Adam update on one batch of raw inputs.
/// Returns the batch loss before the update.
double train_step(EncoderParams& params, AdamState& adam, const TripletInputs& inputs,
                  const LossConfig& loss, std::int64_t epoch);

/// Self-supervised training on `train` (labels are never read).
TrainResult train_encoder(const Dataset& train, const RunConfig& cfg, SeededRng& rng);

/// Embeddings of the unaugmented fundus (or modality) images.
Mat embed_dataset(const EncoderParams& params, const Dataset& dataset, bool modality = false);

/// Mean cos(f_i, g_i) between each patient's fundus and modality embeddings.
double mean_modality_cosine(const EncoderParams& params, const Dataset& dataset);

/// KNN on frozen features; k is capped at the training-set size.
MetricsReport knn_metrics(const EncoderParams& params, const Dataset& train, const Dataset& test,
                          const KnnConfig& knn);

MetricsReport probe_metrics(const EncoderParams& params, const Dataset& train, const Dataset& test,
                            const ProbeConfig& probe);

/// Positions of the samples in and out of one fold.
struct FoldIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

std::vector<FoldIndices> fold_indices(const Dataset& dataset, std::size_t k, SeededRng& rng);

struct FoldOutcome {
  MetricsReport metrics;
  /// Same KNN evaluation with the encoder at initialisation.
  MetricsReport untrained_metrics;
  double modality_cosine_before = 0.0;
  double modality_cosine_after = 0.0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

struct CvReport {
  std::vector<FoldOutcome> folds;
  MetricsReport mean;
  MetricsReport stddev;
};

/// k-fold cross-validation: per fold, train on the other folds' images and
/// classify the held-out fold by KNN on frozen features.
CvReport run_cv(const RunConfig& cfg);

/// Trains on `train` and reports held-out KNN metrics for `test`.
FoldOutcome train_and_evaluate(const Dataset& train, const Dataset& test, const RunConfig& cfg,
                               SeededRng& rng);

std::string format_cv_report(const CvReport& report);

/// Writes params.bin, loss.csv and config.txt into `out_dir`.
TrainResult run_train(const RunConfig& cfg, const std::string& out_dir);

/// CSV: patient_id,label,e0..e{d-1},pc1,pc2
std::string embeddings_csv(const EncoderParams& params, const Dataset& dataset);

/// Reference and query sets for eval-knn / eval-probe. With query_dataset
/// set, the reference is the whole of `dataset`; otherwise fold eval_fold of
/// a stratified split (seeded by seed, or data_seed when seed is unset) is
/// held out.
struct EvalSplit {
  Dataset train;
  Dataset query;
};
EvalSplit resolve_eval_split(const RunConfig& cfg);

/// Loads cfg.model; InvalidConfig when it is unset.
EncoderParams load_model(const RunConfig& cfg);

/// "key = value" report of KNN (or linear-probe) metrics of cfg.model.
std::string run_eval_knn(const RunConfig& cfg);
std::string run_eval_probe(const RunConfig& cfg);

/// Generates the synthetic dataset and writes it to cfg.out.
Dataset run_generate(const RunConfig& cfg);

/// Samples for a t-test: plain numbers (whitespace or comma separated), or,
/// for a "key = value" report, every fold.<i>.<metric> value.
std::vector<double> read_samples(const std::string& path, const std::string& metric);
std::string format_ttest(const TTestResult& result);

}  // namespace mmssl

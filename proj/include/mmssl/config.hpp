#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmssl/data.hpp"
#include "mmssl/eval.hpp"
#include "mmssl/loss.hpp"
#include "mmssl/optim.hpp"

namespace mmssl {

/// Everything a run needs. Defaults follow the published training recipe
/// where it states a value; `epochs` defaults to the desk-scale 200.
struct RunConfig {
  std::optional<std::uint64_t> seed;

  std::string dataset;        // path; empty means generate synthetic data
  std::string query_dataset;  // eval-knn / eval-probe: held-out set; empty means use a fold
  std::string model;          // encoder parameter file for eval / export
  std::string out;            // output directory or file, per command
  bool binary = false;        // generate: write the binary dataset format

  std::uint64_t data_seed = 1;
  SyntheticConfig synthetic;

  std::vector<std::size_t> encoder_dims = kDefaultEncoderDims;

  LossConfig loss;
  LossMode mode = LossMode::Ours;

  std::size_t batch_patients = kDefaultBatchPatients;
  std::size_t epochs = 200;
  /// Optimizer steps per epoch; 0 means enough batches to cover the training
  /// set once, ceil(patients / batch_patients).
  std::size_t batches_per_epoch = 0;
  AdamConfig adam;
  AugmentConfig augment;

  KnnConfig knn;
  std::size_t folds = 5;
  std::size_t eval_fold = 0;
  ProbeConfig probe;

  /// Sets one key from its text form. Throws InvalidConfig on unknown keys or
  /// unparsable values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  /// Applies a "key = value" file; '#' starts a comment.
  void load_file(const std::string& path);
  void parse_text(const std::string& text, const std::string& origin = "<config>");
  /// Every key in a fixed order, one "key = value" per line. Feeding the
  /// output back through parse_text() reproduces this config.
  std::string dump() const;

  /// Cross-field checks (encoder input width vs image size and so on).
  void validate() const;
  std::uint64_t require_seed() const;

  static const std::vector<std::string>& keys();
};

}  // namespace mmssl

#include "mmssl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mmssl/error.hpp"

namespace mmssl {

namespace {

std::string num(double v) { return format_double(v); }

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

EmbeddingBatch split_embeddings(const Mat& stacked, std::size_t n) {
  return EmbeddingBatch{row_slice(stacked, 0, n), row_slice(stacked, n, n), row_slice(stacked, 2 * n, n)};
}

}  // namespace

Dataset resolve_dataset(const RunConfig& cfg) {
  if (!cfg.dataset.empty()) return load_dataset(cfg.dataset);
  SeededRng rng(cfg.data_seed);
  return generate_synthetic(cfg.synthetic, rng);
}

double train_step(EncoderParams& params, AdamState& adam, const TripletInputs& inputs,
                  const LossConfig& loss, std::int64_t epoch) {
  const std::size_t n = inputs.fundus.rows();
  const Mat* parts[] = {&inputs.fundus, &inputs.augmented, &inputs.modality};
  ForwardResult fwd = forward(params, vstack(parts), true);
  LossGradient grad;
  const LossValue value = batch_loss_with_gradient(split_embeddings(fwd.embeddings, n), loss, grad);
  const Mat* grad_parts[] = {&grad.fundus, &grad.augmented, &grad.modality};
  const EncoderGrads g = backward(params, fwd.trace, vstack(grad_parts));
  adam_step(adam, params, g, epoch);
  return value.total;
}

TrainResult train_encoder(const Dataset& train, const RunConfig& cfg, SeededRng& rng) {
  cfg.validate();
  if (train.height * train.width != cfg.encoder_dims.front()) {
    throw Error(ErrorCode::InvalidConfig, "encoder input " + std::to_string(cfg.encoder_dims.front()) +
                                              " does not match " + std::to_string(train.height) + "x" +
                                              std::to_string(train.width) + " images");
  }
  SeededRng init_rng = rng.split();
  SeededRng batch_rng = rng.split();
  TrainResult result;
  result.params = init_params(cfg.encoder_dims, init_rng);
  result.initial_params = result.params;
  AdamState adam = AdamState::for_params(result.params, cfg.adam);
  const LossConfig loss = preset_for_mode(cfg.mode, cfg.loss);

  const std::size_t n = std::min(cfg.batch_patients, train.size());
  const std::size_t steps =
      cfg.batches_per_epoch > 0 ? cfg.batches_per_epoch : (train.size() + n - 1) / std::max<std::size_t>(n, 1);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double sum = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      const TripletInputs inputs = make_mode_batch(train, n, cfg.mode, cfg.augment, batch_rng);
      sum += train_step(result.params, adam, inputs, loss, static_cast<std::int64_t>(epoch));
    }
    result.epoch_losses.push_back(sum / static_cast<double>(steps));
  }
  return result;
}

Mat embed_dataset(const EncoderParams& params, const Dataset& dataset, bool modality) {
  std::vector<Image> images;
  images.reserve(dataset.size());
  for (const auto& s : dataset.samples) images.push_back(modality ? s.modality : s.fundus);
  if (images.empty()) return Mat(0, params.output_dim());
  return forward(params, flatten_images(images), false).embeddings;
}

double mean_modality_cosine(const EncoderParams& params, const Dataset& dataset) {
  if (dataset.size() == 0) throw Error(ErrorCode::InsufficientSamples, "empty dataset");
  const Mat f = embed_dataset(params, dataset, false);
  const Mat g = embed_dataset(params, dataset, true);
  double sum = 0.0;
  for (std::size_t i = 0; i < f.rows(); ++i) sum += cosine_similarity(f.row(i), g.row(i));
  return sum / static_cast<double>(f.rows());
}

MetricsReport knn_metrics(const EncoderParams& params, const Dataset& train, const Dataset& test,
                          const KnnConfig& knn) {
  if (train.size() == 0) throw Error(ErrorCode::EmptyTrainSet, "no training patients");
  const std::size_t n_classes = std::max(train.n_classes, test.n_classes);
  KnnConfig capped = knn;
  capped.k = std::min(knn.k, train.size());
  const auto train_labels = train.labels();
  const auto test_labels = test.labels();
  const KnnResult r = knn_classify(embed_dataset(params, train), train_labels, embed_dataset(params, test),
                                   capped, n_classes);
  MetricsReport m = classification_metrics(r.predictions, test_labels, n_classes);
  m.auc = macro_auc(r.class_scores, test_labels, n_classes);
  return m;
}

MetricsReport probe_metrics(const EncoderParams& params, const Dataset& train, const Dataset& test,
                            const ProbeConfig& probe) {
  const std::size_t n_classes = std::max(train.n_classes, test.n_classes);
  const auto train_labels = train.labels();
  const auto test_labels = test.labels();
  return linear_probe(embed_dataset(params, train), train_labels, embed_dataset(params, test), test_labels,
                      n_classes, probe);
}

std::vector<FoldIndices> fold_indices(const Dataset& dataset, std::size_t k, SeededRng& rng) {
  std::vector<std::int64_t> ids;
  for (const auto& s : dataset.samples) ids.push_back(s.patient_id);
  const FoldSplit split = make_folds(ids, k, rng, dataset.labels());
  std::vector<FoldIndices> out(k);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const std::size_t fold = split.assignments.at(dataset.samples[i].patient_id);
    for (std::size_t f = 0; f < k; ++f) (f == fold ? out[f].test : out[f].train).push_back(i);
  }
  return out;
}

FoldOutcome train_and_evaluate(const Dataset& train, const Dataset& test, const RunConfig& cfg,
                               SeededRng& rng) {
  const TrainResult trained = train_encoder(train, cfg, rng);
  FoldOutcome out;
  out.metrics = knn_metrics(trained.params, train, test, cfg.knn);
  out.untrained_metrics = knn_metrics(trained.initial_params, train, test, cfg.knn);
  out.modality_cosine_before = mean_modality_cosine(trained.initial_params, train);
  out.modality_cosine_after = mean_modality_cosine(trained.params, train);
  if (!trained.epoch_losses.empty()) {
    out.initial_loss = trained.epoch_losses.front();
    out.final_loss = trained.epoch_losses.back();
  }
  return out;
}

CvReport run_cv(const RunConfig& cfg) {
  cfg.validate();
  SeededRng master(cfg.require_seed());
  const Dataset dataset = resolve_dataset(cfg);
  SeededRng fold_rng = master.split();
  const auto folds = fold_indices(dataset, cfg.folds, fold_rng);

  CvReport report;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    SeededRng run_rng = master.split();
    const Dataset train = dataset.subset(folds[f].train);
    const Dataset test = dataset.subset(folds[f].test);
    try {
      report.folds.push_back(train_and_evaluate(train, test, cfg, run_rng));
    } catch (const Error& e) {
      throw Error(e.code(), "fold " + std::to_string(f) + ": " + e.what());
    }
  }

  const double k = static_cast<double>(report.folds.size());
  const auto aggregate = [&](auto field) {
    double mean = 0.0;
    for (const auto& f : report.folds) mean += field(f.metrics);
    mean /= k;
    double var = 0.0;
    for (const auto& f : report.folds) var += (field(f.metrics) - mean) * (field(f.metrics) - mean);
    return std::pair{mean, k > 1 ? std::sqrt(var / (k - 1.0)) : 0.0};
  };
  const auto set = [&](auto field, auto member) {
    const auto [m, s] = aggregate(field);
    report.mean.*member = m;
    report.stddev.*member = s;
  };
  set([](const MetricsReport& m) { return m.accuracy; }, &MetricsReport::accuracy);
  set([](const MetricsReport& m) { return m.precision; }, &MetricsReport::precision);
  set([](const MetricsReport& m) { return m.recall; }, &MetricsReport::recall);
  set([](const MetricsReport& m) { return m.f1; }, &MetricsReport::f1);
  const bool all_auc = std::all_of(report.folds.begin(), report.folds.end(),
                                   [](const FoldOutcome& f) { return f.metrics.auc.has_value(); });
  if (all_auc) {
    const auto [m, s] = aggregate([](const MetricsReport& r) { return *r.auc; });
    report.mean.auc = m;
    report.stddev.auc = s;
  }
  return report;
}

std::string format_cv_report(const CvReport& report) {
  std::string out;
  for (std::size_t f = 0; f < report.folds.size(); ++f) {
    const auto& fo = report.folds[f];
    const std::string prefix = "fold." + std::to_string(f) + ".";
    out += format_metrics_text(fo.metrics, prefix);
    out += prefix + "untrained_accuracy = " + num(fo.untrained_metrics.accuracy) + "\n";
    out += prefix + "modality_cosine_before = " + num(fo.modality_cosine_before) + "\n";
    out += prefix + "modality_cosine_after = " + num(fo.modality_cosine_after) + "\n";
    out += prefix + "initial_loss = " + num(fo.initial_loss) + "\n";
    out += prefix + "final_loss = " + num(fo.final_loss) + "\n";
    out += prefix + "record = " + format_metrics_record(fo.metrics) + "\n";
  }
  MetricsReport mean = report.mean, sd = report.stddev;
  mean.per_class.clear();
  sd.per_class.clear();
  out += format_metrics_text(mean, "mean.");
  out += format_metrics_text(sd, "std.");
  out += "mean.record = " + format_metrics_record(mean) + "\n";
  return out;
}

TrainResult run_train(const RunConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  SeededRng master(cfg.require_seed());
  const Dataset dataset = resolve_dataset(cfg);
  namespace fs = std::filesystem;
  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create '" + out_dir + "': " + ec.message());

  TrainResult result = train_encoder(dataset, cfg, master);
  save_params(result.params, (dir / "params.bin").string());
  std::string csv = "epoch,loss\n";
  for (std::size_t e = 0; e < result.epoch_losses.size(); ++e)
    csv += std::to_string(e) + "," + num(result.epoch_losses[e]) + "\n";
  write_file(dir / "loss.csv", csv);
  write_file(dir / "config.txt", cfg.dump());
  return result;
}

std::string embeddings_csv(const EncoderParams& params, const Dataset& dataset) {
  const Mat emb = embed_dataset(params, dataset);
  const Projection2 proj = pca_project2(emb);
  std::string out = "patient_id,label";
  for (std::size_t c = 0; c < emb.cols(); ++c) out += ",e" + std::to_string(c);
  out += ",pc1,pc2\n";
  for (std::size_t i = 0; i < emb.rows(); ++i) {
    out += std::to_string(dataset.samples[i].patient_id) + "," + std::to_string(dataset.samples[i].label);
    for (double v : emb.row(i)) out += "," + num(v);
    out += "," + num(proj.coords(i, 0)) + "," + num(proj.coords(i, 1)) + "\n";
  }
  return out;
}

EvalSplit resolve_eval_split(const RunConfig& cfg) {
  Dataset dataset = resolve_dataset(cfg);
  if (!cfg.query_dataset.empty()) {
    Dataset query = load_dataset(cfg.query_dataset);
    if (query.height != dataset.height || query.width != dataset.width) {
      throw Error(ErrorCode::ShapeMismatch, "query_dataset image size differs from dataset");
    }
    return {std::move(dataset), std::move(query)};
  }
  SeededRng master(cfg.seed.value_or(cfg.data_seed));
  SeededRng fold_rng = master.split();
  const auto folds = fold_indices(dataset, cfg.folds, fold_rng);
  if (cfg.eval_fold >= folds.size()) {
    throw Error(ErrorCode::InvalidConfig, "eval_fold must be below folds");
  }
  return {dataset.subset(folds[cfg.eval_fold].train), dataset.subset(folds[cfg.eval_fold].test)};
}

EncoderParams load_model(const RunConfig& cfg) {
  if (cfg.model.empty()) throw Error(ErrorCode::InvalidConfig, "model: an encoder parameter file is required");
  return load_params(cfg.model);
}

std::string run_eval_knn(const RunConfig& cfg) {
  cfg.validate();
  const EncoderParams params = load_model(cfg);
  const EvalSplit split = resolve_eval_split(cfg);
  const MetricsReport m = knn_metrics(params, split.train, split.query, cfg.knn);
  return format_metrics_text(m) + "record = " + format_metrics_record(m) + "\n";
}

std::string run_eval_probe(const RunConfig& cfg) {
  cfg.validate();
  const EncoderParams params = load_model(cfg);
  const EvalSplit split = resolve_eval_split(cfg);
  const MetricsReport m = probe_metrics(params, split.train, split.query, cfg.probe);
  return format_metrics_text(m) + "record = " + format_metrics_record(m) + "\n";
}

Dataset run_generate(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.out.empty()) throw Error(ErrorCode::InvalidConfig, "out: an output path is required");
  SeededRng rng(cfg.data_seed);
  Dataset dataset = generate_synthetic(cfg.synthetic, rng);
  save_dataset(dataset, cfg.out, cfg.binary);
  return dataset;
}

std::vector<double> read_samples(const std::string& path, const std::string& metric) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  const auto parse = [&](const std::string& tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) {
      throw Error(ErrorCode::FormatError, path + ":" + std::to_string(line_no) + ": not a number: '" + tok + "'");
    }
    out.push_back(v);
  };
  while (std::getline(is, line)) {
    ++line_no;
    const auto eq = line.find('=');
    if (eq != std::string::npos) {
      std::istringstream key_in(line.substr(0, eq));
      std::string key;
      key_in >> key;
      const std::string suffix = "." + metric;
      if (key.rfind("fold.", 0) == 0 && key.size() > suffix.size() &&
          key.compare(key.size() - suffix.size(), suffix.size(), suffix) == 0 &&
          key.find('.', 5) == key.size() - suffix.size()) {
        std::istringstream val_in(line.substr(eq + 1));
        std::string tok;
        val_in >> tok;
        parse(tok);
      }
      continue;
    }
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) parse(tok);
  }
  return out;
}

std::string format_ttest(const TTestResult& result) {
  return "t = " + num(result.t) + "\np = " + num(result.p) + "\ndf = " + num(result.df) + "\n";
}

}  // namespace mmssl

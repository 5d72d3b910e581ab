#include "mmssl/mmssl.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "mmssl/error.hpp"
#include "mmssl/pipeline.hpp"

struct mmssl_config {
  mmssl::RunConfig cfg;
};
struct mmssl_dataset {
  mmssl::Dataset ds;
};
struct mmssl_encoder {
  mmssl::EncoderParams params;
};

namespace {

thread_local std::string g_last_error;

mmssl_status status_for(mmssl::ErrorCode code) {
  using mmssl::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidDims:
    case ErrorCode::InvalidK:
    case ErrorCode::KTooLarge:
      return MMSSL_ERR_CONFIG;
    case ErrorCode::IoError:
    case ErrorCode::FormatError:
      return MMSSL_ERR_IO;
    case ErrorCode::NumericalOverflow:
    case ErrorCode::ZeroVector:
    case ErrorCode::DegenerateCovariance:
    case ErrorCode::DegenerateTest:
      return MMSSL_ERR_NUMERICAL;
    default:
      return MMSSL_ERR_DATA;
  }
}

mmssl_status fail(mmssl_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <class F>
mmssl_status guard(F&& body) {
  try {
    g_last_error.clear();
    body();
    return MMSSL_OK;
  } catch (const mmssl::Error& e) {
    return fail(status_for(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(MMSSL_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MMSSL_ERR_INTERNAL, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

#define MMSSL_REQUIRE(ptr)                                                   \
  do {                                                                       \
    if ((ptr) == nullptr) return fail(MMSSL_ERR_ARGUMENT, #ptr " is null"); \
  } while (0)

}  // namespace

extern "C" {

const char* mmssl_version(void) { return "1.0.0"; }

const char* mmssl_last_error(void) { return g_last_error.c_str(); }

const char* mmssl_status_name(mmssl_status status) {
  switch (status) {
    case MMSSL_OK: return "ok";
    case MMSSL_ERR_CONFIG: return "config error";
    case MMSSL_ERR_IO: return "io error";
    case MMSSL_ERR_NUMERICAL: return "numerical error";
    case MMSSL_ERR_DATA: return "data error";
    case MMSSL_ERR_ARGUMENT: return "argument error";
    case MMSSL_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void mmssl_string_free(char* s) { std::free(s); }

mmssl_status mmssl_config_new(mmssl_config** out) {
  MMSSL_REQUIRE(out);
  return guard([&] { *out = new mmssl_config(); });
}

void mmssl_config_free(mmssl_config* cfg) { delete cfg; }

mmssl_status mmssl_config_set(mmssl_config* cfg, const char* key, const char* value) {
  MMSSL_REQUIRE(cfg);
  MMSSL_REQUIRE(key);
  MMSSL_REQUIRE(value);
  return guard([&] { cfg->cfg.set(key, value); });
}

mmssl_status mmssl_config_get(const mmssl_config* cfg, const char* key, char** value) {
  MMSSL_REQUIRE(cfg);
  MMSSL_REQUIRE(key);
  MMSSL_REQUIRE(value);
  return guard([&] { *value = dup_string(cfg->cfg.get(key)); });
}

mmssl_status mmssl_config_load_file(mmssl_config* cfg, const char* path) {
  MMSSL_REQUIRE(cfg);
  MMSSL_REQUIRE(path);
  return guard([&] { cfg->cfg.load_file(path); });
}

mmssl_status mmssl_config_parse_text(mmssl_config* cfg, const char* text) {
  MMSSL_REQUIRE(cfg);
  MMSSL_REQUIRE(text);
  return guard([&] { cfg->cfg.parse_text(text); });
}

mmssl_status mmssl_config_dump(const mmssl_config* cfg, char** text) {
  MMSSL_REQUIRE(cfg);
  MMSSL_REQUIRE(text);
  return guard([&] { *text = dup_string(cfg->cfg.dump()); });
}

mmssl_status mmssl_config_validate(const mmssl_config* cfg) {
  MMSSL_REQUIRE(cfg);
  return guard([&] { cfg->cfg.validate(); });
}

size_t mmssl_config_key_count(void) { return mmssl::RunConfig::keys().size(); }

const char* mmssl_config_key(size_t index) {
  const auto& keys = mmssl::RunConfig::keys();
  return index < keys.size() ? keys[index].c_str() : nullptr;
}

mmssl_status mmssl_dataset_generate(const mmssl_config* cfg, mmssl_dataset** out) {
  MMSSL_REQUIRE(cfg);
  MMSSL_REQUIRE(out);
  return guard([&] {
    cfg->cfg.synthetic.validate();
    mmssl::SeededRng rng(cfg->cfg.data_seed);
    *out = new mmssl_dataset{mmssl::generate_synthetic(cfg->cfg.synthetic, rng)};
  });
}

mmssl_status mmssl_dataset_load(const char* path, mmssl_dataset** out) {
  MMSSL_REQUIRE(path);
  MMSSL_REQUIRE(out);
  return guard([&] { *out = new mmssl_dataset{mmssl::load_dataset(path)}; });
}

mmssl_status mmssl_dataset_save(const mmssl_dataset* ds, const char* path, int binary) {
  MMSSL_REQUIRE(ds);
  MMSSL_REQUIRE(path);
  return guard([&] { mmssl::save_dataset(ds->ds, path, binary != 0); });
}

void mmssl_dataset_free(mmssl_dataset* ds) { delete ds; }

size_t mmssl_dataset_size(const mmssl_dataset* ds) { return ds == nullptr ? 0 : ds->ds.size(); }

mmssl_status mmssl_dataset_shape(const mmssl_dataset* ds, size_t* height, size_t* width, size_t* n_classes) {
  MMSSL_REQUIRE(ds);
  if (height != nullptr) *height = ds->ds.height;
  if (width != nullptr) *width = ds->ds.width;
  if (n_classes != nullptr) *n_classes = ds->ds.n_classes;
  return MMSSL_OK;
}

mmssl_status mmssl_dataset_sample(const mmssl_dataset* ds, size_t index, int64_t* patient_id, size_t* label) {
  MMSSL_REQUIRE(ds);
  if (index >= ds->ds.size()) return fail(MMSSL_ERR_ARGUMENT, "sample index out of range");
  if (patient_id != nullptr) *patient_id = ds->ds.samples[index].patient_id;
  if (label != nullptr) *label = ds->ds.samples[index].label;
  return MMSSL_OK;
}

mmssl_status mmssl_encoder_load(const char* path, mmssl_encoder** out) {
  MMSSL_REQUIRE(path);
  MMSSL_REQUIRE(out);
  return guard([&] { *out = new mmssl_encoder{mmssl::load_params(path)}; });
}

mmssl_status mmssl_encoder_init(const size_t* dims, size_t n_dims, uint64_t seed, mmssl_encoder** out) {
  MMSSL_REQUIRE(dims);
  MMSSL_REQUIRE(out);
  return guard([&] {
    mmssl::SeededRng rng(seed);
    *out = new mmssl_encoder{mmssl::init_params(std::vector<std::size_t>(dims, dims + n_dims), rng)};
  });
}

mmssl_status mmssl_encoder_save(const mmssl_encoder* enc, const char* path) {
  MMSSL_REQUIRE(enc);
  MMSSL_REQUIRE(path);
  return guard([&] { mmssl::save_params(enc->params, path); });
}

void mmssl_encoder_free(mmssl_encoder* enc) { delete enc; }

size_t mmssl_encoder_input_dim(const mmssl_encoder* enc) { return enc == nullptr ? 0 : enc->params.input_dim(); }

size_t mmssl_encoder_output_dim(const mmssl_encoder* enc) {
  return enc == nullptr ? 0 : enc->params.output_dim();
}

mmssl_status mmssl_encoder_embed(const mmssl_encoder* enc, const mmssl_dataset* ds, int modality, double* out,
                                 size_t capacity) {
  MMSSL_REQUIRE(enc);
  MMSSL_REQUIRE(ds);
  MMSSL_REQUIRE(out);
  const size_t needed = ds->ds.size() * enc->params.output_dim();
  if (capacity < needed) {
    return fail(MMSSL_ERR_ARGUMENT, "output buffer holds " + std::to_string(capacity) + " values, " +
                                        std::to_string(needed) + " needed");
  }
  return guard([&] {
    const mmssl::Mat emb = mmssl::embed_dataset(enc->params, ds->ds, modality != 0);
    std::memcpy(out, emb.values().data(), needed * sizeof(double));
  });
}

mmssl_loss_options mmssl_loss_options_default(void) {
  const mmssl::LossConfig d;
  return mmssl_loss_options{d.tau, d.margin, d.use_transform_term ? 1 : 0, d.use_modality_term ? 1 : 0,
                            d.use_negative_terms ? 1 : 0};
}

mmssl_status mmssl_batch_loss(size_t n, size_t d, const double* fundus, const double* augmented,
                              const double* modality, const mmssl_loss_options* options, double* loss,
                              double* grad) {
  MMSSL_REQUIRE(fundus);
  MMSSL_REQUIRE(augmented);
  MMSSL_REQUIRE(modality);
  MMSSL_REQUIRE(loss);
  return guard([&] {
    mmssl::LossConfig cfg;
    if (options != nullptr) {
      cfg.tau = options->tau;
      cfg.margin = options->margin;
      cfg.use_transform_term = options->use_transform_term != 0;
      cfg.use_modality_term = options->use_modality_term != 0;
      cfg.use_negative_terms = options->use_negative_terms != 0;
    }
    const auto mat = [&](const double* p) { return mmssl::Mat(n, d, std::vector<double>(p, p + n * d)); };
    const mmssl::EmbeddingBatch batch{mat(fundus), mat(augmented), mat(modality)};
    if (grad == nullptr) {
      *loss = mmssl::batch_loss(batch, cfg).total;
      return;
    }
    mmssl::LossGradient g;
    *loss = mmssl::batch_loss_with_gradient(batch, cfg, g).total;
    std::memcpy(grad, g.fundus.values().data(), n * d * sizeof(double));
    std::memcpy(grad + n * d, g.augmented.values().data(), n * d * sizeof(double));
    std::memcpy(grad + 2 * n * d, g.modality.values().data(), n * d * sizeof(double));
  });
}

mmssl_status mmssl_ttest(const double* a, size_t na, const double* b, size_t nb, double* t, double* p,
                         double* df) {
  MMSSL_REQUIRE(a);
  MMSSL_REQUIRE(b);
  return guard([&] {
    const mmssl::TTestResult r = mmssl::t_test({a, na}, {b, nb});
    if (t != nullptr) *t = r.t;
    if (p != nullptr) *p = r.p;
    if (df != nullptr) *df = r.df;
  });
}

mmssl_status mmssl_run_generate(const mmssl_config* cfg, char** report) {
  MMSSL_REQUIRE(cfg);
  MMSSL_REQUIRE(report);
  return guard([&] {
    const mmssl::Dataset ds = mmssl::run_generate(cfg->cfg);
    *report = dup_string("samples = " + std::to_string(ds.size()) + "\nn_classes = " +
                         std::to_string(ds.n_classes) + "\nout = " + cfg->cfg.out + "\n");
  });
}

mmssl_status mmssl_run_train(const mmssl_config* cfg, char** report) {
  MMSSL_REQUIRE(cfg);
  MMSSL_REQUIRE(report);
  return guard([&] {
    if (cfg->cfg.out.empty()) {
      throw mmssl::Error(mmssl::ErrorCode::InvalidConfig, "out: an output directory is required");
    }
    const mmssl::TrainResult r = mmssl::run_train(cfg->cfg, cfg->cfg.out);
    std::string text = "epochs = " + std::to_string(r.epoch_losses.size()) + "\n";
    if (!r.epoch_losses.empty()) {
      text += "initial_loss = " + mmssl::format_double(r.epoch_losses.front()) + "\n";
      text += "final_loss = " + mmssl::format_double(r.epoch_losses.back()) + "\n";
    }
    text += "out = " + cfg->cfg.out + "\n";
    *report = dup_string(text);
  });
}

mmssl_status mmssl_run_cross_validate(const mmssl_config* cfg, char** report) {
  MMSSL_REQUIRE(cfg);
  MMSSL_REQUIRE(report);
  return guard([&] { *report = dup_string(mmssl::format_cv_report(mmssl::run_cv(cfg->cfg))); });
}

mmssl_status mmssl_run_eval_knn(const mmssl_config* cfg, char** report) {
  MMSSL_REQUIRE(cfg);
  MMSSL_REQUIRE(report);
  return guard([&] { *report = dup_string(mmssl::run_eval_knn(cfg->cfg)); });
}

mmssl_status mmssl_run_eval_probe(const mmssl_config* cfg, char** report) {
  MMSSL_REQUIRE(cfg);
  MMSSL_REQUIRE(report);
  return guard([&] { *report = dup_string(mmssl::run_eval_probe(cfg->cfg)); });
}

mmssl_status mmssl_run_export_embeddings(const mmssl_config* cfg, char** csv) {
  MMSSL_REQUIRE(cfg);
  MMSSL_REQUIRE(csv);
  return guard([&] {
    cfg->cfg.validate();
    const mmssl::EncoderParams params = mmssl::load_model(cfg->cfg);
    *csv = dup_string(mmssl::embeddings_csv(params, mmssl::resolve_dataset(cfg->cfg)));
  });
}

mmssl_status mmssl_run_ttest(const char* path_a, const char* path_b, const char* metric, char** report) {
  MMSSL_REQUIRE(path_a);
  MMSSL_REQUIRE(path_b);
  MMSSL_REQUIRE(report);
  return guard([&] {
    const std::string m = metric == nullptr ? "accuracy" : metric;
    const auto a = mmssl::read_samples(path_a, m);
    const auto b = mmssl::read_samples(path_b, m);
    *report = dup_string(mmssl::format_ttest(mmssl::t_test(a, b)));
  });
}

}  // extern "C"

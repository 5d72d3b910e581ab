#ifndef MMSSL_H
#define MMSSL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MMSSL_API __declspec(dllexport)
#else
#define MMSSL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Every fallible call returns one; on failure the message is
   available from mmssl_last_error() on the calling thread. */
typedef enum mmssl_status {
  MMSSL_OK = 0,
  MMSSL_ERR_CONFIG = 2,    /* bad key, value, or combination of settings */
  MMSSL_ERR_IO = 3,        /* unreadable/unwritable file or malformed file */
  MMSSL_ERR_NUMERICAL = 4, /* non-finite loss, degenerate statistics */
  MMSSL_ERR_DATA = 5,      /* shape, size or label problems in the inputs */
  MMSSL_ERR_ARGUMENT = 6,  /* null handle or pointer, buffer misuse */
  MMSSL_ERR_INTERNAL = 7
} mmssl_status;

typedef struct mmssl_config mmssl_config;
typedef struct mmssl_dataset mmssl_dataset;
typedef struct mmssl_encoder mmssl_encoder;

MMSSL_API const char* mmssl_version(void);
MMSSL_API const char* mmssl_last_error(void);
MMSSL_API const char* mmssl_status_name(mmssl_status status);

/* Strings returned through char** out-parameters are owned by the caller. */
MMSSL_API void mmssl_string_free(char* s);

/* Configuration: "key = value" pairs with documented defaults. */
MMSSL_API mmssl_status mmssl_config_new(mmssl_config** out);
MMSSL_API void mmssl_config_free(mmssl_config* cfg);
MMSSL_API mmssl_status mmssl_config_set(mmssl_config* cfg, const char* key, const char* value);
MMSSL_API mmssl_status mmssl_config_get(const mmssl_config* cfg, const char* key, char** value);
MMSSL_API mmssl_status mmssl_config_load_file(mmssl_config* cfg, const char* path);
MMSSL_API mmssl_status mmssl_config_parse_text(mmssl_config* cfg, const char* text);
MMSSL_API mmssl_status mmssl_config_dump(const mmssl_config* cfg, char** text);
MMSSL_API mmssl_status mmssl_config_validate(const mmssl_config* cfg);
/* Number of keys and the i-th key name (static storage). */
MMSSL_API size_t mmssl_config_key_count(void);
MMSSL_API const char* mmssl_config_key(size_t index);

/* Datasets. */
MMSSL_API mmssl_status mmssl_dataset_generate(const mmssl_config* cfg, mmssl_dataset** out);
MMSSL_API mmssl_status mmssl_dataset_load(const char* path, mmssl_dataset** out);
MMSSL_API mmssl_status mmssl_dataset_save(const mmssl_dataset* ds, const char* path, int binary);
MMSSL_API void mmssl_dataset_free(mmssl_dataset* ds);
MMSSL_API size_t mmssl_dataset_size(const mmssl_dataset* ds);
MMSSL_API mmssl_status mmssl_dataset_shape(const mmssl_dataset* ds, size_t* height, size_t* width,
                                           size_t* n_classes);
MMSSL_API mmssl_status mmssl_dataset_sample(const mmssl_dataset* ds, size_t index, int64_t* patient_id,
                                            size_t* label);

/* Encoders. */
MMSSL_API mmssl_status mmssl_encoder_load(const char* path, mmssl_encoder** out);
MMSSL_API mmssl_status mmssl_encoder_init(const size_t* dims, size_t n_dims, uint64_t seed,
                                          mmssl_encoder** out);
MMSSL_API mmssl_status mmssl_encoder_save(const mmssl_encoder* enc, const char* path);
MMSSL_API void mmssl_encoder_free(mmssl_encoder* enc);
MMSSL_API size_t mmssl_encoder_input_dim(const mmssl_encoder* enc);
MMSSL_API size_t mmssl_encoder_output_dim(const mmssl_encoder* enc);
/* Row-major n x output_dim embeddings of the dataset's fundus images (or
   modality images when `modality` is nonzero). `out` holds `capacity`
   doubles. */
MMSSL_API mmssl_status mmssl_encoder_embed(const mmssl_encoder* enc, const mmssl_dataset* ds, int modality,
                                           double* out, size_t capacity);

/* Batch loss on unit-norm n x d row-major embeddings (fundus, augmented
   fundus, modality). `grad`, when non-null, receives 3*n*d doubles in the
   same order. */
typedef struct mmssl_loss_options {
  double tau;
  double margin;
  int use_transform_term;
  int use_modality_term;
  int use_negative_terms;
} mmssl_loss_options;
MMSSL_API mmssl_loss_options mmssl_loss_options_default(void);
MMSSL_API mmssl_status mmssl_batch_loss(size_t n, size_t d, const double* fundus, const double* augmented,
                                        const double* modality, const mmssl_loss_options* options,
                                        double* loss, double* grad);

/* Independent two-sample t-test with pooled variance. */
MMSSL_API mmssl_status mmssl_ttest(const double* a, size_t na, const double* b, size_t nb, double* t,
                                   double* p, double* df);

/* Commands. Each validates the config and returns a "key = value" report
   (or CSV for export) in *report. */
MMSSL_API mmssl_status mmssl_run_generate(const mmssl_config* cfg, char** report);
MMSSL_API mmssl_status mmssl_run_train(const mmssl_config* cfg, char** report);
MMSSL_API mmssl_status mmssl_run_cross_validate(const mmssl_config* cfg, char** report);
MMSSL_API mmssl_status mmssl_run_eval_knn(const mmssl_config* cfg, char** report);
MMSSL_API mmssl_status mmssl_run_eval_probe(const mmssl_config* cfg, char** report);
MMSSL_API mmssl_status mmssl_run_export_embeddings(const mmssl_config* cfg, char** csv);
/* t-test between two sample files: plain numbers, or the fold.<i>.<metric>
   values of a cross-validation report. */
MMSSL_API mmssl_status mmssl_run_ttest(const char* path_a, const char* path_b, const char* metric, char** report);

#ifdef __cplusplus
}
#endif

#endif

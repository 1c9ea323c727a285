/* SPDX-License-Identifier: Apache-2.0 */
#ifndef SEQEMBED_H
#define SEQEMBED_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes mirror the library's error taxonomy. Every fallible call
   returns one; the message behind a failure is retrievable per thread via
   se_last_error(). */
typedef enum se_status {
  SE_OK = 0,
  SE_ERR_INVALID_INPUT = 1,
  SE_ERR_INVALID_STATE = 2,
  SE_ERR_NUMERICAL = 3,
  SE_ERR_INGESTION = 4,
  SE_ERR_TRAINING = 5,
  SE_ERR_IO = 6,
  SE_ERR_UNKNOWN = 7
} se_status;

const char* se_version(void);
const char* se_status_name(se_status status);

/* Message for the calling thread's most recent failure; empty after a
   success. The pointer stays valid until the next call on the same thread. */
const char* se_last_error(void);

/* Frees any string returned through a char** out parameter. */
void se_free_string(char* s);

/* ---- pipeline ----------------------------------------------------------- */

/* Runs one subcommand ("gen", "train", "embed", "cluster", "segment" or
   "report") on a resolved JSON config document. Artifacts plus manifest.json
   land in the config's "out" directory. When manifest_json is non-null it
   receives the manifest document. */
se_status se_run_command(const char* command, const char* config_json,
                         char** manifest_json);

/* Replays a recorded manifest into a fresh output directory; inputs must
   still match their recorded digests. */
se_status se_rerun(const char* manifest_path, const char* out_dir,
                   char** manifest_json);

/* ---- opaque handles ------------------------------------------------------ */

typedef struct se_model se_model;
typedef struct se_batch se_batch;

se_status se_model_load(const char* path, se_model** out);
se_status se_model_save(const se_model* model, const char* path);
/* JSON document with input_dim, hidden_dim, encoder_steps, decoder_steps,
   share_params and the optimizer step counter. */
se_status se_model_info(const se_model* model, char** info_json);
void se_model_free(se_model* model);

se_status se_batch_gen_multiclass(int64_t classes, int64_t rows, uint64_t seed,
                                  se_batch** out);
se_status se_batch_load_dir(const char* dir, se_batch** out);
se_status se_batch_save_dir(const se_batch* batch, const char* dir);
se_status se_batch_size(const se_batch* batch, int64_t* count);
void se_batch_free(se_batch* batch);

/* ---- training ------------------------------------------------------------ */

typedef struct se_train_options {
  int64_t hidden_dim;
  int64_t encoder_steps;
  int64_t decoder_steps;
  int64_t iterations;
  int64_t batch_size;         /* 0 samples every sequence each iteration */
  double learning_rate;       /* values <= 0 fall back to the default 0.01 */
  double validation_fraction; /* 0 disables the held-out split */
  uint64_t seed;
  int share_params;
  int one_hot; /* append one-hot class columns before training */
} se_train_options;

/* Trains a fresh model on the batch. final_loss may be null. */
se_status se_train(const se_train_options* options, const se_batch* data,
                   se_model** model_out, double* final_loss);

/* ---- direct numerics ------------------------------------------------------ */

/* points is row-major rows x cols; labels_out receives rows entries. */
se_status se_kmeans(const double* points, int64_t rows, int64_t cols, int64_t k,
                    uint64_t seed, int64_t* labels_out, double* inertia_out);
se_status se_agglomerative_cosine(const double* points, int64_t rows, int64_t cols,
                                  int64_t k, int64_t* labels_out);
se_status se_ari(const int64_t* a, const int64_t* b, int64_t n, double* out);
se_status se_matched_accuracy(const int64_t* pred, const int64_t* truth, int64_t n,
                              double* out);

#ifdef __cplusplus
}
#endif

#endif /* SEQEMBED_H */

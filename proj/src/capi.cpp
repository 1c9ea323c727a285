// SPDX-License-Identifier: Apache-2.0
#include "seqembed.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>
#include <utility>

#include "json.hpp"

#include "clusterlab.hpp"
#include "datagen.hpp"
#include "errors.hpp"
#include "pipeline.hpp"
#include "seqmodel.hpp"
#include "trainmon.hpp"

using nlohmann::json;

struct se_model {
  seqembed::SeqModelParams params;
};

struct se_batch {
  seqembed::SequenceBatch batch;
};

namespace {

thread_local std::string g_last_error;

se_status status_of(seqembed::Error::Code code) {
  using Code = seqembed::Error::Code;
  switch (code) {
    case Code::invalid_input: return SE_ERR_INVALID_INPUT;
    case Code::invalid_state: return SE_ERR_INVALID_STATE;
    case Code::numerical_failure: return SE_ERR_NUMERICAL;
    case Code::ingestion: return SE_ERR_INGESTION;
    case Code::training_failure: return SE_ERR_TRAINING;
    case Code::io: return SE_ERR_IO;
  }
  return SE_ERR_UNKNOWN;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename Fn>
se_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return SE_OK;
  } catch (const seqembed::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SE_ERR_UNKNOWN;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SE_ERR_UNKNOWN;
  }
}

se_status fail_input(const char* message) {
  g_last_error = message;
  return SE_ERR_INVALID_INPUT;
}

json parse_config(const char* config_json, const char* what) {
  json doc = json::parse(config_json, nullptr, false);
  if (doc.is_discarded())
    throw seqembed::InvalidInput(std::string(what) + ": malformed JSON");
  return doc;
}

}  // namespace

extern "C" {

const char* se_version(void) { return seqembed::kToolVersion; }

const char* se_status_name(se_status status) {
  switch (status) {
    case SE_OK: return "ok";
    case SE_ERR_INVALID_INPUT: return "invalid_input";
    case SE_ERR_INVALID_STATE: return "invalid_state";
    case SE_ERR_NUMERICAL: return "numerical_failure";
    case SE_ERR_INGESTION: return "ingestion";
    case SE_ERR_TRAINING: return "training_failure";
    case SE_ERR_IO: return "io";
    case SE_ERR_UNKNOWN: return "unknown";
  }
  return "unknown";
}

const char* se_last_error(void) { return g_last_error.c_str(); }

void se_free_string(char* s) { std::free(s); }

se_status se_run_command(const char* command, const char* config_json,
                         char** manifest_json) {
  if (!command || !config_json) return fail_input("se_run_command: null argument");
  return guarded([&] {
    const json manifest =
        seqembed::run_command(command, parse_config(config_json, "se_run_command"));
    if (manifest_json) *manifest_json = dup_string(manifest.dump(2));
  });
}

se_status se_rerun(const char* manifest_path, const char* out_dir,
                   char** manifest_json) {
  if (!manifest_path || !out_dir) return fail_input("se_rerun: null argument");
  return guarded([&] {
    const json manifest = seqembed::rerun_manifest(manifest_path, out_dir);
    if (manifest_json) *manifest_json = dup_string(manifest.dump(2));
  });
}

se_status se_model_load(const char* path, se_model** out) {
  if (!path || !out) return fail_input("se_model_load: null argument");
  return guarded([&] {
    auto handle = std::make_unique<se_model>();
    handle->params = seqembed::load_checkpoint(path);
    *out = handle.release();
  });
}

se_status se_model_save(const se_model* model, const char* path) {
  if (!model || !path) return fail_input("se_model_save: null argument");
  return guarded([&] { seqembed::save_checkpoint(model->params, path); });
}

se_status se_model_info(const se_model* model, char** info_json) {
  if (!model || !info_json) return fail_input("se_model_info: null argument");
  return guarded([&] {
    const seqembed::SeqModelConfig& c = model->params.config;
    json doc{{"input_dim", c.input_dim},
             {"hidden_dim", c.hidden_dim},
             {"encoder_steps", c.encoder_steps},
             {"decoder_steps", c.decoder_steps},
             {"share_params", c.share_params},
             {"project_first_decoder_input", c.project_first_decoder_input},
             {"learning_rate", c.learning_rate},
             {"seed", c.seed},
             {"step", model->params.step}};
    *info_json = dup_string(doc.dump(2));
  });
}

void se_model_free(se_model* model) { delete model; }

se_status se_batch_gen_multiclass(int64_t classes, int64_t rows, uint64_t seed,
                                  se_batch** out) {
  if (!out) return fail_input("se_batch_gen_multiclass: null argument");
  return guarded([&] {
    auto handle = std::make_unique<se_batch>();
    handle->batch = seqembed::gen_multiclass_corpus(classes, rows, seed);
    *out = handle.release();
  });
}

se_status se_batch_load_dir(const char* dir, se_batch** out) {
  if (!dir || !out) return fail_input("se_batch_load_dir: null argument");
  return guarded([&] {
    auto handle = std::make_unique<se_batch>();
    handle->batch = seqembed::load_csv_dir(dir);
    *out = handle.release();
  });
}

se_status se_batch_save_dir(const se_batch* batch, const char* dir) {
  if (!batch || !dir) return fail_input("se_batch_save_dir: null argument");
  return guarded([&] { seqembed::save_csv_dir(batch->batch, dir); });
}

se_status se_batch_size(const se_batch* batch, int64_t* count) {
  if (!batch || !count) return fail_input("se_batch_size: null argument");
  *count = static_cast<int64_t>(batch->batch.sequences.size());
  g_last_error.clear();
  return SE_OK;
}

void se_batch_free(se_batch* batch) { delete batch; }

se_status se_train(const se_train_options* options, const se_batch* data,
                   se_model** model_out, double* final_loss) {
  if (!options || !data || !model_out) return fail_input("se_train: null argument");
  return guarded([&] {
    seqembed::SequenceBatch batch = data->batch;
    if (options->one_hot) {
      if (!batch.labels)
        throw seqembed::InvalidInput("se_train: one_hot requires labeled data");
      std::int64_t max_label = 0;
      for (const std::int64_t l : *batch.labels) max_label = std::max(max_label, l);
      batch = seqembed::one_hot_augment(batch,
                                        static_cast<seqembed::Index>(max_label) + 1);
    }
    seqembed::TrainConfig tc;
    tc.model.input_dim = batch.sequences.front().cols();
    tc.model.hidden_dim = options->hidden_dim;
    tc.model.encoder_steps = options->encoder_steps;
    tc.model.decoder_steps = options->decoder_steps;
    tc.model.share_params = options->share_params != 0;
    tc.model.seed = options->seed;
    if (options->learning_rate > 0.0) tc.model.learning_rate = options->learning_rate;
    tc.iterations = options->iterations;
    tc.batch_size = options->batch_size;
    tc.validation_fraction = options->validation_fraction;

    const seqembed::TrainHistory history = seqembed::train(tc, batch);
    auto handle = std::make_unique<se_model>();
    handle->params = history.params;
    if (final_loss)
      *final_loss = history.train_losses.empty() ? 0.0 : history.train_losses.back();
    *model_out = handle.release();
  });
}

se_status se_kmeans(const double* points, int64_t rows, int64_t cols, int64_t k,
                    uint64_t seed, int64_t* labels_out, double* inertia_out) {
  if (!points || !labels_out) return fail_input("se_kmeans: null argument");
  if (rows <= 0 || cols <= 0) return fail_input("se_kmeans: empty point set");
  return guarded([&] {
    seqembed::PointSet ps;
    ps.points.resize(rows, cols);
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < cols; ++c) ps.points(r, c) = points[r * cols + c];
    const seqembed::ClusterResult result = seqembed::kmeans_pp(ps, k, seed);
    for (int64_t r = 0; r < rows; ++r) labels_out[r] = result.labels[r];
    if (inertia_out) *inertia_out = result.inertia.value_or(0.0);
  });
}

se_status se_agglomerative_cosine(const double* points, int64_t rows, int64_t cols,
                                  int64_t k, int64_t* labels_out) {
  if (!points || !labels_out)
    return fail_input("se_agglomerative_cosine: null argument");
  if (rows <= 0 || cols <= 0)
    return fail_input("se_agglomerative_cosine: empty point set");
  return guarded([&] {
    seqembed::PointSet ps;
    ps.points.resize(rows, cols);
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < cols; ++c) ps.points(r, c) = points[r * cols + c];
    const seqembed::ClusterResult result = seqembed::agglomerative_cosine(ps, k);
    for (int64_t r = 0; r < rows; ++r) labels_out[r] = result.labels[r];
  });
}

se_status se_ari(const int64_t* a, const int64_t* b, int64_t n, double* out) {
  if (!a || !b || !out) return fail_input("se_ari: null argument");
  return guarded([&] {
    *out = seqembed::ari(std::vector<std::int64_t>(a, a + n),
                         std::vector<std::int64_t>(b, b + n));
  });
}

se_status se_matched_accuracy(const int64_t* pred, const int64_t* truth, int64_t n,
                              double* out) {
  if (!pred || !truth || !out) return fail_input("se_matched_accuracy: null argument");
  return guarded([&] {
    *out = seqembed::matched_accuracy(std::vector<std::int64_t>(pred, pred + n),
                                      std::vector<std::int64_t>(truth, truth + n));
  });
}

}  // extern "C"

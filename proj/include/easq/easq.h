/* Copyright 2026 The EASQ Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the EASQ library. Every fallible call returns an
 * easq_status; on failure easq_last_error() describes the problem for the
 * calling thread until its next call into the library. Handles are opaque and
 * owned by the caller, who releases them with the matching _free function.
 */

#ifndef EASQ_EASQ_H_
#define EASQ_EASQ_H_

#include <stddef.h>
#include <stdint.h>

#if defined(EASQ_BUILDING_LIBRARY)
#define EASQ_API __attribute__((visibility("default")))
#else
#define EASQ_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum easq_status {
  EASQ_OK = 0,
  EASQ_ERR_INTERNAL = 1,
  EASQ_ERR_CONFIG = 2,
  EASQ_ERR_DATA = 3,
  EASQ_ERR_INSUFFICIENT_DATA = 4,
  EASQ_ERR_NUMERIC = 5,
  EASQ_ERR_IO = 6,
  EASQ_ERR_CHECKPOINT_VERSION = 7,
  EASQ_ERR_CHECKPOINT_TRUNCATED = 8,
  EASQ_ERR_CHECKPOINT_SHAPE = 9,
  EASQ_ERR_INVALID_ARGUMENT = 10
} easq_status;

typedef enum easq_param_group {
  EASQ_GROUP_BACKBONE = 0,
  EASQ_GROUP_LORA = 1,
  EASQ_GROUP_MAIN_HEAD = 2,
  EASQ_GROUP_SATIS_HEAD = 3
} easq_param_group;

typedef struct easq_config easq_config;
typedef struct easq_model easq_model;

EASQ_API const char* easq_version(void);
EASQ_API const char* easq_status_name(easq_status status);
EASQ_API const char* easq_last_error(void);
/* Releases strings returned through char** out-parameters. */
EASQ_API void easq_string_free(char* s);

/* Configuration: defaults, a JSON file, and "section.key=value" overrides. */
EASQ_API easq_status easq_config_create(easq_config** out);
EASQ_API easq_status easq_config_load(const char* path, easq_config** out);
EASQ_API easq_status easq_config_set(easq_config* config, const char* assignment);
EASQ_API easq_status easq_config_to_json(const easq_config* config, char** out_json);
EASQ_API void easq_config_free(easq_config* config);

/* Pipeline commands. Nullable arguments are marked. */
EASQ_API easq_status easq_gen_data(const easq_config* config, const char* out_dir, int force);
EASQ_API easq_status easq_train(const easq_config* config, const char* data_dir,
                                const char* out_dir, const char* resume_checkpoint /* nullable */);
EASQ_API easq_status easq_eval(const easq_config* config, const char* checkpoint,
                               const char* data_dir, const char* out_dir);
EASQ_API easq_status easq_ablate(const easq_config* config, const char* data_dir /* nullable */,
                                 const char* out_dir, const uint64_t* seeds, size_t n_seeds);
EASQ_API easq_status easq_sweep(const easq_config* config, const char* data_dir /* nullable */,
                                const char* out_dir, const double* lambda1, size_t n_lambda1,
                                const double* lambda2, size_t n_lambda2, const uint64_t* seeds,
                                size_t n_seeds);
EASQ_API easq_status easq_validate_sim(const char* data_dir, const char* out_dir);

/* Models. */
EASQ_API easq_status easq_model_create(const easq_config* config, easq_model** out);
EASQ_API easq_status easq_model_load(const char* checkpoint, easq_model** out);
EASQ_API easq_status easq_model_save(const easq_model* model, const char* checkpoint);
EASQ_API easq_status easq_model_score(const easq_model* model, int64_t user_id, int64_t item_id,
                                      int64_t hour, int64_t duration_bucket, double* main_score,
                                      double* satis_score /* nullable */);
EASQ_API easq_status easq_model_parameter_count(const easq_model* model, easq_param_group group,
                                                size_t* out);
EASQ_API void easq_model_free(easq_model* model);

/* 1 when the in-feed questionnaire may be shown after this view, else 0. */
EASQ_API int easq_questionnaire_trigger(double watch_time_s, double progress);

#ifdef __cplusplus
}
#endif

#endif /* EASQ_EASQ_H_ */

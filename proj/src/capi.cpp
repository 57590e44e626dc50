// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

#include "easq/easq.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "easq/checkpoint.hpp"
#include "easq/config.hpp"
#include "easq/error.hpp"
#include "easq/pipeline.hpp"
#include "easq/simenv.hpp"

struct easq_config {
  easq::RunConfig config;
};

struct easq_model {
  explicit easq_model(easq::EasqModel m) : model(std::move(m)) {}
  easq::EasqModel model;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
easq_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return EASQ_OK;
  } catch (const easq::Error& e) {
    g_last_error = e.what();
    return static_cast<easq_status>(e.status());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return EASQ_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return EASQ_ERR_INTERNAL;
}

void require(bool ok, const char* what) {
  if (!ok) throw easq::ContractError(what);
}

std::optional<std::filesystem::path> optional_path(const char* p) {
  if (p == nullptr || *p == '\0') return std::nullopt;
  return std::filesystem::path(p);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* easq_version(void) { return "0.1.0"; }

const char* easq_status_name(easq_status status) {
  switch (status) {
    case EASQ_OK: return "ok";
    case EASQ_ERR_INTERNAL: return "internal error";
    case EASQ_ERR_CONFIG: return "config error";
    case EASQ_ERR_DATA: return "data error";
    case EASQ_ERR_INSUFFICIENT_DATA: return "insufficient data";
    case EASQ_ERR_NUMERIC: return "numeric failure";
    case EASQ_ERR_IO: return "io error";
    case EASQ_ERR_CHECKPOINT_VERSION: return "checkpoint version mismatch";
    case EASQ_ERR_CHECKPOINT_TRUNCATED: return "checkpoint truncated";
    case EASQ_ERR_CHECKPOINT_SHAPE: return "checkpoint shape mismatch";
    case EASQ_ERR_INVALID_ARGUMENT: return "invalid argument";
  }
  return "unknown status";
}

const char* easq_last_error(void) { return g_last_error.c_str(); }

void easq_string_free(char* s) { std::free(s); }

easq_status easq_config_create(easq_config** out) {
  return guarded([&] {
    require(out != nullptr, "easq_config_create: out is null");
    *out = new easq_config{};
  });
}

easq_status easq_config_load(const char* path, easq_config** out) {
  return guarded([&] {
    require(path && out, "easq_config_load: null argument");
    *out = new easq_config{easq::load_run_config(path)};
  });
}

easq_status easq_config_set(easq_config* config, const char* assignment) {
  return guarded([&] {
    require(config && assignment, "easq_config_set: null argument");
    easq::apply_override(config->config, assignment);
  });
}

easq_status easq_config_to_json(const easq_config* config, char** out_json) {
  return guarded([&] {
    require(config && out_json, "easq_config_to_json: null argument");
    *out_json = dup_string(easq::to_json(config->config).dump(2));
  });
}

void easq_config_free(easq_config* config) { delete config; }

easq_status easq_gen_data(const easq_config* config, const char* out_dir, int force) {
  return guarded([&] {
    require(config && out_dir, "easq_gen_data: null argument");
    easq::cmd_gen_data(config->config, out_dir, force != 0);
  });
}

easq_status easq_train(const easq_config* config, const char* data_dir, const char* out_dir,
                       const char* resume_checkpoint) {
  return guarded([&] {
    require(config && data_dir && out_dir, "easq_train: null argument");
    easq::TrainOptions opts;
    opts.resume = optional_path(resume_checkpoint);
    easq::cmd_train(config->config, data_dir, out_dir, opts);
  });
}

easq_status easq_eval(const easq_config* config, const char* checkpoint, const char* data_dir,
                      const char* out_dir) {
  return guarded([&] {
    require(config && checkpoint && data_dir && out_dir, "easq_eval: null argument");
    easq::cmd_eval(config->config, checkpoint, data_dir, out_dir);
  });
}

easq_status easq_ablate(const easq_config* config, const char* data_dir, const char* out_dir,
                        const uint64_t* seeds, size_t n_seeds) {
  return guarded([&] {
    require(config && out_dir && (seeds || n_seeds == 0), "easq_ablate: null argument");
    easq::cmd_ablate(config->config, optional_path(data_dir), out_dir,
                     std::vector<std::uint64_t>(seeds, seeds + n_seeds));
  });
}

easq_status easq_sweep(const easq_config* config, const char* data_dir, const char* out_dir,
                       const double* lambda1, size_t n_lambda1, const double* lambda2,
                       size_t n_lambda2, const uint64_t* seeds, size_t n_seeds) {
  return guarded([&] {
    require(config && out_dir && (lambda1 || n_lambda1 == 0) && (lambda2 || n_lambda2 == 0) &&
                (seeds || n_seeds == 0),
            "easq_sweep: null argument");
    easq::cmd_sweep(config->config, optional_path(data_dir), out_dir,
                    std::vector<double>(lambda1, lambda1 + n_lambda1),
                    std::vector<double>(lambda2, lambda2 + n_lambda2),
                    std::vector<std::uint64_t>(seeds, seeds + n_seeds));
  });
}

easq_status easq_validate_sim(const char* data_dir, const char* out_dir) {
  return guarded([&] {
    require(data_dir && out_dir, "easq_validate_sim: null argument");
    easq::cmd_validate_sim(data_dir, out_dir);
  });
}

easq_status easq_model_create(const easq_config* config, easq_model** out) {
  return guarded([&] {
    require(config && out, "easq_model_create: null argument");
    const auto& c = config->config;
    *out = new easq_model(easq::EasqModel(easq::ablation_variant(c.model, c.train.ablation)));
  });
}

easq_status easq_model_load(const char* checkpoint, easq_model** out) {
  return guarded([&] {
    require(checkpoint && out, "easq_model_load: null argument");
    auto loaded = easq::load_checkpoint(checkpoint);
    *out = new easq_model(std::move(loaded.model));
  });
}

easq_status easq_model_save(const easq_model* model, const char* checkpoint) {
  return guarded([&] {
    require(model && checkpoint, "easq_model_save: null argument");
    easq::save_checkpoint(checkpoint, model->model);
  });
}

easq_status easq_model_score(const easq_model* model, int64_t user_id, int64_t item_id,
                             int64_t hour, int64_t duration_bucket, double* main_score,
                             double* satis_score) {
  return guarded([&] {
    require(model && main_score, "easq_model_score: null argument");
    const auto& m = model->model;
    const auto enc = m.encode({user_id, item_id, hour, duration_bucket});
    *main_score = m.main_head(enc).score.item();
    if (satis_score) *satis_score = m.satis_head(enc).score.item();
  });
}

easq_status easq_model_parameter_count(const easq_model* model, easq_param_group group,
                                       size_t* out) {
  return guarded([&] {
    require(model && out, "easq_model_parameter_count: null argument");
    require(group >= EASQ_GROUP_BACKBONE && group <= EASQ_GROUP_SATIS_HEAD,
            "easq_model_parameter_count: unknown group");
    *out = model->model.parameter_count(static_cast<easq::ParamGroup>(group));
  });
}

void easq_model_free(easq_model* model) { delete model; }

int easq_questionnaire_trigger(double watch_time_s, double progress) {
  return easq::questionnaire_trigger(watch_time_s, progress) ? 1 : 0;
}

}  // extern "C"

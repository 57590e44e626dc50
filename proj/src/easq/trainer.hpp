// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

// Single-pass online optimisation. Each batch is consumed once in timestamp
// order: forward both heads, build pairs, one combined backward of
// L_main + lambda1 * L_satis + lambda2 * L_dpo, one Adam step.

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "easq/adam.hpp"
#include "easq/dataset.hpp"
#include "easq/losses.hpp"
#include "easq/model.hpp"

namespace easq {

enum class Ablation { full, no_lora, no_moe, no_dpo };

const char* to_string(Ablation a);
Ablation parse_ablation(const std::string& s);

// no_lora drops the pathway (h_satis = stop_grad(h)), no_moe collapses each
// head to one expert with unit weight, no_dpo sets lambda2 = 0.
EasqConfig ablation_variant(EasqConfig config, Ablation variant);

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t max_steps = 0;  // 0: the whole stream
  double lr = 1e-3;
  Ablation ablation = Ablation::full;
  std::size_t eval_every = 0;
  std::uint64_t seed = 0;
  // Answered questionnaire examples kept for pairing with later answers of
  // the same user; 0 disables.
  std::size_t replay_buffer_size = 0;
  std::size_t replay_per_batch = 8;
  std::size_t max_behavior_pairs = 256;
  bool dpo_include_uncertain = false;
  BehaviorWeights behavior_weights;
  std::size_t checkpoint_every = 0;

  void validate() const;
};

struct LogRow {
  std::uint64_t step = 0;
  double loss_main = 0.0;
  double loss_satis = 0.0;
  double loss_dpo = 0.0;
  std::size_t n_behavior_pairs = 0;
  std::size_t n_satis_pairs = 0;
  std::size_t n_dpo_pairs = 0;
};

inline constexpr const char* kTrainLogHeader =
    "step,loss_main,loss_satis,loss_dpo,n_behavior_pairs,n_satis_pairs,n_dpo_pairs";
std::string format_log_row(const LogRow& row);

struct ReplayEntry {
  Features features;
  QuestionnaireResponse response;
};

struct TrainerState {
  std::uint64_t step = 0;
  std::size_t next_batch = 0;
  std::deque<ReplayEntry> replay;
};

class Trainer {
 public:
  // `model` must already carry the ablation-adjusted config.
  Trainer(EasqModel& model, TrainConfig config);

  // Runs one optimiser step on `batch`. `batch_id` seeds the pair sampling.
  LogRow train_batch(std::span<const Example> batch, std::uint64_t batch_id);

  using StepHook = std::function<void(const LogRow&, const Trainer&)>;
  // Consumes `stream` from state().next_batch on, in chunks of batch_size.
  std::vector<LogRow> run(std::span<const Example> stream, const StepHook& hook = {});

  EasqModel& model() { return model_; }
  const EasqModel& model() const { return model_; }
  const TrainConfig& config() const { return config_; }
  AdamState& optimizer() { return adam_; }
  const AdamState& optimizer() const { return adam_; }
  TrainerState& state() { return state_; }
  const TrainerState& state() const { return state_; }

 private:
  EasqModel& model_;
  TrainConfig config_;
  std::vector<Tensor> params_;
  AdamState adam_;
  TrainerState state_;
};

// Convenience wrapper: builds the trainer, runs the stream, returns the log.
std::vector<LogRow> train_online(std::span<const Example> stream, EasqModel& model,
                                 const TrainConfig& config);

}  // namespace easq

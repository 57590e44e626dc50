// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

#include "easq/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <set>

#include "easq/error.hpp"
#include "easq/rng.hpp"

namespace easq {

const char* to_string(Ablation a) {
  switch (a) {
    case Ablation::full:
      return "full";
    case Ablation::no_lora:
      return "no_lora";
    case Ablation::no_moe:
      return "no_moe";
    case Ablation::no_dpo:
      return "no_dpo";
  }
  return "?";
}

Ablation parse_ablation(const std::string& s) {
  if (s == "full") return Ablation::full;
  if (s == "no_lora") return Ablation::no_lora;
  if (s == "no_moe") return Ablation::no_moe;
  if (s == "no_dpo") return Ablation::no_dpo;
  throw ConfigError("unknown ablation variant '" + s + "' (expected full, no_lora, no_moe, no_dpo)");
}

EasqConfig ablation_variant(EasqConfig config, Ablation variant) {
  switch (variant) {
    case Ablation::full:
      break;
    case Ablation::no_lora:
      config.use_lora = false;
      break;
    case Ablation::no_moe:
      config.single_expert = true;
      config.k1 = 1;
      config.k2 = 1;
      break;
    case Ablation::no_dpo:
      config.lambda2 = 0.0;
      break;
  }
  return config;
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("train.batch_size must be >= 2");
  if (!(lr > 0.0)) throw ConfigError("train.lr must be > 0");
  if (max_behavior_pairs < 1) throw ConfigError("train.max_behavior_pairs must be >= 1");
}

std::string format_log_row(const LogRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%llu,%.17g,%.17g,%.17g,%zu,%zu,%zu",
                static_cast<unsigned long long>(r.step), r.loss_main, r.loss_satis, r.loss_dpo,
                r.n_behavior_pairs, r.n_satis_pairs, r.n_dpo_pairs);
  return buf;
}

Trainer::Trainer(EasqModel& model, TrainConfig config)
    : model_(model), config_(std::move(config)), params_(model.tensors()) {
  config_.validate();
  AdamConfig ac;
  ac.lr = config_.lr;
  adam_ = AdamState::for_params(params_, ac);
}

LogRow Trainer::train_batch(std::span<const Example> batch, std::uint64_t batch_id) {
  const auto& mc = model_.config();
  LogRow row;
  row.step = state_.step + 1;

  std::vector<InteractionEvent> events;
  std::vector<QuestionnaireResponse> responses;
  std::vector<Features> features;
  for (const auto& ex : batch) {
    events.push_back(ex.event);
    responses.push_back(ex.response);
    features.push_back(ex.features);
  }

  auto behavior = build_behavior_pairs(events, config_.behavior_weights, config_.max_behavior_pairs,
                                       mix_seed(config_.seed, batch_id));

  const std::size_t n_fresh = responses.size();
  // Buffered answers of users present in this batch, newest first. Pairs
  // among them are re-mixed; pairs with fresh answers are new.
  if (config_.replay_buffer_size > 0 && !state_.replay.empty()) {
    std::set<std::int64_t> present;
    for (const auto& e : events) present.insert(e.user_id);
    std::size_t taken = 0;
    for (auto it = state_.replay.rbegin();
         it != state_.replay.rend() && taken < config_.replay_per_batch; ++it) {
      if (!present.count(it->response.user_id)) continue;
      responses.push_back(it->response);
      features.push_back(it->features);
      ++taken;
    }
  }
  SatisPairs sp = build_satis_pairs(responses, config_.dpo_include_uncertain);

  row.n_behavior_pairs = behavior.size();
  row.n_satis_pairs = sp.satis.size();
  row.n_dpo_pairs = sp.dpo.size();

  const bool use_satis = mc.lambda1 > 0.0 && !sp.satis.empty();
  const bool use_dpo = mc.lambda2 > 0.0 && !sp.dpo.empty();
  std::vector<char> need_main(features.size(), 0), need_satis(features.size(), 0);
  for (const auto& p : behavior) need_main[p.pos_index] = need_main[p.neg_index] = 1;
  if (use_satis) {
    for (const auto& p : sp.satis) need_satis[p.pos_index] = need_satis[p.neg_index] = 1;
  }
  if (use_dpo) {
    for (const auto& p : sp.dpo) {
      need_satis[p.pos_index] = need_satis[p.neg_index] = 1;
      need_main[p.pos_index] = need_main[p.neg_index] = 1;
    }
  }

  std::vector<Tensor> y(features.size()), s(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (!need_main[i] && !need_satis[i]) continue;
    Encoding enc = model_.encode(features[i]);
    if (need_main[i]) y[i] = model_.main_head(enc).score;
    if (need_satis[i]) s[i] = model_.satis_head(enc).score;
  }

  Tensor l_main = bpr_loss(behavior, y);
  Tensor l_satis = use_satis ? satis_loss(sp.satis, s) : Tensor::scalar(0.0);
  Tensor l_dpo = use_dpo ? dpo_loss(sp.dpo, y, s, mc.beta) : Tensor::scalar(0.0);
  row.loss_main = l_main.item();
  row.loss_satis = l_satis.item();
  row.loss_dpo = l_dpo.item();
  if (!std::isfinite(row.loss_main) || !std::isfinite(row.loss_satis) ||
      !std::isfinite(row.loss_dpo)) {
    throw NumericError("non-finite loss in batch " + std::to_string(batch_id));
  }
  Tensor total = total_loss(l_main, l_satis, l_dpo, mc.lambda1, mc.lambda2);

  zero_grads(params_);
  backward(total);
  try {
    adam_step(params_, adam_);
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " (batch " + std::to_string(batch_id) + ")");
  }
  ++state_.step;

  if (config_.replay_buffer_size > 0) {
    for (std::size_t i = 0; i < n_fresh; ++i) {
      if (responses[i].answer == Answer::none) continue;
      state_.replay.push_back({features[i], responses[i]});
      if (state_.replay.size() > config_.replay_buffer_size) state_.replay.pop_front();
    }
  }
  return row;
}

std::vector<LogRow> Trainer::run(std::span<const Example> stream, const StepHook& hook) {
  std::vector<LogRow> log;
  const std::size_t bs = config_.batch_size;
  const std::size_t n_batches = (stream.size() + bs - 1) / bs;
  if (stream.empty()) std::clog << "train: empty stream, nothing to do\n";
  while (state_.next_batch < n_batches) {
    if (config_.max_steps > 0 && state_.step >= config_.max_steps) break;
    const std::size_t b = state_.next_batch;
    const std::size_t begin = b * bs;
    const std::size_t end = std::min(begin + bs, stream.size());
    ++state_.next_batch;
    if (begin == end) {
      std::clog << "train: batch " << b << " is empty, skipped\n";
      continue;
    }
    log.push_back(train_batch(stream.subspan(begin, end - begin), b));
    if (hook) hook(log.back(), *this);
  }
  return log;
}

std::vector<LogRow> train_online(std::span<const Example> stream, EasqModel& model,
                                 const TrainConfig& config) {
  Trainer trainer(model, config);
  return trainer.run(stream);
}

}  // namespace easq

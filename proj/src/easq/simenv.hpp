// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic short-video world. True satisfaction is a logistic function of
// user/item affinity and item quality. A fraction of items carries a "hook"
// bias that inflates watch behaviour without raising satisfaction, so
// behavioural proxies and questionnaire answers disagree in a controlled way.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "easq/records.hpp"
#include "easq/rng.hpp"

namespace easq {

struct QuestionnaireRates {
  double exposure = 0.05;
  double response = 0.5;

  static QuestionnaireRates production() { return {0.005, 0.02}; }
  static QuestionnaireRates dense() { return {0.05, 0.5}; }
  void validate() const;
};

struct SimConfig {
  std::size_t n_users = 200;
  std::size_t n_items = 300;
  std::size_t d_latent = 16;
  double rho_hook = 0.2;
  double hook_min = 0.2;
  double hook_max = 0.5;
  double quality_std = 0.3;
  double noise_std = 0.3;  // per (user, item) satisfaction noise
  double watch_noise = 0.1;
  double duration_min = 5.0;
  double duration_max = 120.0;
  std::size_t n_sessions = 2000;
  std::size_t views_per_session = 32;
  double mean_session_gap_s = 900.0;

  std::string preset = "dense";  // dense | production
  // Negative means "take from the preset".
  double exposure_rate = -1.0;
  double response_rate = -1.0;
  double tau_hi = 0.7;
  double tau_lo = 0.3;
  bool extremity_bias = false;
  bool debug = false;
  std::uint64_t seed = 1;

  // Fills preset-derived rates and checks ranges.
  void resolve();
  QuestionnaireRates rates() const;
};

struct World {
  SimConfig config;
  std::vector<std::vector<double>> user_latent;
  std::vector<std::vector<double>> item_latent;
  std::vector<double> quality;
  std::vector<double> hook_bias;
  std::vector<double> duration_s;
  std::uint64_t seed = 0;

  std::size_t hook_count() const;
};

World init_world(const SimConfig& config, std::uint64_t seed);

// sigmoid(p_u . q_i + g_i + eps_ui); eps_ui is a stateless draw keyed on
// (seed, user, item), so it never depends on call order.
double true_satisfaction(const World& world, std::int64_t user, std::int64_t item);

// The user consumes the first `n_views` of `ranked_items`, back to back from
// `start_ts`.
std::vector<InteractionEvent> simulate_session(const World& world, std::int64_t user,
                                               std::span<const std::int64_t> ranked_items,
                                               std::size_t n_views, double start_ts, Rng& rng);

inline constexpr double kTriggerMinWatchSeconds = 7.0;
inline constexpr double kTriggerMinProgress = 0.5;

bool questionnaire_trigger(double watch_time_s, double progress);
bool questionnaire_trigger(const InteractionEvent& event);

QuestionnaireResponse questionnaire_respond(const World& world, const InteractionEvent& event,
                                            const QuestionnaireRates& rates, Rng& rng);

struct SimLog {
  std::vector<InteractionEvent> events;
  // Aligned with `events`: one record per view, exposed or not.
  std::vector<QuestionnaireResponse> responses;
};

// Runs every session and returns the log sorted by (ts, user_id, item_id).
SimLog simulate_log(const World& world);

// Permutes the answers among answered responses (a permutation null).
void shuffle_answers(std::span<QuestionnaireResponse> responses, std::uint64_t seed);

struct SignalValidity {
  std::string signal;
  double mean_dissatisfied = 0.0;
  double mean_satisfied = 0.0;
  double mean_user_average = 0.0;
  double gap_low = 0.0;   // user average - dissatisfied mean
  double gap_high = 0.0;  // satisfied mean - user average
  double p_low = 1.0;     // two-sided sign test across users
  double p_high = 1.0;
  std::size_t users_low = 0;
  std::size_t users_high = 0;
};

struct ValidityReport {
  bool sufficient = false;
  std::string status;
  std::size_t n_satisfied = 0;
  std::size_t n_dissatisfied = 0;
  std::size_t n_responding_users = 0;
  std::vector<SignalValidity> signals;  // watch_fraction, like
};

ValidityReport convergent_validity(std::span<const InteractionEvent> events,
                                   std::span<const QuestionnaireResponse> responses);

// Two-sided exact sign test: P(|X - n/2| >= |k - n/2|) for X ~ Bin(n, 1/2).
double sign_test_p(std::size_t positives, std::size_t negatives);

}  // namespace easq

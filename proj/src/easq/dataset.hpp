// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

// Log files on disk and their conversion into training examples.
//
// interactions.jsonl   ts, user_id, item_id, watch_time_s, duration_s, progress,
//                      like, follow, comment, forward [, s_true in debug mode]
// questionnaire.jsonl  ts, user_id, item_id, exposed, clicked, answer
//                      (one row per exposed view; answer in SATISFIED,
//                      DISSATISFIED, UNCERTAIN, NONE)
// world_meta.json      seed, counts, rho_hook

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "easq/model.hpp"
#include "easq/records.hpp"
#include "easq/simenv.hpp"

namespace easq {

std::int64_t hour_of_day(double ts);
// Geometric buckets over [5 s, 120 s].
std::int64_t duration_bucket(double duration_s, std::size_t buckets);
Features features_for(std::int64_t user, std::int64_t item, double ts, double duration_s,
                      std::size_t buckets);

struct Example {
  InteractionEvent event;
  QuestionnaireResponse response;
  Features features;
};

std::vector<Example> make_examples(const SimLog& log, std::size_t duration_buckets);

struct Split {
  std::vector<Example> train;
  std::vector<Example> eval;
  double cutoff_ts = 0.0;
};

// Events at or after the timestamp at quantile (1 - holdout) go to eval.
Split chronological_split(std::vector<Example> examples, double holdout_fraction);

// Item id -> duration, from every view in the log.
std::map<std::int64_t, double> item_catalog(const std::vector<Example>& examples);

void write_log(const std::filesystem::path& dir, const SimLog& log, const World& world, bool debug);
// Parse errors carry file name and 1-based line number.
SimLog read_log(const std::filesystem::path& dir);

}  // namespace easq

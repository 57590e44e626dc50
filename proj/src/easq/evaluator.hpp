// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

// Questionnaire-grounded ranking evaluation. Each Satisfied answer becomes
// one instance: the answered item plus negatives, ranked by the main-head
// score. Metrics are averaged per user first, then across users.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "easq/model.hpp"
#include "easq/records.hpp"

namespace easq {

enum class NegativeSource { dissatisfied, sampled };

struct EvalInstance {
  std::int64_t user_id = 0;
  std::int64_t positive_item = 0;
  double ts = 0.0;  // of the positive answer; supplies the context features
  std::vector<std::int64_t> candidates;        // candidates[0] is the positive
  std::vector<NegativeSource> provenance;      // one per negative, in order
};

// Negatives come first from the same user's Dissatisfied items (in answer
// order), then from uniform corpus draws excluding everything the user
// answered Satisfied. Throws ConfigError if the corpus cannot fill a list.
std::vector<EvalInstance> build_candidate_lists(std::span<const QuestionnaireResponse> responses,
                                                std::span<const std::int64_t> corpus,
                                                std::size_t list_size, std::uint64_t seed);

// Descending score, ties by ascending item id. Returns the 1-based rank of
// `positive` in `items`.
std::size_t rank_of(std::span<const std::int64_t> items, std::span<const double> scores,
                    std::int64_t positive);

// Scores every candidate with y_hat and returns the rank of the positive.
// `durations` maps item id to seconds; unknown items use bucket 0.
std::size_t rank_and_score(const EasqModel& model, const EvalInstance& instance,
                           const std::map<std::int64_t, double>& durations);

struct RankedInstance {
  std::int64_t user_id = 0;
  std::size_t rank = 1;
};

double hit_at(std::size_t rank, std::size_t k);
double ndcg_at(std::size_t rank, std::size_t k);
double reciprocal_rank(std::size_t rank);

struct MetricValue {
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct EvalReport {
  bool sufficient = false;
  std::string status;  // "ok" or "insufficient data"
  MetricValue hr1, hr5, hr10, ndcg5, ndcg10, ndcg20, mrr;
  std::size_t n_users = 0;
  std::size_t n_instances = 0;
};

EvalReport compute_metrics(std::span<const RankedInstance> ranks);

EvalReport evaluate(const EasqModel& model, std::span<const EvalInstance> instances,
                    const std::map<std::int64_t, double>& durations);

nlohmann::ordered_json to_json(const EvalReport& report);
std::string eval_csv_header();
std::string eval_csv_row(const EvalReport& report);

}  // namespace easq

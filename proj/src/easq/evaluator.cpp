// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

#include "easq/evaluator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <set>

#include "easq/dataset.hpp"
#include "easq/error.hpp"
#include "easq/rng.hpp"

namespace easq {

std::vector<EvalInstance> build_candidate_lists(std::span<const QuestionnaireResponse> responses,
                                                std::span<const std::int64_t> corpus,
                                                std::size_t list_size, std::uint64_t seed) {
  if (list_size < 2) throw ConfigError("eval.list_size must be >= 2");
  if (corpus.size() < list_size) {
    throw ConfigError("corpus has " + std::to_string(corpus.size()) +
                      " items, fewer than eval.list_size " + std::to_string(list_size));
  }
  std::map<std::int64_t, std::set<std::int64_t>> satisfied;
  std::map<std::int64_t, std::vector<std::int64_t>> dissatisfied;
  for (const auto& r : responses) {
    if (r.answer == Answer::satisfied) satisfied[r.user_id].insert(r.item_id);
    if (r.answer == Answer::dissatisfied) {
      auto& d = dissatisfied[r.user_id];
      if (std::find(d.begin(), d.end(), r.item_id) == d.end()) d.push_back(r.item_id);
    }
  }

  std::vector<EvalInstance> out;
  for (const auto& r : responses) {
    if (r.answer != Answer::satisfied) continue;
    const auto& excluded = satisfied[r.user_id];
    EvalInstance inst;
    inst.user_id = r.user_id;
    inst.positive_item = r.item_id;
    inst.ts = r.ts;
    inst.candidates.push_back(r.item_id);
    for (auto item : dissatisfied[r.user_id]) {
      if (inst.candidates.size() == list_size) break;
      if (excluded.count(item)) continue;
      inst.candidates.push_back(item);
      inst.provenance.push_back(NegativeSource::dissatisfied);
    }

    std::vector<std::int64_t> pool;
    for (auto item : corpus) {
      if (excluded.count(item)) continue;
      if (std::find(inst.candidates.begin(), inst.candidates.end(), item) != inst.candidates.end()) {
        continue;
      }
      pool.push_back(item);
    }
    const std::size_t need = list_size - inst.candidates.size();
    if (pool.size() < need) {
      throw ConfigError("corpus too small to fill a candidate list of " +
                        std::to_string(list_size) + " for user " + std::to_string(r.user_id));
    }
    Rng rng(mix_seed(seed, out.size()));
    for (std::size_t k = 0; k < need; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
      std::swap(pool[k], pool[pick(rng)]);
      inst.candidates.push_back(pool[k]);
      inst.provenance.push_back(NegativeSource::sampled);
    }
    out.push_back(std::move(inst));
  }
  return out;
}

std::size_t rank_of(std::span<const std::int64_t> items, std::span<const double> scores,
                    std::int64_t positive) {
  if (items.size() != scores.size()) throw ContractError("rank_of: items and scores differ in length");
  auto it = std::find(items.begin(), items.end(), positive);
  if (it == items.end()) throw ContractError("rank_of: positive is not a candidate");
  const double ps = scores[static_cast<std::size_t>(it - items.begin())];
  std::size_t ahead = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (scores[i] > ps || (scores[i] == ps && items[i] < positive)) ++ahead;
  }
  return ahead + 1;
}

std::size_t rank_and_score(const EasqModel& model, const EvalInstance& instance,
                           const std::map<std::int64_t, double>& durations) {
  const std::size_t buckets = model.config().duration_buckets;
  std::vector<double> scores;
  scores.reserve(instance.candidates.size());
  for (auto item : instance.candidates) {
    auto d = durations.find(item);
    Features f{instance.user_id, item, hour_of_day(instance.ts),
               d == durations.end() ? 0 : duration_bucket(d->second, buckets)};
    scores.push_back(model.main_head(model.encode(f)).score.item());
  }
  return rank_of(instance.candidates, scores, instance.positive_item);
}

double hit_at(std::size_t rank, std::size_t k) { return rank <= k ? 1.0 : 0.0; }

double ndcg_at(std::size_t rank, std::size_t k) {
  return rank <= k ? 1.0 / std::log2(double(rank) + 1.0) : 0.0;
}

double reciprocal_rank(std::size_t rank) { return 1.0 / double(rank); }

EvalReport compute_metrics(std::span<const RankedInstance> ranks) {
  EvalReport rep;
  if (ranks.empty()) {
    rep.status = "insufficient data";
    return rep;
  }
  constexpr std::size_t kMetrics = 7;
  // Per-user sums in user-id order for a fixed reduction order.
  std::map<std::int64_t, std::pair<std::array<double, kMetrics>, std::size_t>> users;
  for (const auto& r : ranks) {
    if (r.rank < 1) throw ContractError("compute_metrics: ranks are 1-based");
    auto& [sum, n] = users[r.user_id];
    const std::array<double, kMetrics> v = {hit_at(r.rank, 1),   hit_at(r.rank, 5),
                                            hit_at(r.rank, 10),  ndcg_at(r.rank, 5),
                                            ndcg_at(r.rank, 10), ndcg_at(r.rank, 20),
                                            reciprocal_rank(r.rank)};
    for (std::size_t m = 0; m < kMetrics; ++m) sum[m] += v[m];
    ++n;
  }
  std::array<std::vector<double>, kMetrics> per_user;
  for (const auto& [user, acc] : users) {
    for (std::size_t m = 0; m < kMetrics; ++m) per_user[m].push_back(acc.first[m] / double(acc.second));
  }
  auto summarise = [](const std::vector<double>& xs) {
    MetricValue v;
    const double n = double(xs.size());
    for (double x : xs) v.mean += x;
    v.mean /= n;
    if (xs.size() > 1) {
      double ss = 0.0;
      for (double x : xs) ss += (x - v.mean) * (x - v.mean);
      v.stderr_ = std::sqrt(ss / (n - 1.0) / n);
    }
    return v;
  };
  MetricValue* slots[kMetrics] = {&rep.hr1,    &rep.hr5,    &rep.hr10, &rep.ndcg5,
                                  &rep.ndcg10, &rep.ndcg20, &rep.mrr};
  for (std::size_t m = 0; m < kMetrics; ++m) *slots[m] = summarise(per_user[m]);
  rep.sufficient = true;
  rep.status = "ok";
  rep.n_users = users.size();
  rep.n_instances = ranks.size();
  return rep;
}

EvalReport evaluate(const EasqModel& model, std::span<const EvalInstance> instances,
                    const std::map<std::int64_t, double>& durations) {
  std::vector<RankedInstance> ranks;
  ranks.reserve(instances.size());
  for (const auto& inst : instances) {
    ranks.push_back({inst.user_id, rank_and_score(model, inst, durations)});
  }
  return compute_metrics(ranks);
}

namespace {

constexpr const char* kMetricNames[] = {"hr@1",   "hr@5",    "hr@10", "ndcg@5",
                                        "ndcg@10", "ndcg@20", "mrr"};

std::array<const MetricValue*, 7> metric_slots(const EvalReport& r) {
  return {&r.hr1, &r.hr5, &r.hr10, &r.ndcg5, &r.ndcg10, &r.ndcg20, &r.mrr};
}

}  // namespace

nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["status"] = r.status;
  const auto slots = metric_slots(r);
  for (std::size_t m = 0; m < slots.size(); ++m) {
    j[kMetricNames[m]] = {{"mean", slots[m]->mean}, {"stderr", slots[m]->stderr_}};
  }
  j["n_users"] = r.n_users;
  j["n_instances"] = r.n_instances;
  return j;
}

std::string eval_csv_header() {
  std::string h = "status";
  for (const char* name : kMetricNames) {
    h += std::string(",") + name + "," + name + "_stderr";
  }
  return h + ",n_users,n_instances";
}

std::string eval_csv_row(const EvalReport& r) {
  std::string row = r.status;
  char buf[64];
  for (const auto* v : metric_slots(r)) {
    std::snprintf(buf, sizeof(buf), ",%.17g,%.17g", v->mean, v->stderr_);
    row += buf;
  }
  return row + "," + std::to_string(r.n_users) + "," + std::to_string(r.n_instances);
}

}  // namespace easq

// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

#include "easq/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "easq/error.hpp"
#include "easq/rng.hpp"

namespace easq {

double behavior_score(const InteractionEvent& e, const BehaviorWeights& w) {
  double y = std::min(e.progress, 1.0);
  if (e.like) y += w.like;
  if (e.follow) y += w.follow;
  if (e.comment || e.forward) y += w.comment_or_forward;
  return y;
}

std::vector<PreferencePair> build_behavior_pairs(std::span<const InteractionEvent> batch,
                                                 const BehaviorWeights& weights,
                                                 std::size_t max_pairs, std::uint64_t seed) {
  std::vector<std::int64_t> user_order;
  std::map<std::int64_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto [it, inserted] = groups.try_emplace(batch[i].user_id);
    if (inserted) user_order.push_back(batch[i].user_id);
    it->second.push_back(i);
  }

  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) y[i] = behavior_score(batch[i], weights);

  std::vector<PreferencePair> pairs;
  for (auto user : user_order) {
    const auto& idx = groups[user];
    for (std::size_t a = 0; a < idx.size(); ++a) {
      for (std::size_t b = a + 1; b < idx.size(); ++b) {
        std::size_t i = idx[a], j = idx[b];
        if (y[i] == y[j]) continue;
        if (y[j] > y[i]) std::swap(i, j);
        pairs.push_back({user, batch[i].item_id, batch[j].item_id, i, j, PairSource::behavior,
                         y[i] - y[j]});
      }
    }
  }

  if (pairs.size() > max_pairs) {
    std::vector<std::size_t> pick(pairs.size());
    std::iota(pick.begin(), pick.end(), 0);
    Rng rng(seed);
    for (std::size_t k = 0; k < max_pairs; ++k) {
      std::uniform_int_distribution<std::size_t> dist(k, pick.size() - 1);
      std::swap(pick[k], pick[dist(rng)]);
    }
    pick.resize(max_pairs);
    std::sort(pick.begin(), pick.end());
    std::vector<PreferencePair> kept;
    kept.reserve(max_pairs);
    for (auto k : pick) kept.push_back(pairs[k]);
    pairs = std::move(kept);
  }
  return pairs;
}

SatisPairs build_satis_pairs(std::span<const QuestionnaireResponse> batch, bool dpo_include_uncertain) {
  SatisPairs out;
  std::vector<std::int64_t> user_order;
  std::map<std::int64_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].answer == Answer::none) continue;
    auto [it, inserted] = groups.try_emplace(batch[i].user_id);
    if (inserted) user_order.push_back(batch[i].user_id);
    it->second.push_back(i);
  }
  for (auto user : user_order) {
    const auto& idx = groups[user];
    for (std::size_t a = 0; a < idx.size(); ++a) {
      for (std::size_t b = a + 1; b < idx.size(); ++b) {
        std::size_t i = idx[a], j = idx[b];
        double si = satisfaction_label(batch[i].answer);
        double sj = satisfaction_label(batch[j].answer);
        if (si == sj) continue;
        if (sj > si) {
          std::swap(i, j);
          std::swap(si, sj);
        }
        if (batch[i].item_id == batch[j].item_id) continue;
        PreferencePair p{user, batch[i].item_id, batch[j].item_id, i, j, PairSource::questionnaire,
                         si - sj};
        out.satis.push_back(p);
        const bool extreme = batch[i].answer == Answer::satisfied &&
                             batch[j].answer == Answer::dissatisfied;
        if (extreme || dpo_include_uncertain) out.dpo.push_back(p);
      }
    }
  }
  return out;
}

namespace {

// Gathers the distinct score tensors referenced by `pairs` so one fused node
// can depend on exactly those.
struct PairInputs {
  std::vector<Tensor> inputs;
  std::vector<std::size_t> pos_slot, neg_slot;
};

PairInputs gather(std::span<const PreferencePair> pairs, std::span<const Tensor> scores) {
  PairInputs g;
  std::map<std::size_t, std::size_t> slot_of;
  auto slot = [&](std::size_t index) {
    if (index >= scores.size()) {
      throw ContractError("pair references batch position " + std::to_string(index) + " but only " +
                          std::to_string(scores.size()) + " scores were given");
    }
    auto [it, inserted] = slot_of.try_emplace(index, g.inputs.size());
    if (inserted) {
      if (scores[index].size() != 1) {
        throw DimensionError("pair scores must be [1], got " + shape_string(scores[index].shape()));
      }
      g.inputs.push_back(scores[index]);
    }
    return it->second;
  };
  for (const auto& p : pairs) {
    g.pos_slot.push_back(slot(p.pos_index));
    g.neg_slot.push_back(slot(p.neg_index));
  }
  return g;
}

}  // namespace

Tensor pairwise_logistic_loss(std::span<const PreferencePair> pairs, std::span<const Tensor> scores) {
  if (pairs.empty()) return Tensor::scalar(0.0);
  PairInputs g = gather(pairs, scores);
  const double inv_n = 1.0 / static_cast<double>(pairs.size());
  double total = 0.0;
  std::vector<double> coeff(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const double d = g.inputs[g.pos_slot[k]].item() - g.inputs[g.neg_slot[k]].item();
    total += softplus_value(-d);
    coeff[k] = sigmoid_value(-d) * inv_n;
  }
  return Tensor::make_op({1}, {total * inv_n}, g.inputs,
                         [g, coeff](std::span<const double> out) mutable {
                           for (std::size_t k = 0; k < coeff.size(); ++k) {
                             const double c = out[0] * coeff[k];
                             Tensor& pos = g.inputs[g.pos_slot[k]];
                             Tensor& neg = g.inputs[g.neg_slot[k]];
                             if (pos.requires_grad()) pos.mutable_grad()[0] -= c;
                             if (neg.requires_grad()) neg.mutable_grad()[0] += c;
                           }
                         });
}

Tensor bpr_loss(std::span<const PreferencePair> pairs, std::span<const Tensor> main_scores) {
  return pairwise_logistic_loss(pairs, main_scores);
}

Tensor satis_loss(std::span<const PreferencePair> pairs, std::span<const Tensor> satis_scores) {
  return pairwise_logistic_loss(pairs, satis_scores);
}

double dpo_pair_value(double policy_pos, double ref_pos, double policy_neg, double ref_neg,
                      double beta) {
  const double inner =
      beta * (std::log(policy_pos / ref_pos) - std::log(policy_neg / ref_neg));
  return softplus_value(-inner);
}

Tensor dpo_loss(std::span<const PreferencePair> pairs, std::span<const Tensor> main_scores,
                std::span<const Tensor> satis_scores, double beta) {
  if (!(beta > 0.0)) throw ContractError("dpo_loss: beta must be > 0");
  if (pairs.empty()) return Tensor::scalar(0.0);
  PairInputs g = gather(pairs, main_scores);

  std::vector<Tensor> detached(satis_scores.size());
  auto reference = [&](std::size_t index) {
    if (index >= satis_scores.size()) {
      throw ContractError("dpo pair references a missing satisfaction score");
    }
    if (!detached[index].defined()) detached[index] = stop_grad(satis_scores[index]);
    return softplus_value(detached[index].item()) + kPolicyFloor;
  };

  const double inv_n = 1.0 / static_cast<double>(pairs.size());
  double total = 0.0;
  std::vector<double> coeff_pos(pairs.size()), coeff_neg(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const double y_pos = g.inputs[g.pos_slot[k]].item();
    const double y_neg = g.inputs[g.neg_slot[k]].item();
    const double pi_pos = softplus_value(y_pos) + kPolicyFloor;
    const double pi_neg = softplus_value(y_neg) + kPolicyFloor;
    const double ref_pos = reference(pairs[k].pos_index);
    const double ref_neg = reference(pairs[k].neg_index);
    const double inner = beta * ((std::log(pi_pos) - std::log(ref_pos)) -
                                 (std::log(pi_neg) - std::log(ref_neg)));
    if (!std::isfinite(inner)) throw NumericError("dpo_loss: non-finite log-ratio");
    total += softplus_value(-inner);
    // d/dinner of softplus(-inner) = -sigmoid(-inner); dlog(pi)/dy = sigmoid(y) / pi.
    const double w = sigmoid_value(-inner) * beta * inv_n;
    coeff_pos[k] = -w * sigmoid_value(y_pos) / pi_pos;
    coeff_neg[k] = w * sigmoid_value(y_neg) / pi_neg;
  }
  return Tensor::make_op({1}, {total * inv_n}, g.inputs,
                         [g, coeff_pos, coeff_neg](std::span<const double> out) mutable {
                           for (std::size_t k = 0; k < coeff_pos.size(); ++k) {
                             Tensor& pos = g.inputs[g.pos_slot[k]];
                             Tensor& neg = g.inputs[g.neg_slot[k]];
                             if (pos.requires_grad()) pos.mutable_grad()[0] += out[0] * coeff_pos[k];
                             if (neg.requires_grad()) neg.mutable_grad()[0] += out[0] * coeff_neg[k];
                           }
                         });
}

Tensor total_loss(const Tensor& main, const Tensor& satis, const Tensor& dpo, double lambda1,
                  double lambda2) {
  for (const Tensor* t : {&main, &satis, &dpo}) {
    if (!std::isfinite(t->item())) throw NumericError("total_loss: non-finite loss term");
  }
  return add(main, add(scale(satis, lambda1), scale(dpo, lambda2)));
}

}  // namespace easq

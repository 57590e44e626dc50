// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

// Pair construction and the three training objectives.
//
//   L_main  = mean over behaviour pairs (i, j), y_i > y_j, of -log sigmoid(yhat_i - yhat_j)
//   L_satis = mean over questionnaire pairs (i, j), s_i > s_j, of -log sigmoid(shat_i - shat_j)
//   L_dpo   = mean over questionnaire pairs of -log sigmoid(beta * [log pi(x+)/ref(x+) - log pi(x-)/ref(x-)])
//   L_total = L_main + lambda1 * L_satis + lambda2 * L_dpo
//
// Where the preference objective comes from. Start from KL-regularised
// reward maximisation over a policy pi for user u,
//
//   max_pi  E_{x ~ pi}[r(u, x)] - beta * KL(pi(.|u) || ref(.|u)).
//
// Its maximiser has the closed form
//
//   pi*(x|u) = ref(x|u) * exp(r(u, x) / beta) / Z(u),
//   Z(u)     = sum_x ref(x|u) * exp(r(u, x) / beta),
//
// so the reward is recoverable from the policy ratio up to a per-user constant:
//
//   r(u, x) = beta * log(pi(x|u) / ref(x|u)) + beta * log Z(u).
//
// Under a Bradley-Terry preference model p(x+ > x- | u) = sigmoid(r(u, x+) - r(u, x-))
// the intractable beta * log Z(u) cancels in the difference, and the negative
// log-likelihood of an observed preference becomes the L_dpo term above.
//
// Here the policy is the main head and the reference is the continuously
// trained satisfaction head, detached. Raw scores are not positive, so both
// are mapped through softplus(.) + 1e-8 before taking logs.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "easq/records.hpp"
#include "easq/tensor.hpp"

namespace easq {

enum class PairSource { behavior, questionnaire };

struct PreferencePair {
  std::int64_t user_id = 0;
  std::int64_t item_pos = 0;
  std::int64_t item_neg = 0;
  // Positions of the two items in the batch the pair was built from.
  std::size_t pos_index = 0;
  std::size_t neg_index = 0;
  PairSource source = PairSource::behavior;
  double margin_label = 0.0;
};

struct BehaviorWeights {
  double like = 0.5;
  double follow = 0.3;
  double comment_or_forward = 0.2;
};

// min(progress, 1) + like/follow/comment-or-forward bonuses.
double behavior_score(const InteractionEvent& e, const BehaviorWeights& w = {});

// All same-user pairs with a strictly higher behaviour score, users in order
// of first appearance. When more than `max_pairs` exist a uniform subset is
// drawn with `seed` and kept in enumeration order.
std::vector<PreferencePair> build_behavior_pairs(std::span<const InteractionEvent> batch,
                                                 const BehaviorWeights& weights,
                                                 std::size_t max_pairs, std::uint64_t seed);

struct SatisPairs {
  std::vector<PreferencePair> satis;  // every strict label difference
  std::vector<PreferencePair> dpo;    // Satisfied vs Dissatisfied unless widened
};

// Responses without an answer are ignored.
SatisPairs build_satis_pairs(std::span<const QuestionnaireResponse> batch,
                             bool dpo_include_uncertain = false);

// `scores[i]` is the [1] score of batch position i.
Tensor pairwise_logistic_loss(std::span<const PreferencePair> pairs, std::span<const Tensor> scores);
Tensor bpr_loss(std::span<const PreferencePair> pairs, std::span<const Tensor> main_scores);
Tensor satis_loss(std::span<const PreferencePair> pairs, std::span<const Tensor> satis_scores);

inline constexpr double kPolicyFloor = 1e-8;

// Single-pair value of -log sigmoid(beta * [log(a/b) - log(c/d)]).
double dpo_pair_value(double policy_pos, double ref_pos, double policy_neg, double ref_neg,
                      double beta);

// The satisfaction scores are detached inside; only main scores get gradient.
Tensor dpo_loss(std::span<const PreferencePair> pairs, std::span<const Tensor> main_scores,
                std::span<const Tensor> satis_scores, double beta);

Tensor total_loss(const Tensor& main, const Tensor& satis, const Tensor& dpo, double lambda1,
                  double lambda2);

}  // namespace easq

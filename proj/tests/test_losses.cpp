// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "easq/error.hpp"
#include "easq/losses.hpp"
#include "easq/model.hpp"
#include "test_util.hpp"

namespace easq {
namespace {

using testing::answer;
using testing::event;

constexpr double kLn2 = 0.6931471805599453;

std::vector<Tensor> scores(std::vector<double> v) {
  std::vector<Tensor> out;
  for (double x : v) out.push_back(Tensor::scalar(x, true));
  return out;
}

PreferencePair pair(std::size_t i, std::size_t j) {
  PreferencePair p;
  p.pos_index = i;
  p.neg_index = j;
  return p;
}

TEST(BehaviorPairs, StrictPreferenceWithinUser) {
  std::vector<InteractionEvent> batch = {event(1, 10, 0.9), event(1, 11, 0.2), event(2, 12, 0.5),
                                         event(1, 13, 0.2), event(2, 14, 0.4, true)};
  auto pairs = build_behavior_pairs(batch, {}, 100, 0);
  // User 1: (10,11), (10,13); the tie 11/13 gives nothing. User 2: (14,12).
  ASSERT_EQ(pairs.size(), 3u);
  for (const auto& p : pairs) {
    EXPECT_EQ(batch[p.pos_index].user_id, batch[p.neg_index].user_id);
    EXPECT_GT(behavior_score(batch[p.pos_index]), behavior_score(batch[p.neg_index]));
    EXPECT_EQ(p.source, PairSource::behavior);
  }
  EXPECT_EQ(pairs[2].item_pos, 14);
}

TEST(BehaviorPairs, ProgressIsCappedAtOne) {
  auto a = event(1, 1, 1.2);
  auto b = event(1, 2, 1.0);
  EXPECT_EQ(behavior_score(a), behavior_score(b));
  std::vector<InteractionEvent> batch = {a, b};
  EXPECT_TRUE(build_behavior_pairs(batch, {}, 10, 0).empty());
}

TEST(BehaviorPairs, SubsampleIsSeededSubset) {
  std::vector<InteractionEvent> batch;
  for (int i = 0; i < 20; ++i) batch.push_back(event(1, i, 0.05 * i));
  auto all = build_behavior_pairs(batch, {}, 1000, 0);
  ASSERT_EQ(all.size(), 190u);
  auto a = build_behavior_pairs(batch, {}, 25, 7);
  auto b = build_behavior_pairs(batch, {}, 25, 7);
  auto c = build_behavior_pairs(batch, {}, 25, 8);
  ASSERT_EQ(a.size(), 25u);
  std::set<std::pair<std::size_t, std::size_t>> full, sa, sc;
  for (const auto& p : all) full.insert({p.pos_index, p.neg_index});
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].pos_index, b[k].pos_index);
    EXPECT_EQ(a[k].neg_index, b[k].neg_index);
    EXPECT_TRUE(full.count({a[k].pos_index, a[k].neg_index}));
    sa.insert({a[k].pos_index, a[k].neg_index});
    sc.insert({c[k].pos_index, c[k].neg_index});
  }
  EXPECT_NE(sa, sc);
}

TEST(SatisPairs, LabelsAndDpoSubset) {
  std::vector<QuestionnaireResponse> batch = {
      answer(1, 1, Answer::satisfied), answer(1, 2, Answer::uncertain),
      answer(1, 3, Answer::dissatisfied), answer(1, 4, Answer::none),
      answer(2, 5, Answer::satisfied), answer(1, 1, Answer::dissatisfied)};
  auto sp = build_satis_pairs(batch);
  // User 1 answered items 1(S), 2(U), 3(D), 1(D): (1,2), (1,3), (2,3), (2,1);
  // the same-item pair 1/1 is dropped.
  ASSERT_EQ(sp.satis.size(), 4u);
  for (const auto& p : sp.satis) {
    EXPECT_GT(p.margin_label, 0.0);
    EXPECT_NE(p.item_pos, p.item_neg);
    EXPECT_EQ(p.source, PairSource::questionnaire);
  }
  ASSERT_EQ(sp.dpo.size(), 1u);
  EXPECT_EQ(sp.dpo[0].item_pos, 1);
  EXPECT_EQ(sp.dpo[0].item_neg, 3);
  EXPECT_EQ(build_satis_pairs(batch, true).dpo.size(), 4u);
}

TEST(SatisPairs, EmptyWithoutAnswers) {
  std::vector<QuestionnaireResponse> batch = {answer(1, 1, Answer::none), answer(1, 2, Answer::none)};
  auto sp = build_satis_pairs(batch);
  EXPECT_TRUE(sp.satis.empty());
  EXPECT_TRUE(sp.dpo.empty());
}

TEST(PairLoss, ClosedFormValues) {
  std::vector<PreferencePair> p = {pair(0, 1)};
  EXPECT_NEAR(bpr_loss(p, scores({0.3, 0.3})).item(), kLn2, 1e-15);
  EXPECT_NEAR(satis_loss(p, scores({-2.0, -2.0})).item(), kLn2, 1e-15);
  EXPECT_NEAR(bpr_loss(p, scores({1.5, 0.5})).item(), 0.3132616875182228, 1e-15);
  EXPECT_NEAR(bpr_loss(p, scores({2.0, 0.0})).item(), 0.12692801104297263, 1e-15);
  EXPECT_LT(bpr_loss(p, scores({60.0, 0.0})).item(), 1e-25);
}

TEST(PairLoss, MatchesDirectFormulaAndGradient) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 2.0);
  std::vector<double> v(8);
  for (auto& x : v) x = n(rng);
  auto s = scores(v);
  std::vector<PreferencePair> p = {pair(0, 1), pair(2, 3), pair(0, 3), pair(7, 4), pair(5, 6)};
  double want = 0.0;
  std::vector<double> g(8, 0.0);
  for (const auto& q : p) {
    const double d = v[q.pos_index] - v[q.neg_index];
    want += std::log1p(std::exp(-d));
    const double sig = 1.0 / (1.0 + std::exp(d));
    g[q.pos_index] -= sig / 5.0;
    g[q.neg_index] += sig / 5.0;
  }
  auto loss = bpr_loss(p, s);
  EXPECT_NEAR(loss.item(), want / 5.0, 1e-14);
  backward(loss);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(s[i].grad()[0], g[i], 1e-14);
}

TEST(PairLoss, TranslationAndPermutationInvariant) {
  std::vector<double> v = {0.4, -1.0, 2.5, 0.1};
  std::vector<PreferencePair> p = {pair(0, 1), pair(2, 3), pair(2, 1)};
  const double base = bpr_loss(p, scores(v)).item();
  std::vector<double> shifted = v;
  for (auto& x : shifted) x += 17.25;
  EXPECT_NEAR(bpr_loss(p, scores(shifted)).item(), base, 1e-13);
  std::vector<PreferencePair> q = {p[2], p[0], p[1]};
  EXPECT_NEAR(bpr_loss(q, scores(v)).item(), base, 1e-15);
}

TEST(PairLoss, EmptyIsExactZero) {
  std::vector<PreferencePair> none;
  auto s = scores({1.0, 2.0});
  auto loss = bpr_loss(none, s);
  EXPECT_EQ(loss.item(), 0.0);
  EXPECT_FALSE(loss.requires_grad());
}

TEST(PairLoss, BadIndexIsRejected) {
  std::vector<PreferencePair> p = {pair(0, 5)};
  EXPECT_THROW(bpr_loss(p, scores({1.0, 2.0})), ContractError);
}

TEST(Dpo, ClosedFormValues) {
  EXPECT_NEAR(dpo_pair_value(2.0, 2.0, 0.5, 0.5, 0.1), kLn2, 1e-15);
  // inner = 0.1 ln 2.
  EXPECT_NEAR(dpo_pair_value(2.0, 1.0, 1.0, 1.0, 0.1), 0.6590902676112267, 1e-15);
  EXPECT_LT(dpo_pair_value(2.0, 1.0, 1.0, 1.0, 0.1), kLn2);
}

TEST(Dpo, EqualRatiosGiveLn2AndGradientsSkipSatisScores) {
  std::vector<PreferencePair> p = {pair(0, 1)};
  auto y = scores({0.7, -0.3});
  auto s = scores({0.7, -0.3});
  auto loss = dpo_loss(p, y, s, 0.1);
  EXPECT_NEAR(loss.item(), kLn2, 1e-14);
  backward(loss);
  EXPECT_EQ(s[0].grad()[0], 0.0);
  EXPECT_EQ(s[1].grad()[0], 0.0);
  EXPECT_LT(y[0].grad()[0], 0.0);
  EXPECT_GT(y[1].grad()[0], 0.0);
}

TEST(Dpo, GradientMatchesFiniteDifferences) {
  std::vector<PreferencePair> p = {pair(0, 1), pair(2, 1), pair(0, 3)};
  std::vector<Tensor> y = scores({0.2, -1.1, 1.7, 0.4});
  auto s = scores({-0.5, 0.3, 0.9, -2.0});
  auto loss = [&] { return dpo_loss(p, y, s, 0.3); };
  auto res = grad_check(loss, y, 1e-6);
  EXPECT_LT(res.max_rel_error, 1e-7);
}

TEST(Dpo, BetaMustBePositive) {
  std::vector<PreferencePair> p = {pair(0, 1)};
  EXPECT_THROW(dpo_loss(p, scores({1, 2}), scores({1, 2}), 0.0), ContractError);
}

TEST(TotalLoss, WeightedSumAndLinearGradients) {
  auto a = Tensor::scalar(0.5), b = Tensor::scalar(0.7), c = Tensor::scalar(0.6);
  EXPECT_NEAR(total_loss(a, b, c, 0.5, 0.5).item(), 1.15, 1e-15);
  EXPECT_EQ(total_loss(a, b, c, 0.0, 0.0).item(), 0.5);

  std::vector<PreferencePair> p = {pair(0, 1), pair(2, 1)};
  auto grads_of = [&](double l1, double l2, int which) {
    auto y = scores({0.3, -0.2, 1.1});
    auto s = scores({0.1, 0.4, -0.6});
    auto lm = bpr_loss(p, y), ls = satis_loss(p, s), ld = dpo_loss(p, y, s, 0.1);
    Tensor t = which == 0 ? total_loss(lm, ls, ld, l1, l2) : which == 1 ? lm : which == 2 ? ls : ld;
    backward(t);
    std::vector<double> g;
    for (auto& x : y) g.push_back(x.grad()[0]);
    for (auto& x : s) g.push_back(x.grad()[0]);
    return g;
  };
  auto gt = grads_of(0.4, 2.5, 0);
  auto gm = grads_of(0, 0, 1), gs = grads_of(0, 0, 2), gd = grads_of(0, 0, 3);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    EXPECT_NEAR(gt[i], gm[i] + 0.4 * gs[i] + 2.5 * gd[i], 1e-12);
  }
}

TEST(TotalLoss, NonFiniteTermThrows) {
  auto bad = Tensor::scalar(std::nan(""));
  EXPECT_THROW(total_loss(bad, Tensor::scalar(0), Tensor::scalar(0), 1, 1), NumericError);
}

// Each loss moves only the groups it is meant to.
TEST(LossRouting, GroupsReachedByEachTerm) {
  auto c = testing::tiny_config();
  c.router = RouterKind::topk_softmax;  // every head stays live
  c.topk = 2;
  EasqModel m(c);
  for (auto& p : m.parameters()) {
    if (p.name == "lora.b") {
      auto v = p.tensor.mutable_values();
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.03 * double(i % 4) - 0.04;
    }
  }
  auto all = m.tensors();
  std::mt19937_64 rng(4);
  std::vector<Tensor> y, s;
  for (int i = 0; i < 4; ++i) {
    auto enc = m.encode(testing::random_features(rng, c));
    y.push_back(m.main_head(enc).score);
    s.push_back(m.satis_head(enc).score);
  }
  std::vector<PreferencePair> p = {pair(0, 1), pair(2, 3), pair(0, 3)};
  auto touched = [&](const Tensor& loss) {
    zero_grads(all);
    backward(loss);
    std::set<ParamGroup> out;
    for (const auto& q : m.parameters()) {
      for (double g : q.tensor.grad()) {
        if (g != 0.0) {
          out.insert(q.group);
          break;
        }
      }
    }
    return out;
  };
  const std::set<ParamGroup> main_side = {ParamGroup::backbone, ParamGroup::main_head};
  const std::set<ParamGroup> satis_side = {ParamGroup::lora, ParamGroup::satis_head};
  EXPECT_EQ(touched(bpr_loss(p, y)), main_side);
  EXPECT_EQ(touched(satis_loss(p, s)), satis_side);
  EXPECT_EQ(touched(dpo_loss(p, y, s, 0.1)), main_side);
}

}  // namespace
}  // namespace easq

// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "easq/error.hpp"
#include "easq/trainer.hpp"
#include "test_util.hpp"

namespace easq {
namespace {

using testing::small_model_config;
using testing::small_stream;
using testing::snapshot;

TrainConfig quick_train(std::size_t steps = 0) {
  TrainConfig t;
  t.batch_size = 32;
  t.max_steps = steps;
  t.lr = 0.01;
  return t;
}

// Flattens every behaviour score in the stream so no behaviour pair exists.
std::vector<Example> without_behavior_pairs(std::vector<Example> stream) {
  for (auto& ex : stream) {
    ex.event.progress = 0.6;
    ex.event.like = ex.event.follow = ex.event.comment = ex.event.forward = false;
  }
  return stream;
}

TEST(Ablation, VariantsAndParsing) {
  auto c = small_model_config();
  EXPECT_FALSE(ablation_variant(c, Ablation::no_lora).use_lora);
  auto moe = ablation_variant(c, Ablation::no_moe);
  EXPECT_TRUE(moe.single_expert);
  EXPECT_EQ(moe.k1, 1u);
  EXPECT_EQ(ablation_variant(c, Ablation::no_dpo).lambda2, 0.0);
  auto full = ablation_variant(c, Ablation::full);
  EXPECT_EQ(full.use_lora, c.use_lora);
  EXPECT_EQ(full.lambda2, c.lambda2);
  for (auto a : {Ablation::full, Ablation::no_lora, Ablation::no_moe, Ablation::no_dpo}) {
    EXPECT_EQ(parse_ablation(to_string(a)), a);
  }
  EXPECT_THROW(parse_ablation("no_backbone"), ConfigError);
}

TEST(TrainConfig, Validation) {
  TrainConfig t;
  t.batch_size = 1;
  EXPECT_THROW(t.validate(), ConfigError);
  t = TrainConfig{};
  t.lr = 0.0;
  EXPECT_THROW(t.validate(), ConfigError);
}

TEST(Trainer, BehaviorOnlyFreezesAdapterAndSatisHead) {
  auto c = small_model_config();
  c.lambda1 = c.lambda2 = 0.0;
  EasqModel m(c);
  auto lora0 = snapshot(m.tensors(ParamGroup::lora));
  auto satis0 = snapshot(m.tensors(ParamGroup::satis_head));
  auto main0 = snapshot(m.tensors(ParamGroup::main_head));
  auto stream = small_stream(200, 1);
  auto log = train_online(stream, m, quick_train(100));
  ASSERT_EQ(log.size(), 100u);
  EXPECT_EQ(snapshot(m.tensors(ParamGroup::lora)), lora0);
  EXPECT_EQ(snapshot(m.tensors(ParamGroup::satis_head)), satis0);
  EXPECT_NE(snapshot(m.tensors(ParamGroup::main_head)), main0);
}

TEST(Trainer, SatisOnlyFreezesBackboneAndMainHead) {
  auto c = small_model_config();
  c.router = RouterKind::topk_softmax;
  c.topk = 2;
  c.lambda1 = 1.0;
  c.lambda2 = 0.0;
  EasqModel m(c);
  auto backbone0 = snapshot(m.tensors(ParamGroup::backbone));
  auto main0 = snapshot(m.tensors(ParamGroup::main_head));
  auto satis0 = snapshot(m.tensors(ParamGroup::satis_head));
  auto stream = without_behavior_pairs(small_stream(200, 2));
  auto t = quick_train(100);
  t.replay_buffer_size = 256;
  auto log = train_online(stream, m, t);
  std::size_t satis_steps = 0;
  for (const auto& r : log) {
    EXPECT_EQ(r.n_behavior_pairs, 0u);
    EXPECT_EQ(r.loss_main, 0.0);
    satis_steps += r.n_satis_pairs > 0;
  }
  ASSERT_GT(satis_steps, 0u);
  EXPECT_EQ(snapshot(m.tensors(ParamGroup::backbone)), backbone0);
  EXPECT_EQ(snapshot(m.tensors(ParamGroup::main_head)), main0);
  EXPECT_NE(snapshot(m.tensors(ParamGroup::satis_head)), satis0);
}

TEST(Trainer, BatchWithoutAnswersHasZeroSatisTerms) {
  EasqModel m(small_model_config());
  auto stream = small_stream(20, 3);
  for (auto& ex : stream) ex.response.answer = Answer::none;
  Trainer tr(m, quick_train());
  auto row = tr.train_batch(std::span(stream).first(32), 0);
  EXPECT_EQ(row.n_satis_pairs, 0u);
  EXPECT_EQ(row.loss_satis, 0.0);
  EXPECT_EQ(row.loss_dpo, 0.0);
  EXPECT_GT(row.n_behavior_pairs, 0u);
  EXPECT_EQ(tr.state().step, 1u);
}

TEST(Trainer, SameSeedSameParameters) {
  auto stream = small_stream(100, 4);
  auto run = [&] {
    EasqModel m(small_model_config());
    auto t = quick_train(40);
    t.replay_buffer_size = 64;
    auto log = train_online(stream, m, t);
    std::string text;
    for (const auto& r : log) text += format_log_row(r) + "\n";
    return std::make_pair(snapshot(m.tensors()), text);
  };
  auto a = run();
  auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Trainer, ConsumesStreamOnceInOrder) {
  EasqModel m(small_model_config());
  auto stream = small_stream(10, 5);  // 160 examples, 5 batches of 32
  Trainer tr(m, quick_train());
  std::vector<std::uint64_t> steps;
  tr.run(stream, [&](const LogRow& r, const Trainer&) { steps.push_back(r.step); });
  EXPECT_EQ(steps, (std::vector<std::uint64_t>{1, 2, 3, 4, 5}));
  EXPECT_EQ(tr.state().next_batch, 5u);
  EXPECT_TRUE(tr.run(stream).empty());
}

TEST(Trainer, ReplayIsBoundedAndAnsweredOnly) {
  EasqModel m(small_model_config());
  auto stream = small_stream(200, 6);
  auto t = quick_train(60);
  t.replay_buffer_size = 10;
  Trainer tr(m, t);
  tr.run(stream);
  EXPECT_LE(tr.state().replay.size(), 10u);
  EXPECT_GT(tr.state().replay.size(), 0u);
  for (const auto& e : tr.state().replay) {
    EXPECT_NE(e.response.answer, Answer::none);
    EXPECT_EQ(e.features.user_id, e.response.user_id);
  }
}

TEST(Trainer, ReplayAddsPairsForReturningUsers) {
  auto stream = small_stream(200, 7);
  auto count = [&](std::size_t buffer) {
    EasqModel m(small_model_config());
    auto t = quick_train(80);
    t.replay_buffer_size = buffer;
    std::size_t n = 0;
    for (const auto& r : train_online(stream, m, t)) n += r.n_satis_pairs;
    return n;
  };
  EXPECT_GT(count(256), count(0));
}

TEST(Trainer, MainLossDecreasesOnDenseWorld) {
  auto c = small_model_config();
  EasqModel m(c);
  auto stream = small_stream(800, 8);
  auto log = train_online(stream, m, quick_train());
  ASSERT_GE(log.size(), 100u);
  const std::size_t tenth = log.size() / 10;
  double first = 0, last = 0;
  for (std::size_t i = 0; i < tenth; ++i) {
    first += log[i].loss_main;
    last += log[log.size() - 1 - i].loss_main;
  }
  EXPECT_LT(last, first);
}

TEST(Trainer, NonFiniteParameterAbortsWithBatchId) {
  EasqModel m(small_model_config());
  for (auto& p : m.parameters()) {
    if (p.name == "backbone.b_hidden") p.tensor.mutable_values()[0] = std::numeric_limits<double>::quiet_NaN();
  }
  auto stream = small_stream(20, 9);
  Trainer tr(m, quick_train());
  try {
    tr.train_batch(std::span(stream).first(32), 17);
    FAIL() << "expected a numeric error";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("batch 17"), std::string::npos) << e.what();
  }
  EXPECT_EQ(tr.state().step, 0u);
}

TEST(Trainer, LogRowFormat) {
  LogRow r{3, 0.5, 0.25, 0.0, 10, 2, 1};
  EXPECT_EQ(format_log_row(r), "3,0.5,0.25,0,10,2,1");
}

}  // namespace
}  // namespace easq

// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <iterator>
#include <utility>

#include <gtest/gtest.h>

#include "easq/config.hpp"
#include "easq/dataset.hpp"
#include "easq/error.hpp"
#include "easq/pipeline.hpp"
#include "test_util.hpp"

namespace easq {
namespace {

using testing::scratch_dir;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

RunConfig small_run() {
  RunConfig c;
  c.model = testing::small_model_config();
  c.sim = testing::small_world(60);
  c.train.batch_size = 32;
  c.eval.list_size = 20;
  return c;
}

TEST(Config, UnknownKeysAndSectionsAreRejected) {
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"model": {"d_hh": 3}})")),
               ConfigError);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"optim": {}})")), ConfigError);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"model": {"d_h": -3}})")),
               ConfigError);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"model": {"use_lora": 1}})")),
               ConfigError);
  try {
    run_config_from_json(nlohmann::json::parse(R"({"train": {"lr2": 1}})"));
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train.lr2"), std::string::npos);
  }
}

TEST(Config, OverridesParseJsonThenString) {
  RunConfig c;
  apply_override(c, "model.lambda1=0.25");
  apply_override(c, "model.router=topk_softmax");
  apply_override(c, "train.ablation=no_dpo");
  apply_override(c, "sim.preset=production");
  EXPECT_EQ(c.model.lambda1, 0.25);
  EXPECT_EQ(c.model.router, RouterKind::topk_softmax);
  EXPECT_EQ(c.train.ablation, Ablation::no_dpo);
  EXPECT_EQ(c.sim.preset, "production");
  EXPECT_THROW(apply_override(c, "model.lambda1"), ConfigError);
  EXPECT_THROW(apply_override(c, "lambda1=3"), ConfigError);
  EXPECT_THROW(apply_override(c, "model.nope=3"), ConfigError);
  EXPECT_THROW(apply_override(c, "model.router=dense"), ConfigError);
}

TEST(Config, EchoRoundTrips) {
  auto dir = scratch_dir("config_echo");
  RunConfig c = small_run();
  c.model.lambda2 = 0.125;
  c.train.replay_buffer_size = 17;
  write_config_echo(dir, c);
  auto back = load_run_config(dir / kConfigEchoFile);
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
}

TEST(Config, CommentsAreAllowed) {
  auto dir = scratch_dir("config_comments");
  std::ofstream(dir / "c.json") << "{\n  // tuned\n  \"model\": {\"k1\": 3}\n}\n";
  EXPECT_EQ(load_run_config(dir / "c.json").model.k1, 3u);
  std::ofstream(dir / "bad.json") << "{\"model\": ";
  EXPECT_THROW(load_run_config(dir / "bad.json"), ConfigError);
}

TEST(Config, RunValidation) {
  RunConfig c;
  c.eval.holdout_fraction = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.eval.list_size = 1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(LogIo, WriteReadPreservesTheStream) {
  auto dir = scratch_dir("log_io");
  auto world = init_world(testing::small_world(40), 3);
  auto log = simulate_log(world);
  write_log(dir, log, world, true);
  auto back = read_log(dir);
  ASSERT_EQ(back.events.size(), log.events.size());
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    EXPECT_EQ(back.events[i].ts, log.events[i].ts);
    EXPECT_EQ(back.events[i].progress, log.events[i].progress);
    EXPECT_EQ(back.events[i].s_true, log.events[i].s_true);
    EXPECT_EQ(back.responses[i].answer, log.responses[i].answer);
    EXPECT_EQ(back.responses[i].exposed, log.responses[i].exposed);
  }
}

TEST(LogIo, ErrorsNameTheLine) {
  auto dir = scratch_dir("log_bad");
  std::ofstream(dir / "interactions.jsonl")
      << R"({"ts":1,"user_id":0,"item_id":0,"watch_time_s":1,"duration_s":2,"progress":0.5,"like":false,"follow":false,"comment":false,"forward":false})"
      << "\n"
      << R"({"ts":2,"user_id":0,"item_id":1,"watch_time_s":1})" << "\n";
  try {
    read_log(dir);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("interactions.jsonl:2"), std::string::npos) << e.what();
  }
}

TEST(Split, ChronologicalAndDisjoint) {
  auto ex = testing::small_stream(50, 2);
  auto s = chronological_split(ex, 0.2);
  ASSERT_FALSE(s.train.empty());
  ASSERT_FALSE(s.eval.empty());
  EXPECT_LT(s.train.back().event.ts, s.eval.front().event.ts);
  EXPECT_EQ(s.train.size() + s.eval.size(), ex.size());
  EXPECT_NEAR(double(s.eval.size()) / double(ex.size()), 0.2, 0.01);
}

TEST(Features, HourAndDurationBuckets) {
  EXPECT_EQ(hour_of_day(0.0), 0);
  EXPECT_EQ(hour_of_day(3600.0 * 25 + 1), 1);
  EXPECT_EQ(duration_bucket(5.0, 8), 0);
  EXPECT_EQ(duration_bucket(120.0, 8), 7);
  EXPECT_EQ(duration_bucket(1000.0, 8), 7);
  EXPECT_EQ(duration_bucket(30.0, 1), 0);
}

TEST(Commands, GenDataIsByteStableAndRefusesToOverwrite) {
  auto a = scratch_dir("gen_a");
  auto b = scratch_dir("gen_b");
  cmd_gen_data(small_run(), a, true);
  cmd_gen_data(small_run(), b, true);
  for (const char* f : {"interactions.jsonl", "questionnaire.jsonl", "world_meta.json", "config.json"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_THROW(cmd_gen_data(small_run(), a, false), ConfigError);
}

TEST(Commands, TrainEvalIsReproducible) {
  auto data = scratch_dir("pipe_data");
  cmd_gen_data(small_run(), data, true);
  auto r1 = scratch_dir("pipe_run1");
  auto r2 = scratch_dir("pipe_run2");
  cmd_train(small_run(), data, r1);
  cmd_train(small_run(), data, r2);
  EXPECT_EQ(slurp(r1 / "model.ckpt"), slurp(r2 / "model.ckpt"));
  EXPECT_EQ(slurp(r1 / "train_log.csv"), slurp(r2 / "train_log.csv"));
  auto e1 = scratch_dir("pipe_eval1");
  auto e2 = scratch_dir("pipe_eval2");
  for (const auto& [run, out] : {std::pair{r1, e1}, std::pair{r2, e2}}) {
    try {
      cmd_eval(small_run(), run / "model.ckpt", data, out);
    } catch (const InsufficientData&) {
    }
  }
  EXPECT_EQ(slurp(e1 / "eval_report.json"), slurp(e2 / "eval_report.json"));
  EXPECT_FALSE(slurp(e1 / "eval_report.json").empty());
}

TEST(Commands, ValidateSimWithoutAnswersIsInsufficient) {
  auto data = scratch_dir("pipe_noans");
  cmd_gen_data(small_run(), data, true);
  std::ofstream(data / "questionnaire.jsonl", std::ios::trunc);
  EXPECT_THROW(cmd_validate_sim(data, scratch_dir("pipe_noans_out")), InsufficientData);
}

}  // namespace
}  // namespace easq

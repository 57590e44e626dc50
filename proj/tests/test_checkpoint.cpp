// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <iterator>

#include <gtest/gtest.h>

#include "easq/checkpoint.hpp"
#include "easq/error.hpp"
#include "easq/trainer.hpp"
#include "test_util.hpp"

namespace easq {
namespace {

using testing::scratch_dir;
using testing::small_model_config;
using testing::small_stream;
using testing::snapshot;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

TrainConfig train_config() {
  TrainConfig t;
  t.batch_size = 32;
  t.lr = 0.01;
  t.replay_buffer_size = 64;
  return t;
}

TEST(Checkpoint, RoundTripRestoresParameters) {
  auto dir = scratch_dir("ckpt_roundtrip");
  EasqModel m(small_model_config());
  auto stream = small_stream(40, 1);
  auto t = train_config();
  t.max_steps = 10;
  train_online(stream, m, t);
  save_checkpoint(dir / "a.ckpt", m);
  auto loaded = load_checkpoint(dir / "a.ckpt");
  EXPECT_EQ(snapshot(loaded.model.tensors()), snapshot(m.tensors()));
  EXPECT_FALSE(loaded.contents.optimizer.has_value());
  EXPECT_TRUE(loaded.contents.config_echo.is_null());
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  auto dir = scratch_dir("ckpt_idem");
  EasqModel m(small_model_config());
  Trainer tr(m, train_config());
  auto stream = small_stream(40, 2);
  tr.run(stream);
  nlohmann::ordered_json echo = {{"note", "x"}};
  save_checkpoint(dir / "a.ckpt", m, &tr.optimizer(), &tr.state(), echo);

  EasqModel m2(small_model_config());
  AdamState opt;
  TrainerState st;
  auto c = load_checkpoint_into(dir / "a.ckpt", m2, &opt, &st);
  EXPECT_EQ(c.config_echo["note"], "x");
  save_checkpoint(dir / "b.ckpt", m2, &opt, &st, echo);
  EXPECT_EQ(slurp(dir / "a.ckpt"), slurp(dir / "b.ckpt"));
  EXPECT_EQ(st.replay.size(), tr.state().replay.size());
}

TEST(Checkpoint, ResumeIsBitwiseEquivalent) {
  auto dir = scratch_dir("ckpt_resume");
  auto stream = small_stream(60, 3);
  auto t = train_config();

  EasqModel straight(small_model_config());
  Trainer a(straight, t);
  a.run(stream);

  EasqModel first(small_model_config());
  auto t10 = t;
  t10.max_steps = 10;
  Trainer b(first, t10);
  b.run(stream);
  save_checkpoint(dir / "mid.ckpt", first, &b.optimizer(), &b.state());

  EasqModel resumed(small_model_config());
  Trainer c(resumed, t);
  load_checkpoint_into(dir / "mid.ckpt", resumed, &c.optimizer(), &c.state());
  c.run(stream);

  EXPECT_EQ(snapshot(resumed.tensors()), snapshot(straight.tensors()));
  EXPECT_EQ(c.state().step, a.state().step);
  EXPECT_EQ(c.optimizer().first_moment, a.optimizer().first_moment);
  EXPECT_EQ(c.optimizer().param_steps, a.optimizer().param_steps);
}

TEST(Checkpoint, BadMagicAndVersion) {
  auto dir = scratch_dir("ckpt_version");
  EasqModel m(small_model_config());
  save_checkpoint(dir / "a.ckpt", m);
  auto bytes = slurp(dir / "a.ckpt");

  auto wrong_magic = bytes;
  wrong_magic[0] = 'X';
  spit(dir / "magic.ckpt", wrong_magic);
  try {
    load_checkpoint(dir / "magic.ckpt");
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.status(), Status::checkpoint_version);
  }

  auto wrong_version = bytes;
  const auto pos = wrong_version.find("\"format_version\":1");
  ASSERT_NE(pos, std::string::npos);
  wrong_version[pos + 17] = '7';
  spit(dir / "version.ckpt", wrong_version);
  try {
    read_checkpoint_manifest(dir / "version.ckpt");
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.status(), Status::checkpoint_version);
    EXPECT_NE(std::string(e.what()).find("format_version 7"), std::string::npos);
  }
}

TEST(Checkpoint, TruncationIsDetected) {
  auto dir = scratch_dir("ckpt_trunc");
  EasqModel m(small_model_config());
  save_checkpoint(dir / "a.ckpt", m);
  const auto bytes = slurp(dir / "a.ckpt");
  for (std::size_t cut : {std::size_t{4}, std::size_t{40}, bytes.size() - 3}) {
    spit(dir / "t.ckpt", bytes.substr(0, cut));
    try {
      load_checkpoint(dir / "t.ckpt");
      FAIL() << cut;
    } catch (const CheckpointError& e) {
      EXPECT_EQ(e.status(), Status::checkpoint_truncated) << cut;
    }
  }
}

TEST(Checkpoint, ShapeMismatchNamesTheEntry) {
  auto dir = scratch_dir("ckpt_shape");
  EasqModel m(small_model_config());
  save_checkpoint(dir / "a.ckpt", m);
  auto other = small_model_config();
  other.d_h = 5;
  EasqModel wrong(other);
  try {
    load_checkpoint_into(dir / "a.ckpt", wrong);
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.status(), Status::checkpoint_shape);
    EXPECT_NE(std::string(e.what()).find("backbone.w0"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, MissingFileIsIoError) {
  EXPECT_THROW(load_checkpoint("/nonexistent/easq.ckpt"), IoError);
}

}  // namespace
}  // namespace easq

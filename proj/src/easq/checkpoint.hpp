// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

// Checkpoint file layout:
//
//   "EASQCKPT"            8 bytes
//   manifest length       uint64, little endian
//   manifest              JSON: format_version, model config, config echo,
//                         entries {name, kind, shape, offset, count},
//                         optimizer and trainer state, payload_bytes
//   payload               little-endian IEEE-754 doubles
//
// Entries cover every parameter and, when present, both Adam moments of
// every parameter. Offsets are in bytes from the start of the payload.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <json.hpp>

#include "easq/adam.hpp"
#include "easq/model.hpp"
#include "easq/trainer.hpp"

namespace easq {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointContents {
  EasqConfig model_config;
  nlohmann::json config_echo;  // null when the writer had none
  std::optional<AdamState> optimizer;
  std::optional<TrainerState> trainer;
};

void save_checkpoint(const std::filesystem::path& path, const EasqModel& model,
                     const AdamState* optimizer = nullptr, const TrainerState* trainer = nullptr,
                     const nlohmann::ordered_json& config_echo = nullptr);

// Reads the manifest only.
CheckpointContents read_checkpoint_manifest(const std::filesystem::path& path);

// Loads parameter values into `model`, whose shapes must match the manifest
// entry for entry. Fills `optimizer`/`trainer` when both file and pointer
// carry them.
CheckpointContents load_checkpoint_into(const std::filesystem::path& path, EasqModel& model,
                                        AdamState* optimizer = nullptr,
                                        TrainerState* trainer = nullptr);

struct LoadedModel {
  EasqModel model;
  CheckpointContents contents;
};

// Builds a model from the stored config and loads it.
LoadedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace easq

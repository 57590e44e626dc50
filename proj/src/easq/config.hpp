// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

// Run configuration: one JSON document with four sections (model, train, sim,
// eval). Overrides use dotted keys, e.g. "model.lambda1=0". Unknown keys and
// ill-typed values raise ConfigError.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "easq/model.hpp"
#include "easq/simenv.hpp"
#include "easq/trainer.hpp"

namespace easq {

struct EvalConfig {
  std::size_t list_size = 100;
  std::uint64_t seed = 0;
  double holdout_fraction = 0.2;
};

struct RunConfig {
  EasqConfig model;
  TrainConfig train;
  SimConfig sim;
  EvalConfig eval;

  // Resolves preset-derived fields and checks every section.
  void validate();
};

nlohmann::ordered_json to_json(const EasqConfig& c);
nlohmann::ordered_json to_json(const TrainConfig& c);
nlohmann::ordered_json to_json(const SimConfig& c);
nlohmann::ordered_json to_json(const EvalConfig& c);
nlohmann::ordered_json to_json(const RunConfig& c);

// Fields absent from `j` keep their defaults.
EasqConfig model_config_from_json(const nlohmann::json& j);
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);
// `assignment` is "section.key=value"; value is read as JSON, falling back to
// a bare string.
void apply_override(RunConfig& config, const std::string& assignment);

inline constexpr const char* kConfigEchoFile = "config.json";
void write_config_echo(const std::filesystem::path& dir, const RunConfig& config);

}  // namespace easq

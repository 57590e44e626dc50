// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end commands. Each writes its outputs plus the resolved config echo
// into an output directory; the same (config, inputs) give the same bytes.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "easq/config.hpp"
#include "easq/evaluator.hpp"
#include "easq/simenv.hpp"
#include "easq/trainer.hpp"

namespace easq {

// Behaviour-only reference: no adapter, no questionnaire losses.
EasqConfig behavior_only(EasqConfig config);

struct PreparedData {
  Split split;
  std::map<std::int64_t, double> durations;
  std::vector<std::int64_t> corpus;  // every item seen in the log, ascending
};

PreparedData prepare_data(const SimLog& log, const RunConfig& config);

std::vector<EvalInstance> eval_instances(const PreparedData& data, const RunConfig& config);

struct ExperimentResult {
  EvalReport report;
  std::vector<LogRow> log;
};

// Trains `model_config` on the train split and evaluates on the held-out
// window. `model_config` is used as given; apply ablation_variant first.
ExperimentResult run_experiment(const EasqConfig& model_config, const RunConfig& config,
                                const PreparedData& data);

void cmd_gen_data(RunConfig config, const std::filesystem::path& out_dir, bool force);

struct TrainOptions {
  std::optional<std::filesystem::path> resume;
};
// Final checkpoint: out_dir/model.ckpt. Periodic: out_dir/checkpoints/.
void cmd_train(RunConfig config, const std::filesystem::path& data_dir,
               const std::filesystem::path& out_dir, const TrainOptions& options = {});

// Throws InsufficientData (after writing the report) when the held-out window
// has no Satisfied answers.
EvalReport cmd_eval(RunConfig config, const std::filesystem::path& checkpoint,
                    const std::filesystem::path& data_dir, const std::filesystem::path& out_dir);

// Without a data_dir each seed gets its own freshly simulated world.
void cmd_ablate(RunConfig config, const std::optional<std::filesystem::path>& data_dir,
                const std::filesystem::path& out_dir, const std::vector<std::uint64_t>& seeds);

void cmd_sweep(RunConfig config, const std::optional<std::filesystem::path>& data_dir,
               const std::filesystem::path& out_dir, const std::vector<double>& lambda1_grid,
               const std::vector<double>& lambda2_grid, const std::vector<std::uint64_t>& seeds);

ValidityReport cmd_validate_sim(const std::filesystem::path& data_dir,
                                const std::filesystem::path& out_dir);

}  // namespace easq

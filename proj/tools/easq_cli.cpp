// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end over the C API.
//
//   easq gen-data     --out DIR [--force]
//   easq train        --data DIR --out DIR [--resume CKPT]
//   easq eval         --checkpoint CKPT --data DIR --out DIR
//   easq ablate       --out DIR --seeds 1,2,3 [--data DIR]
//   easq sweep        --out DIR --lambda1 .. --lambda2 .. --seeds .. [--data DIR]
//   easq validate-sim --data DIR --out DIR
//   easq show-config
//
// Every command except validate-sim accepts --config FILE and repeated
// --set section.key=value.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "easq/easq.h"

namespace {

// 0 ok, 2 config, 3 data, 4 insufficient data, 5 numeric, 1 anything else.
int exit_code(easq_status s) {
  switch (s) {
    case EASQ_OK:
      return 0;
    case EASQ_ERR_CONFIG:
    case EASQ_ERR_INVALID_ARGUMENT:
      return 2;
    case EASQ_ERR_DATA:
    case EASQ_ERR_IO:
    case EASQ_ERR_CHECKPOINT_VERSION:
    case EASQ_ERR_CHECKPOINT_TRUNCATED:
    case EASQ_ERR_CHECKPOINT_SHAPE:
      return 3;
    case EASQ_ERR_INSUFFICIENT_DATA:
      return 4;
    case EASQ_ERR_NUMERIC:
      return 5;
    default:
      return 1;
  }
}

int report(easq_status s) {
  if (s != EASQ_OK) {
    std::fprintf(stderr, "easq: %s: %s\n", easq_status_name(s), easq_last_error());
  }
  return exit_code(s);
}

struct ConfigDeleter {
  void operator()(easq_config* c) const { easq_config_free(c); }
};
using ConfigPtr = std::unique_ptr<easq_config, ConfigDeleter>;

struct ConfigArgs {
  std::string file;
  std::vector<std::string> sets;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--set", sets, "Override, section.key=value (repeatable)");
  }

  easq_status build(ConfigPtr& out) const {
    easq_config* raw = nullptr;
    easq_status s = file.empty() ? easq_config_create(&raw) : easq_config_load(file.c_str(), &raw);
    if (s != EASQ_OK) return s;
    out.reset(raw);
    for (const auto& kv : sets) {
      if ((s = easq_config_set(raw, kv.c_str())) != EASQ_OK) return s;
    }
    return EASQ_OK;
  }
};

const char* or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EASQ: satisfaction-aligned ranking with sparse questionnaire feedback"};
  app.require_subcommand(1);
  app.set_version_flag("--version", easq_version());

  std::string out_dir, data_dir, checkpoint, resume;
  bool force = false;
  std::vector<std::uint64_t> seeds;
  std::vector<double> lambda1, lambda2;

  ConfigArgs gen_cfg, train_cfg, eval_cfg, ablate_cfg, sweep_cfg, show_cfg;

  auto* gen = app.add_subcommand("gen-data", "Simulate a world and write interaction logs");
  gen_cfg.attach(gen);
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_flag("--force", force, "Write into a non-empty directory");

  auto* train = app.add_subcommand("train", "Train online over a log directory");
  train_cfg.attach(train);
  train->add_option("--data", data_dir, "Log directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--out", out_dir, "Output directory")->required();
  train->add_option("--resume", resume, "Checkpoint to resume from")->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the held-out window");
  eval_cfg.attach(eval);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data_dir, "Log directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--out", out_dir, "Output directory")->required();

  auto* ablate = app.add_subcommand("ablate", "Train and evaluate the four variants per seed");
  ablate_cfg.attach(ablate);
  ablate->add_option("--data", data_dir, "Shared log directory (default: simulate per seed)")
      ->check(CLI::ExistingDirectory);
  ablate->add_option("--out", out_dir, "Output directory")->required();
  ablate->add_option("--seeds", seeds, "Seeds")->required()->delimiter(',');

  auto* sweep = app.add_subcommand("sweep", "Grid over lambda1 x lambda2");
  sweep_cfg.attach(sweep);
  sweep->add_option("--data", data_dir, "Shared log directory (default: simulate per seed)")
      ->check(CLI::ExistingDirectory);
  sweep->add_option("--out", out_dir, "Output directory")->required();
  sweep->add_option("--lambda1", lambda1, "lambda1 grid")->required()->delimiter(',');
  sweep->add_option("--lambda2", lambda2, "lambda2 grid")->required()->delimiter(',');
  sweep->add_option("--seeds", seeds, "Seeds")->required()->delimiter(',');

  auto* validate = app.add_subcommand("validate-sim", "Questionnaire vs behaviour agreement report");
  validate->add_option("--data", data_dir, "Log directory")->required()->check(CLI::ExistingDirectory);
  validate->add_option("--out", out_dir, "Output directory")->required();

  auto* show = app.add_subcommand("show-config", "Print the resolved configuration");
  show_cfg.attach(show);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  ConfigPtr cfg;
  easq_status s = EASQ_OK;
  if (*gen) {
    if ((s = gen_cfg.build(cfg)) == EASQ_OK) s = easq_gen_data(cfg.get(), out_dir.c_str(), force);
  } else if (*train) {
    if ((s = train_cfg.build(cfg)) == EASQ_OK) {
      s = easq_train(cfg.get(), data_dir.c_str(), out_dir.c_str(), or_null(resume));
    }
  } else if (*eval) {
    if ((s = eval_cfg.build(cfg)) == EASQ_OK) {
      s = easq_eval(cfg.get(), checkpoint.c_str(), data_dir.c_str(), out_dir.c_str());
    }
  } else if (*ablate) {
    if ((s = ablate_cfg.build(cfg)) == EASQ_OK) {
      s = easq_ablate(cfg.get(), or_null(data_dir), out_dir.c_str(), seeds.data(), seeds.size());
    }
  } else if (*sweep) {
    if ((s = sweep_cfg.build(cfg)) == EASQ_OK) {
      s = easq_sweep(cfg.get(), or_null(data_dir), out_dir.c_str(), lambda1.data(), lambda1.size(),
                     lambda2.data(), lambda2.size(), seeds.data(), seeds.size());
    }
  } else if (*validate) {
    s = easq_validate_sim(data_dir.c_str(), out_dir.c_str());
  } else if (*show) {
    if ((s = show_cfg.build(cfg)) == EASQ_OK) {
      char* text = nullptr;
      if ((s = easq_config_to_json(cfg.get(), &text)) == EASQ_OK) {
        std::printf("%s\n", text);
        easq_string_free(text);
      }
    }
  }
  if (s == EASQ_OK && !out_dir.empty()) std::printf("wrote %s\n", out_dir.c_str());
  return report(s);
}

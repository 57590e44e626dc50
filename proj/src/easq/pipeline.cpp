// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

#include "easq/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "easq/checkpoint.hpp"
#include "easq/dataset.hpp"
#include "easq/error.hpp"

namespace easq {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::ofstream open_out(const fs::path& p, bool append = false) {
  std::ofstream out(p, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

SimLog simulate(const RunConfig& config, std::uint64_t seed) {
  SimConfig sim = config.sim;
  sim.seed = seed;
  sim.resolve();
  return simulate_log(init_world(sim, seed));
}

std::vector<QuestionnaireResponse> eval_responses(const PreparedData& data) {
  std::vector<QuestionnaireResponse> out;
  for (const auto& ex : data.split.eval) {
    if (ex.response.answer != Answer::none) out.push_back(ex.response);
  }
  return out;
}

const MetricValue& metric(const EvalReport& r, std::size_t m) {
  const MetricValue* slots[] = {&r.hr1, &r.hr5, &r.hr10, &r.ndcg5, &r.ndcg10, &r.ndcg20, &r.mrr};
  return *slots[m];
}

constexpr const char* kMetricKeys[] = {"hr1", "hr5", "hr10", "ndcg5", "ndcg10", "ndcg20", "mrr"};

void write_report(const fs::path& out_dir, const EvalReport& report) {
  auto j = open_out(out_dir / "eval_report.json");
  j << to_json(report).dump(2) << '\n';
  auto c = open_out(out_dir / "eval_report.csv");
  c << eval_csv_header() << '\n' << eval_csv_row(report) << '\n';
}

void require_empty_or_force(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir) && !force) {
    throw ConfigError("output directory " + dir.string() + " is not empty (use --force)");
  }
}

}  // namespace

EasqConfig behavior_only(EasqConfig config) {
  config.use_lora = false;
  config.lambda1 = 0.0;
  config.lambda2 = 0.0;
  return config;
}

PreparedData prepare_data(const SimLog& log, const RunConfig& config) {
  PreparedData d;
  auto examples = make_examples(log, config.model.duration_buckets);
  d.durations = item_catalog(examples);
  for (const auto& [item, dur] : d.durations) d.corpus.push_back(item);
  d.split = chronological_split(std::move(examples), config.eval.holdout_fraction);
  return d;
}

std::vector<EvalInstance> eval_instances(const PreparedData& data, const RunConfig& config) {
  const auto responses = eval_responses(data);
  return build_candidate_lists(responses, data.corpus, config.eval.list_size, config.eval.seed);
}

ExperimentResult run_experiment(const EasqConfig& model_config, const RunConfig& config,
                                const PreparedData& data) {
  EasqModel model(model_config);
  ExperimentResult r;
  r.log = train_online(data.split.train, model, config.train);
  const auto instances = eval_instances(data, config);
  r.report = evaluate(model, instances, data.durations);
  return r;
}

void cmd_gen_data(RunConfig config, const fs::path& out_dir, bool force) {
  config.validate();
  require_empty_or_force(out_dir, force);
  const World world = init_world(config.sim, config.sim.seed);
  const SimLog log = simulate_log(world);
  write_log(out_dir, log, world, config.sim.debug);
  write_config_echo(out_dir, config);
}

void cmd_train(RunConfig config, const fs::path& data_dir, const fs::path& out_dir,
               const TrainOptions& options) {
  config.validate();
  const SimLog log = read_log(data_dir);
  const PreparedData data = prepare_data(log, config);
  fs::create_directories(out_dir);
  write_config_echo(out_dir, config);

  const EasqConfig mc = ablation_variant(config.model, config.train.ablation);
  EasqModel model(mc);
  Trainer trainer(model, config.train);
  const ojson echo = to_json(config);

  const fs::path log_path = out_dir / "train_log.csv";
  std::vector<std::string> kept;
  if (options.resume) {
    const auto loaded = load_checkpoint_into(*options.resume, model, &trainer.optimizer(),
                                             &trainer.state());
    if (!loaded.optimizer || !loaded.trainer) {
      throw CheckpointError(Status::checkpoint_shape,
                            options.resume->string() + " carries no optimizer or trainer state");
    }
    // Rows past the resumed step belong to the abandoned tail of the old run.
    std::ifstream in(log_path);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (std::stoull(line.substr(0, line.find(','))) <= trainer.state().step) kept.push_back(line);
    }
  }
  {
    auto out = open_out(log_path);
    out << kTrainLogHeader << '\n';
    for (const auto& l : kept) out << l << '\n';
  }
  auto log_out = open_out(log_path, true);

  std::optional<std::ofstream> eval_out;
  std::vector<EvalInstance> instances;
  if (config.train.eval_every > 0) {
    instances = eval_instances(data, config);
    eval_out.emplace(open_out(out_dir / "eval_log.csv", options.resume.has_value()));
    if (!options.resume) *eval_out << "step," << eval_csv_header() << '\n';
  }

  const fs::path ckpt_dir = out_dir / "checkpoints";
  trainer.run(data.split.train, [&](const LogRow& row, const Trainer& t) {
    log_out << format_log_row(row) << '\n';
    if (config.train.checkpoint_every > 0 && row.step % config.train.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "step_%08llu.ckpt", static_cast<unsigned long long>(row.step));
      log_out.flush();
      save_checkpoint(ckpt_dir / name, t.model(), &t.optimizer(), &t.state(), echo);
    }
    if (eval_out && row.step % config.train.eval_every == 0) {
      *eval_out << row.step << ',' << eval_csv_row(evaluate(t.model(), instances, data.durations))
                << '\n';
    }
  });
  save_checkpoint(out_dir / "model.ckpt", model, &trainer.optimizer(), &trainer.state(), echo);
}

EvalReport cmd_eval(RunConfig config, const fs::path& checkpoint, const fs::path& data_dir,
                    const fs::path& out_dir) {
  config.validate();
  auto loaded = load_checkpoint(checkpoint);
  // Feature bucketing must follow the model the checkpoint was trained with.
  config.model.duration_buckets = loaded.model.config().duration_buckets;
  const SimLog log = read_log(data_dir);
  const PreparedData data = prepare_data(log, config);
  fs::create_directories(out_dir);
  write_config_echo(out_dir, config);
  const auto instances = eval_instances(data, config);
  const EvalReport report = evaluate(loaded.model, instances, data.durations);
  write_report(out_dir, report);
  if (!report.sufficient) {
    throw InsufficientData("no Satisfied answers in the held-out window");
  }
  return report;
}

void cmd_ablate(RunConfig config, const std::optional<fs::path>& data_dir, const fs::path& out_dir,
                const std::vector<std::uint64_t>& seeds) {
  config.validate();
  if (seeds.size() < 3) throw ConfigError("ablate needs at least 3 seeds");
  fs::create_directories(out_dir);
  write_config_echo(out_dir, config);

  constexpr Ablation kVariants[] = {Ablation::full, Ablation::no_lora, Ablation::no_moe,
                                    Ablation::no_dpo};
  std::optional<SimLog> shared;
  if (data_dir) shared = read_log(*data_dir);

  // results[variant][seed]
  std::vector<std::vector<EvalReport>> results(std::size(kVariants));
  auto runs = open_out(out_dir / "runs.csv");
  runs << "variant,seed," << eval_csv_header() << '\n';
  for (auto seed : seeds) {
    RunConfig rc = config;
    rc.model.seed = seed;
    rc.train.seed = seed;
    rc.eval.seed = seed;
    const SimLog log = shared ? *shared : simulate(config, seed);
    const PreparedData data = prepare_data(log, rc);
    for (std::size_t v = 0; v < std::size(kVariants); ++v) {
      const auto res = run_experiment(ablation_variant(rc.model, kVariants[v]), rc, data);
      runs << to_string(kVariants[v]) << ',' << seed << ',' << eval_csv_row(res.report) << '\n';
      runs.flush();
      results[v].push_back(res.report);
    }
  }

  auto summary = open_out(out_dir / "summary.csv");
  summary << "variant,n_seeds";
  for (const char* k : kMetricKeys) summary << ',' << k << "_mean," << k << "_stderr";
  summary << ",ndcg5_full_wins,ndcg5_full_losses,ndcg5_sign_p\n";
  for (std::size_t v = 0; v < std::size(kVariants); ++v) {
    summary << to_string(kVariants[v]) << ',' << seeds.size();
    for (std::size_t m = 0; m < std::size(kMetricKeys); ++m) {
      std::vector<double> xs;
      for (const auto& r : results[v]) xs.push_back(metric(r, m).mean);
      double mean = 0.0, ss = 0.0;
      for (double x : xs) mean += x;
      mean /= double(xs.size());
      for (double x : xs) ss += (x - mean) * (x - mean);
      const double se = std::sqrt(ss / double(xs.size() - 1) / double(xs.size()));
      summary << ',' << num(mean) << ',' << num(se);
    }
    if (v == 0) {
      summary << ",,,\n";
      continue;
    }
    std::size_t wins = 0, losses = 0;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const double full = results[0][s].ndcg5.mean, other = results[v][s].ndcg5.mean;
      wins += full > other;
      losses += full < other;
    }
    summary << ',' << wins << ',' << losses << ',' << num(sign_test_p(wins, losses)) << '\n';
  }
}

void cmd_sweep(RunConfig config, const std::optional<fs::path>& data_dir, const fs::path& out_dir,
               const std::vector<double>& lambda1_grid, const std::vector<double>& lambda2_grid,
               const std::vector<std::uint64_t>& seeds) {
  config.validate();
  if (lambda1_grid.empty() || lambda2_grid.empty() || seeds.empty()) {
    throw ConfigError("sweep needs non-empty lambda1, lambda2 and seed lists");
  }
  fs::create_directories(out_dir);
  write_config_echo(out_dir, config);
  std::optional<SimLog> shared;
  if (data_dir) shared = read_log(*data_dir);

  auto out = open_out(out_dir / "sweep.csv");
  out << "lambda1,lambda2,seed," << eval_csv_header() << '\n';
  for (auto seed : seeds) {
    RunConfig rc = config;
    rc.model.seed = seed;
    rc.train.seed = seed;
    rc.eval.seed = seed;
    const SimLog log = shared ? *shared : simulate(config, seed);
    const PreparedData data = prepare_data(log, rc);
    for (double l1 : lambda1_grid) {
      for (double l2 : lambda2_grid) {
        EasqConfig mc = ablation_variant(rc.model, rc.train.ablation);
        mc.lambda1 = l1;
        mc.lambda2 = l2;
        const auto res = run_experiment(mc, rc, data);
        out << num(l1) << ',' << num(l2) << ',' << seed << ',' << eval_csv_row(res.report) << '\n';
        out.flush();
      }
    }
  }
}

ValidityReport cmd_validate_sim(const fs::path& data_dir, const fs::path& out_dir) {
  const SimLog log = read_log(data_dir);
  const ValidityReport rep = convergent_validity(log.events, log.responses);
  fs::create_directories(out_dir);

  ojson j;
  j["status"] = rep.status;
  j["n_satisfied"] = rep.n_satisfied;
  j["n_dissatisfied"] = rep.n_dissatisfied;
  j["n_responding_users"] = rep.n_responding_users;
  ojson sig = ojson::array();
  auto csv = open_out(out_dir / "validity.csv");
  csv << "signal,mean_dissatisfied,mean_user_average,mean_satisfied,gap_low,gap_high,p_low,p_high,"
         "users_low,users_high\n";
  for (const auto& s : rep.signals) {
    ojson e;
    e["signal"] = s.signal;
    e["mean_dissatisfied"] = s.mean_dissatisfied;
    e["mean_user_average"] = s.mean_user_average;
    e["mean_satisfied"] = s.mean_satisfied;
    e["gap_low"] = s.gap_low;
    e["gap_high"] = s.gap_high;
    e["p_low"] = s.p_low;
    e["p_high"] = s.p_high;
    e["users_low"] = s.users_low;
    e["users_high"] = s.users_high;
    sig.push_back(std::move(e));
    csv << s.signal << ',' << num(s.mean_dissatisfied) << ',' << num(s.mean_user_average) << ','
        << num(s.mean_satisfied) << ',' << num(s.gap_low) << ',' << num(s.gap_high) << ','
        << num(s.p_low) << ',' << num(s.p_high) << ',' << s.users_low << ',' << s.users_high << '\n';
  }
  j["signals"] = std::move(sig);
  auto out = open_out(out_dir / "validity_report.json");
  out << j.dump(2) << '\n';
  if (!rep.sufficient) {
    throw InsufficientData("need at least one Satisfied and one Dissatisfied answer");
  }
  return rep;
}

}  // namespace easq

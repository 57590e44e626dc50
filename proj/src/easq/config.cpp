// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

#include "easq/config.hpp"

#include <algorithm>
#include <fstream>

#include "easq/error.hpp"

namespace easq {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

namespace {

// One visitor per section keeps the field list in a single place.
template <typename F>
void fields(EasqConfig& c, F&& f) {
  f("emb_id_dim", c.emb_id_dim);
  f("emb_cat_dim", c.emb_cat_dim);
  f("emb_dense_dim", c.emb_dense_dim);
  f("user_vocab", c.user_vocab);
  f("item_vocab", c.item_vocab);
  f("hour_vocab", c.hour_vocab);
  f("duration_buckets", c.duration_buckets);
  f("backbone", c.backbone);
  f("backbone_hidden", c.backbone_hidden);
  f("d_h", c.d_h);
  f("attention_dim", c.attention_dim);
  f("attention_heads", c.attention_heads);
  f("use_lora", c.use_lora);
  f("lora_rank", c.lora_rank);
  f("k1", c.k1);
  f("k2", c.k2);
  f("expert_hidden", c.expert_hidden);
  f("router", c.router);
  f("topk", c.topk);
  f("single_expert", c.single_expert);
  f("lambda1", c.lambda1);
  f("lambda2", c.lambda2);
  f("beta", c.beta);
  f("seed", c.seed);
}

template <typename F>
void fields(TrainConfig& c, F&& f) {
  f("batch_size", c.batch_size);
  f("max_steps", c.max_steps);
  f("lr", c.lr);
  f("ablation", c.ablation);
  f("eval_every", c.eval_every);
  f("seed", c.seed);
  f("replay_buffer_size", c.replay_buffer_size);
  f("replay_per_batch", c.replay_per_batch);
  f("max_behavior_pairs", c.max_behavior_pairs);
  f("dpo_include_uncertain", c.dpo_include_uncertain);
  f("behavior_weight_like", c.behavior_weights.like);
  f("behavior_weight_follow", c.behavior_weights.follow);
  f("behavior_weight_comment_or_forward", c.behavior_weights.comment_or_forward);
  f("checkpoint_every", c.checkpoint_every);
}

template <typename F>
void fields(SimConfig& c, F&& f) {
  f("n_users", c.n_users);
  f("n_items", c.n_items);
  f("d_latent", c.d_latent);
  f("rho_hook", c.rho_hook);
  f("hook_min", c.hook_min);
  f("hook_max", c.hook_max);
  f("quality_std", c.quality_std);
  f("noise_std", c.noise_std);
  f("watch_noise", c.watch_noise);
  f("duration_min", c.duration_min);
  f("duration_max", c.duration_max);
  f("n_sessions", c.n_sessions);
  f("views_per_session", c.views_per_session);
  f("mean_session_gap_s", c.mean_session_gap_s);
  f("preset", c.preset);
  f("exposure_rate", c.exposure_rate);
  f("response_rate", c.response_rate);
  f("tau_hi", c.tau_hi);
  f("tau_lo", c.tau_lo);
  f("extremity_bias", c.extremity_bias);
  f("debug", c.debug);
  f("seed", c.seed);
}

template <typename F>
void fields(EvalConfig& c, F&& f) {
  f("list_size", c.list_size);
  f("seed", c.seed);
  f("holdout_fraction", c.holdout_fraction);
}

ojson encode(BackboneKind v) { return to_string(v); }
ojson encode(RouterKind v) { return to_string(v); }
ojson encode(Ablation v) { return to_string(v); }
template <typename T>
ojson encode(const T& v) {
  return v;
}

std::string type_name(const json& v) { return v.type_name(); }

void decode(const json& v, const std::string& key, BackboneKind& out) {
  if (!v.is_string()) throw ConfigError(key + ": expected a string, got " + type_name(v));
  out = parse_backbone_kind(v.get<std::string>());
}
void decode(const json& v, const std::string& key, RouterKind& out) {
  if (!v.is_string()) throw ConfigError(key + ": expected a string, got " + type_name(v));
  out = parse_router_kind(v.get<std::string>());
}
void decode(const json& v, const std::string& key, Ablation& out) {
  if (!v.is_string()) throw ConfigError(key + ": expected a string, got " + type_name(v));
  out = parse_ablation(v.get<std::string>());
}
void decode(const json& v, const std::string& key, std::string& out) {
  if (!v.is_string()) throw ConfigError(key + ": expected a string, got " + type_name(v));
  out = v.get<std::string>();
}
void decode(const json& v, const std::string& key, bool& out) {
  if (!v.is_boolean()) throw ConfigError(key + ": expected a boolean, got " + type_name(v));
  out = v.get<bool>();
}
void decode(const json& v, const std::string& key, double& out) {
  if (!v.is_number()) throw ConfigError(key + ": expected a number, got " + type_name(v));
  out = v.get<double>();
}
template <typename T>
  requires std::is_unsigned_v<T>
void decode(const json& v, const std::string& key, T& out) {
  if (v.is_number_unsigned()) {
    out = v.get<T>();
  } else if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    out = static_cast<T>(v.get<std::int64_t>());
  } else {
    throw ConfigError(key + ": expected a non-negative integer, got " + v.dump());
  }
}

template <typename C>
ojson section_to_json(const C& c) {
  ojson j = ojson::object();
  C copy = c;
  fields(copy, [&](const char* name, auto& v) { j[name] = encode(v); });
  return j;
}

template <typename C>
void section_from_json(const json& j, const std::string& section, C& c) {
  if (!j.is_object()) throw ConfigError(section + ": expected an object");
  std::vector<std::string> known;
  fields(c, [&](const char* name, auto& v) {
    known.emplace_back(name);
    auto it = j.find(name);
    if (it != j.end()) decode(*it, section + "." + name, v);
  });
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw ConfigError("unknown config key '" + section + "." + it.key() + "'");
    }
  }
}

}  // namespace

void RunConfig::validate() {
  model.validate();
  train.validate();
  sim.resolve();
  if (eval.list_size < 2) throw ConfigError("eval.list_size must be >= 2");
  if (!(eval.holdout_fraction > 0.0 && eval.holdout_fraction < 1.0)) {
    throw ConfigError("eval.holdout_fraction must lie in (0, 1)");
  }
}

ojson to_json(const EasqConfig& c) { return section_to_json(c); }
ojson to_json(const TrainConfig& c) { return section_to_json(c); }
ojson to_json(const SimConfig& c) { return section_to_json(c); }
ojson to_json(const EvalConfig& c) { return section_to_json(c); }

ojson to_json(const RunConfig& c) {
  ojson j;
  j["model"] = to_json(c.model);
  j["train"] = to_json(c.train);
  j["sim"] = to_json(c.sim);
  j["eval"] = to_json(c.eval);
  return j;
}

EasqConfig model_config_from_json(const json& j) {
  EasqConfig c;
  section_from_json(j, "model", c);
  return c;
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object at the top level");
  RunConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    if (k == "model") {
      section_from_json(*it, k, c.model);
    } else if (k == "train") {
      section_from_json(*it, k, c.train);
    } else if (k == "sim") {
      section_from_json(*it, k, c.sim);
    } else if (k == "eval") {
      section_from_json(*it, k, c.eval);
    } else {
      throw ConfigError("unknown config section '" + k + "'");
    }
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  const auto dot = key.find('.');
  if (dot == std::string::npos || key.find('.', dot + 1) != std::string::npos) {
    throw ConfigError("override key '" + key + "' must be section.key");
  }
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json patch;
  patch[key.substr(0, dot)][key.substr(dot + 1)] = value;

  json merged = json::parse(to_json(config).dump());
  merged.merge_patch(patch);
  config = run_config_from_json(merged);
}

void write_config_echo(const std::filesystem::path& dir, const RunConfig& config) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / kConfigEchoFile, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / kConfigEchoFile).string());
  out << to_json(config).dump(2) << '\n';
}

}  // namespace easq

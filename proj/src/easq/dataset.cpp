// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

#include "easq/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <tuple>

#include <json.hpp>

#include "easq/error.hpp"

namespace easq {

using ojson = nlohmann::ordered_json;

std::int64_t hour_of_day(double ts) {
  const double hours = std::floor(ts / 3600.0);
  auto h = static_cast<std::int64_t>(std::fmod(hours, 24.0));
  return h < 0 ? h + 24 : h;
}

std::int64_t duration_bucket(double duration_s, std::size_t buckets) {
  if (buckets <= 1) return 0;
  const double lo = 5.0, hi = 120.0;
  const double d = std::clamp(duration_s, lo, hi);
  const double t = std::log(d / lo) / std::log(hi / lo);
  auto b = static_cast<std::int64_t>(std::floor(t * double(buckets)));
  return std::clamp<std::int64_t>(b, 0, std::int64_t(buckets) - 1);
}

Features features_for(std::int64_t user, std::int64_t item, double ts, double duration_s,
                      std::size_t buckets) {
  return {user, item, hour_of_day(ts), duration_bucket(duration_s, buckets)};
}

std::vector<Example> make_examples(const SimLog& log, std::size_t duration_buckets) {
  if (log.responses.size() != log.events.size()) {
    throw ContractError("make_examples: responses are not aligned with events");
  }
  std::vector<Example> out;
  out.reserve(log.events.size());
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    const auto& e = log.events[i];
    out.push_back({e, log.responses[i],
                   features_for(e.user_id, e.item_id, e.ts, e.duration_s, duration_buckets)});
  }
  return out;
}

Split chronological_split(std::vector<Example> examples, double holdout_fraction) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw ConfigError("eval.holdout_fraction must lie in (0, 1)");
  }
  std::stable_sort(examples.begin(), examples.end(), [](const Example& a, const Example& b) {
    return std::tie(a.event.ts, a.event.user_id, a.event.item_id) <
           std::tie(b.event.ts, b.event.user_id, b.event.item_id);
  });
  Split s;
  if (examples.empty()) return s;
  const auto cut_index = static_cast<std::size_t>(
      std::floor((1.0 - holdout_fraction) * double(examples.size())));
  s.cutoff_ts = examples[std::min(cut_index, examples.size() - 1)].event.ts;
  for (auto& ex : examples) {
    (ex.event.ts < s.cutoff_ts ? s.train : s.eval).push_back(std::move(ex));
  }
  return s;
}

std::map<std::int64_t, double> item_catalog(const std::vector<Example>& examples) {
  std::map<std::int64_t, double> catalog;
  for (const auto& ex : examples) catalog.emplace(ex.event.item_id, ex.event.duration_s);
  return catalog;
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

}  // namespace

void write_log(const std::filesystem::path& dir, const SimLog& log, const World& world, bool debug) {
  std::filesystem::create_directories(dir);
  auto inter = open_out(dir / "interactions.jsonl");
  auto quest = open_out(dir / "questionnaire.jsonl");
  std::size_t answered = 0, exposed = 0;
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    const auto& e = log.events[i];
    ojson row;
    row["ts"] = e.ts;
    row["user_id"] = e.user_id;
    row["item_id"] = e.item_id;
    row["watch_time_s"] = e.watch_time_s;
    row["duration_s"] = e.duration_s;
    row["progress"] = e.progress;
    row["like"] = e.like;
    row["follow"] = e.follow;
    row["comment"] = e.comment;
    row["forward"] = e.forward;
    if (debug && e.s_true) row["s_true"] = *e.s_true;
    inter << row.dump() << '\n';

    const auto& r = log.responses[i];
    if (!r.exposed) continue;
    ++exposed;
    if (r.answer != Answer::none) ++answered;
    ojson q;
    q["ts"] = r.ts;
    q["user_id"] = r.user_id;
    q["item_id"] = r.item_id;
    q["exposed"] = r.exposed;
    q["clicked"] = r.clicked;
    q["answer"] = to_string(r.answer);
    quest << q.dump() << '\n';
  }

  ojson meta;
  meta["seed"] = world.seed;
  meta["n_users"] = world.config.n_users;
  meta["n_items"] = world.config.n_items;
  meta["rho_hook"] = world.config.rho_hook;
  meta["n_hook_items"] = world.hook_count();
  meta["n_events"] = log.events.size();
  meta["n_exposed"] = exposed;
  meta["n_answered"] = answered;
  meta["preset"] = world.config.preset;
  auto m = open_out(dir / "world_meta.json");
  m << meta.dump(2) << '\n';
}

namespace {

template <typename T>
T field(const nlohmann::json& row, const char* name, const std::string& where) {
  auto it = row.find(name);
  if (it == row.end()) throw DataError(where + ": missing field '" + name + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DataError(where + ": field '" + name + "' has the wrong type");
  }
}

template <typename F>
void for_each_line(const std::filesystem::path& p, F&& f) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = p.filename().string() + ":" + std::to_string(lineno);
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!row.is_object()) throw DataError(where + ": expected a JSON object");
    f(row, where);
  }
}

}  // namespace

SimLog read_log(const std::filesystem::path& dir) {
  SimLog log;
  for_each_line(dir / "interactions.jsonl", [&](const nlohmann::json& row, const std::string& where) {
    InteractionEvent e;
    e.ts = field<double>(row, "ts", where);
    e.user_id = field<std::int64_t>(row, "user_id", where);
    e.item_id = field<std::int64_t>(row, "item_id", where);
    e.watch_time_s = field<double>(row, "watch_time_s", where);
    e.duration_s = field<double>(row, "duration_s", where);
    e.progress = field<double>(row, "progress", where);
    e.like = field<bool>(row, "like", where);
    e.follow = field<bool>(row, "follow", where);
    e.comment = field<bool>(row, "comment", where);
    e.forward = field<bool>(row, "forward", where);
    if (row.contains("s_true")) e.s_true = field<double>(row, "s_true", where);
    if (e.watch_time_s < 0.0 || !(e.duration_s > 0.0)) {
      throw DataError(where + ": watch_time_s must be >= 0 and duration_s > 0");
    }
    log.events.push_back(e);
  });

  using Key = std::tuple<double, std::int64_t, std::int64_t>;
  std::map<Key, QuestionnaireResponse> by_key;
  const auto qpath = dir / "questionnaire.jsonl";
  if (std::filesystem::exists(qpath)) {
    for_each_line(qpath, [&](const nlohmann::json& row, const std::string& where) {
      QuestionnaireResponse r;
      r.ts = field<double>(row, "ts", where);
      r.user_id = field<std::int64_t>(row, "user_id", where);
      r.item_id = field<std::int64_t>(row, "item_id", where);
      r.exposed = field<bool>(row, "exposed", where);
      r.clicked = field<bool>(row, "clicked", where);
      r.answer = parse_answer(field<std::string>(row, "answer", where));
      if ((r.answer != Answer::none) != (r.exposed && r.clicked)) {
        throw DataError(where + ": an answer requires exposed and clicked, and vice versa");
      }
      by_key[{r.ts, r.user_id, r.item_id}] = r;
    });
  }

  std::stable_sort(log.events.begin(), log.events.end(), [](const auto& a, const auto& b) {
    return std::tie(a.ts, a.user_id, a.item_id) < std::tie(b.ts, b.user_id, b.item_id);
  });
  log.responses.reserve(log.events.size());
  for (const auto& e : log.events) {
    auto it = by_key.find({e.ts, e.user_id, e.item_id});
    if (it != by_key.end()) {
      log.responses.push_back(it->second);
    } else {
      QuestionnaireResponse r;
      r.ts = e.ts;
      r.user_id = e.user_id;
      r.item_id = e.item_id;
      log.responses.push_back(r);
    }
  }
  return log;
}

}  // namespace easq

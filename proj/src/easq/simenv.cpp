// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

#include "easq/simenv.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

#include "easq/error.hpp"
#include "easq/tensor.hpp"

namespace easq {

const char* to_string(Answer a) {
  switch (a) {
    case Answer::satisfied:
      return "SATISFIED";
    case Answer::dissatisfied:
      return "DISSATISFIED";
    case Answer::uncertain:
      return "UNCERTAIN";
    case Answer::none:
      return "NONE";
  }
  return "NONE";
}

Answer parse_answer(const std::string& s) {
  if (s == "SATISFIED") return Answer::satisfied;
  if (s == "DISSATISFIED") return Answer::dissatisfied;
  if (s == "UNCERTAIN") return Answer::uncertain;
  if (s == "NONE") return Answer::none;
  throw DataError("unknown questionnaire answer '" + s + "'");
}

double satisfaction_label(Answer a) {
  switch (a) {
    case Answer::satisfied:
      return 1.0;
    case Answer::uncertain:
      return 0.5;
    case Answer::dissatisfied:
      return 0.0;
    case Answer::none:
      break;
  }
  throw ContractError("no satisfaction label for an unanswered questionnaire");
}

void QuestionnaireRates::validate() const {
  if (!(exposure >= 0.0 && exposure <= 1.0) || !(response >= 0.0 && response <= 1.0)) {
    throw ConfigError("questionnaire rates must lie in [0, 1]");
  }
}

void SimConfig::resolve() {
  QuestionnaireRates base;
  if (preset == "dense") {
    base = QuestionnaireRates::dense();
  } else if (preset == "production") {
    base = QuestionnaireRates::production();
  } else {
    throw ConfigError("unknown sim.preset '" + preset + "' (expected dense or production)");
  }
  if (exposure_rate < 0.0) exposure_rate = base.exposure;
  if (response_rate < 0.0) response_rate = base.response;
  rates().validate();
  if (n_users < 1 || n_items < 1 || d_latent < 1) throw ConfigError("sim counts must be >= 1");
  if (!(rho_hook >= 0.0 && rho_hook <= 1.0)) throw ConfigError("sim.rho_hook must lie in [0, 1]");
  if (!(hook_min >= 0.0 && hook_max >= hook_min)) throw ConfigError("sim hook range is invalid");
  if (!(duration_min > 0.0 && duration_max >= duration_min)) {
    throw ConfigError("sim duration range is invalid");
  }
  if (!(tau_lo < tau_hi)) throw ConfigError("sim.tau_lo must be below sim.tau_hi");
  if (views_per_session < 1) throw ConfigError("sim.views_per_session must be >= 1");
}

QuestionnaireRates SimConfig::rates() const { return {exposure_rate, response_rate}; }

std::size_t World::hook_count() const {
  return static_cast<std::size_t>(
      std::count_if(hook_bias.begin(), hook_bias.end(), [](double b) { return b > 0.0; }));
}

World init_world(const SimConfig& config, std::uint64_t seed) {
  SimConfig c = config;
  c.resolve();
  World w;
  w.config = c;
  w.seed = seed;
  // Latent entries have variance 1/sqrt(d), which gives p.q unit variance.
  const double latent_std = std::pow(double(c.d_latent), -0.25);
  Rng rng(mix_seed(seed, 0x5157));
  std::normal_distribution<double> latent(0.0, latent_std);
  w.user_latent.assign(c.n_users, std::vector<double>(c.d_latent));
  for (auto& p : w.user_latent)
    for (auto& v : p) v = latent(rng);
  w.item_latent.assign(c.n_items, std::vector<double>(c.d_latent));
  for (auto& q : w.item_latent)
    for (auto& v : q) v = latent(rng);

  std::normal_distribution<double> quality(0.0, c.quality_std);
  std::uniform_real_distribution<double> duration(c.duration_min, c.duration_max);
  std::bernoulli_distribution is_hook(c.rho_hook);
  std::uniform_real_distribution<double> hook(c.hook_min, c.hook_max);
  w.quality.resize(c.n_items);
  w.duration_s.resize(c.n_items);
  w.hook_bias.assign(c.n_items, 0.0);
  for (std::size_t i = 0; i < c.n_items; ++i) {
    w.quality[i] = quality(rng);
    w.duration_s[i] = duration(rng);
    if (is_hook(rng)) w.hook_bias[i] = std::max(hook(rng), 1e-9);
  }
  return w;
}

double true_satisfaction(const World& world, std::int64_t user, std::int64_t item) {
  const auto& c = world.config;
  if (user < 0 || static_cast<std::size_t>(user) >= c.n_users || item < 0 ||
      static_cast<std::size_t>(item) >= c.n_items) {
    throw ContractError("true_satisfaction: id out of range");
  }
  const auto& p = world.user_latent[user];
  const auto& q = world.item_latent[item];
  double affinity = std::inner_product(p.begin(), p.end(), q.begin(), 0.0);
  const double noise =
      c.noise_std * hash_gaussian(mix_seed(world.seed, static_cast<std::uint64_t>(user),
                                           static_cast<std::uint64_t>(item)));
  return sigmoid_value(affinity + world.quality[item] + noise);
}

std::vector<InteractionEvent> simulate_session(const World& world, std::int64_t user,
                                               std::span<const std::int64_t> ranked_items,
                                               std::size_t n_views, double start_ts, Rng& rng) {
  if (ranked_items.empty()) throw ContractError("simulate_session: no items to rank");
  const auto& c = world.config;
  std::normal_distribution<double> watch_noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<InteractionEvent> events;
  events.reserve(n_views);
  double ts = start_ts;
  for (std::size_t v = 0; v < n_views; ++v) {
    const std::int64_t item = ranked_items[v % ranked_items.size()];
    const double s = true_satisfaction(world, user, item);
    const double fraction =
        std::clamp(s + world.hook_bias[item] + c.watch_noise * watch_noise(rng), 0.0, 1.2);
    InteractionEvent e;
    e.ts = ts;
    e.user_id = user;
    e.item_id = item;
    e.duration_s = world.duration_s[item];
    e.watch_time_s = fraction * e.duration_s;
    e.progress = e.watch_time_s / e.duration_s;
    // Explicit actions depend on satisfaction only, never on the hook.
    e.like = unit(rng) < 0.15 * s * s;
    e.follow = unit(rng) < 0.03 * s * s;
    e.comment = unit(rng) < 0.02 * s;
    e.forward = unit(rng) < 0.01 * s;
    if (c.debug) e.s_true = s;
    events.push_back(e);
    ts += e.watch_time_s + 1.0;
  }
  return events;
}

bool questionnaire_trigger(double watch_time_s, double progress) {
  return watch_time_s >= kTriggerMinWatchSeconds || progress >= kTriggerMinProgress;
}

bool questionnaire_trigger(const InteractionEvent& event) {
  return questionnaire_trigger(event.watch_time_s, event.progress);
}

QuestionnaireResponse questionnaire_respond(const World& world, const InteractionEvent& event,
                                            const QuestionnaireRates& rates, Rng& rng) {
  rates.validate();
  QuestionnaireResponse r;
  r.ts = event.ts;
  r.user_id = event.user_id;
  r.item_id = event.item_id;
  if (!questionnaire_trigger(event)) return r;

  const auto& c = world.config;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double s = true_satisfaction(world, event.user_id, event.item_id);
  r.exposed = unit(rng) < rates.exposure;
  if (!r.exposed) return r;
  double p_click = rates.response;
  if (c.extremity_bias) p_click = std::clamp(rates.response * (0.25 + 1.5 * std::abs(2.0 * s - 1.0)), 0.0, 1.0);
  r.clicked = unit(rng) < p_click;
  if (!r.clicked) return r;
  if (s >= c.tau_hi) {
    r.answer = Answer::satisfied;
  } else if (s <= c.tau_lo) {
    r.answer = Answer::dissatisfied;
  } else {
    r.answer = Answer::uncertain;
  }
  return r;
}

SimLog simulate_log(const World& world) {
  const auto& c = world.config;
  const auto rates = c.rates();
  SimLog log;
  log.events.reserve(c.n_sessions * c.views_per_session);
  log.responses.reserve(c.n_sessions * c.views_per_session);

  std::vector<std::int64_t> catalog(c.n_items);
  std::iota(catalog.begin(), catalog.end(), 0);
  double clock = 0.0;
  Rng clock_rng(mix_seed(world.seed, 0xc10c));
  std::exponential_distribution<double> gap(1.0 / c.mean_session_gap_s);
  for (std::size_t s = 0; s < c.n_sessions; ++s) {
    Rng rng(mix_seed(world.seed, 0x5e55, s));
    std::uniform_int_distribution<std::int64_t> pick_user(0, std::int64_t(c.n_users) - 1);
    const std::int64_t user = pick_user(rng);
    // Uniform logging policy: a random slate of the catalog.
    const std::size_t slate = std::min(c.views_per_session, c.n_items);
    std::vector<std::int64_t> ranked = catalog;
    for (std::size_t k = 0; k < slate; ++k) {
      std::uniform_int_distribution<std::size_t> d(k, ranked.size() - 1);
      std::swap(ranked[k], ranked[d(rng)]);
    }
    ranked.resize(slate);
    clock += gap(clock_rng);
    auto events = simulate_session(world, user, ranked, c.views_per_session, clock, rng);
    for (const auto& e : events) {
      log.responses.push_back(questionnaire_respond(world, e, rates, rng));
      log.events.push_back(e);
    }
    clock = events.back().ts + events.back().watch_time_s;
  }

  std::vector<std::size_t> order(log.events.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = log.events[a];
    const auto& y = log.events[b];
    return std::tie(x.ts, x.user_id, x.item_id) < std::tie(y.ts, y.user_id, y.item_id);
  });
  SimLog sorted;
  sorted.events.reserve(order.size());
  sorted.responses.reserve(order.size());
  for (auto i : order) {
    sorted.events.push_back(log.events[i]);
    sorted.responses.push_back(log.responses[i]);
  }
  return sorted;
}

void shuffle_answers(std::span<QuestionnaireResponse> responses, std::uint64_t seed) {
  std::vector<std::size_t> answered;
  for (std::size_t i = 0; i < responses.size(); ++i) {
    if (responses[i].answer != Answer::none) answered.push_back(i);
  }
  std::vector<Answer> answers;
  for (auto i : answered) answers.push_back(responses[i].answer);
  Rng rng(seed);
  std::shuffle(answers.begin(), answers.end(), rng);
  for (std::size_t k = 0; k < answered.size(); ++k) responses[answered[k]].answer = answers[k];
}

double sign_test_p(std::size_t positives, std::size_t negatives) {
  const std::size_t n = positives + negatives;
  if (n == 0) return 1.0;
  const std::size_t k = std::min(positives, negatives);
  // P(X <= k) in log space, X ~ Bin(n, 1/2).
  const double log_half_n = -double(n) * std::log(2.0);
  double tail = 0.0;
  for (std::size_t i = 0; i <= k; ++i) {
    const double log_choose = std::lgamma(double(n) + 1) - std::lgamma(double(i) + 1) -
                              std::lgamma(double(n - i) + 1);
    tail += std::exp(log_choose + log_half_n);
  }
  return std::min(1.0, 2.0 * tail);
}

namespace {

using Key = std::tuple<double, std::int64_t, std::int64_t>;

SignalValidity signal_validity(const std::string& name, std::span<const InteractionEvent> events,
                               const std::map<Key, Answer>& answers, double (*signal)(const InteractionEvent&)) {
  struct UserStats {
    double sum = 0.0;
    std::size_t n = 0;
    double sat_sum = 0.0, dis_sum = 0.0;
    std::size_t sat_n = 0, dis_n = 0;
  };
  std::map<std::int64_t, UserStats> users;
  double sat_total = 0.0, dis_total = 0.0;
  std::size_t sat_count = 0, dis_count = 0;
  for (const auto& e : events) {
    auto& u = users[e.user_id];
    const double v = signal(e);
    u.sum += v;
    ++u.n;
    auto it = answers.find({e.ts, e.user_id, e.item_id});
    if (it == answers.end()) continue;
    if (it->second == Answer::satisfied) {
      u.sat_sum += v;
      ++u.sat_n;
      sat_total += v;
      ++sat_count;
    } else if (it->second == Answer::dissatisfied) {
      u.dis_sum += v;
      ++u.dis_n;
      dis_total += v;
      ++dis_count;
    }
  }

  SignalValidity s;
  s.signal = name;
  s.mean_satisfied = sat_count ? sat_total / double(sat_count) : 0.0;
  s.mean_dissatisfied = dis_count ? dis_total / double(dis_count) : 0.0;
  double avg_total = 0.0;
  std::size_t responding = 0;
  std::size_t low_pos = 0, low_neg = 0, high_pos = 0, high_neg = 0;
  for (const auto& [id, u] : users) {
    if (u.sat_n + u.dis_n == 0) continue;
    const double avg = u.sum / double(u.n);
    avg_total += avg;
    ++responding;
    if (u.dis_n) {
      const double d = avg - u.dis_sum / double(u.dis_n);
      if (d > 0) ++low_pos;
      if (d < 0) ++low_neg;
    }
    if (u.sat_n) {
      const double d = u.sat_sum / double(u.sat_n) - avg;
      if (d > 0) ++high_pos;
      if (d < 0) ++high_neg;
    }
  }
  s.mean_user_average = responding ? avg_total / double(responding) : 0.0;
  s.gap_low = s.mean_user_average - s.mean_dissatisfied;
  s.gap_high = s.mean_satisfied - s.mean_user_average;
  s.p_low = sign_test_p(low_pos, low_neg);
  s.p_high = sign_test_p(high_pos, high_neg);
  s.users_low = low_pos + low_neg;
  s.users_high = high_pos + high_neg;
  return s;
}

}  // namespace

ValidityReport convergent_validity(std::span<const InteractionEvent> events,
                                   std::span<const QuestionnaireResponse> responses) {
  ValidityReport report;
  std::map<Key, Answer> answers;
  std::map<std::int64_t, bool> responding;
  for (const auto& r : responses) {
    if (r.answer == Answer::satisfied) ++report.n_satisfied;
    if (r.answer == Answer::dissatisfied) ++report.n_dissatisfied;
    if (r.answer == Answer::satisfied || r.answer == Answer::dissatisfied) {
      answers[{r.ts, r.user_id, r.item_id}] = r.answer;
      responding[r.user_id] = true;
    }
  }
  report.n_responding_users = responding.size();
  if (report.n_satisfied == 0 || report.n_dissatisfied == 0) {
    report.sufficient = false;
    report.status = "insufficient data";
    return report;
  }
  report.sufficient = true;
  report.status = "ok";
  report.signals.push_back(signal_validity("watch_fraction", events, answers,
                                           [](const InteractionEvent& e) { return e.progress; }));
  report.signals.push_back(signal_validity("like", events, answers,
                                           [](const InteractionEvent& e) { return e.like ? 1.0 : 0.0; }));
  return report;
}

}  // namespace easq

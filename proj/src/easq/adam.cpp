// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

#include "easq/adam.hpp"

#include <algorithm>
#include <cmath>

#include "easq/error.hpp"

namespace easq {

AdamState AdamState::for_params(std::span<const Tensor> params, AdamConfig config) {
  if (!(config.lr > 0.0)) throw ConfigError("adam: lr must be positive");
  AdamState s;
  s.config = config;
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.size(), 0.0);
    s.second_moment.emplace_back(p.size(), 0.0);
    s.param_steps.push_back(0);
  }
  return s;
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (params.size() != state.first_moment.size()) {
    throw DimensionError("adam: " + std::to_string(params.size()) + " parameters but state for " +
                         std::to_string(state.first_moment.size()));
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (params[p].size() != state.first_moment[p].size()) {
      throw DimensionError("adam: moment buffer " + std::to_string(p) + " does not match " +
                           shape_string(params[p].shape()));
    }
    for (double g : params[p].grad()) {
      if (!std::isfinite(g)) {
        throw NumericError("adam: non-finite gradient in parameter " + std::to_string(p));
      }
    }
  }

  const auto& c = state.config;
  ++state.step_count;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto g = params[p].grad();
    if (std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; })) continue;
    const auto t = static_cast<double>(++state.param_steps[p]);
    const double correction1 = 1.0 - std::pow(c.beta1, t);
    const double correction2 = 1.0 - std::pow(c.beta2, t);
    auto& m = state.first_moment[p];
    auto& v = state.second_moment[p];
    auto w = params[p].mutable_values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

}  // namespace easq

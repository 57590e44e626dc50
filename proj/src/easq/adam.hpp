// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "easq/tensor.hpp"

namespace easq {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moment buffers are indexed like the parameter list handed to adam_step.
// A parameter whose gradient is identically zero in a step is skipped: its
// moments do not decay and its own step counter does not advance, so
// parameter groups that no loss reaches stay bitwise frozen.
struct AdamState {
  AdamConfig config;
  std::uint64_t step_count = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::vector<std::uint64_t> param_steps;

  static AdamState for_params(std::span<const Tensor> params, AdamConfig config = {});
};

// Bias-corrected Adam update in place. Throws NumericError before touching
// anything if a gradient is not finite.
void adam_step(std::span<Tensor> params, AdamState& state);

}  // namespace easq

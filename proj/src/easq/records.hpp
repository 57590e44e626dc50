// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

// Log records shared by the simulator, the file formats and the trainer.

#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace easq {

enum class Answer { none, dissatisfied, uncertain, satisfied };

const char* to_string(Answer a);  // SATISFIED, DISSATISFIED, UNCERTAIN, NONE
Answer parse_answer(const std::string& s);

// Satisfied -> 1.0, Uncertain -> 0.5, Dissatisfied -> 0.0.
double satisfaction_label(Answer a);

struct InteractionEvent {
  double ts = 0.0;
  std::int64_t user_id = 0;
  std::int64_t item_id = 0;
  double watch_time_s = 0.0;
  double duration_s = 1.0;
  double progress = 0.0;  // watch_time_s / duration_s, at most 1.2
  bool like = false;
  bool follow = false;
  bool comment = false;
  bool forward = false;
  // Hidden ground truth, only written in debug mode.
  std::optional<double> s_true;
};

struct QuestionnaireResponse {
  double ts = 0.0;
  std::int64_t user_id = 0;
  std::int64_t item_id = 0;
  bool exposed = false;
  bool clicked = false;
  Answer answer = Answer::none;
};

}  // namespace easq

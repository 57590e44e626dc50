// Copyright 2026 The EASQ Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace easq {

// Status values shared with the C API and the CLI exit codes.
enum class Status : int {
  ok = 0,
  internal = 1,
  config = 2,
  data = 3,
  insufficient_data = 4,
  numeric = 5,
  io = 6,
  checkpoint_version = 7,
  checkpoint_truncated = 8,
  checkpoint_shape = 9,
  invalid_argument = 10,
};

class Error : public std::runtime_error {
 public:
  Error(Status status, const std::string& what)
      : std::runtime_error(what), status_(status) {}
  Status status() const noexcept { return status_; }

 private:
  Status status_;
};

// Tensor shape disagreement. Contract failures inside the math core.
struct DimensionError : Error {
  explicit DimensionError(const std::string& what)
      : Error(Status::invalid_argument, what) {}
};

struct ContractError : Error {
  explicit ContractError(const std::string& what)
      : Error(Status::invalid_argument, what) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(Status::numeric, what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(Status::config, what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(Status::data, what) {}
};

struct InsufficientData : Error {
  explicit InsufficientData(const std::string& what)
      : Error(Status::insufficient_data, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(Status::io, what) {}
};

struct CheckpointError : Error {
  CheckpointError(Status status, const std::string& what) : Error(status, what) {}
};

}  // namespace easq

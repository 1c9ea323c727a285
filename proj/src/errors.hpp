// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace seqembed {

// Error taxonomy shared by all modules. The C API and the CLI map the
// code to a status / exit code; the message is what reaches the user.
class Error : public std::runtime_error {
public:
  enum class Code {
    invalid_input,
    invalid_state,
    numerical_failure,
    ingestion,
    training_failure,
    io,
  };

  Error(Code code, std::string msg) : std::runtime_error(std::move(msg)), code_(code) {}
  Code code() const noexcept { return code_; }

private:
  Code code_;
};

struct InvalidInput : Error {
  explicit InvalidInput(std::string msg) : Error(Code::invalid_input, std::move(msg)) {}
};

struct InvalidState : Error {
  explicit InvalidState(std::string msg) : Error(Code::invalid_state, std::move(msg)) {}
};

struct NumericalFailure : Error {
  explicit NumericalFailure(std::string msg, std::int64_t iterations = 0)
      : Error(Code::numerical_failure, std::move(msg)), iterations(iterations) {}
  std::int64_t iterations;
};

struct IngestionError : Error {
  IngestionError(std::string msg, std::string file, std::int64_t line)
      : Error(Code::ingestion, std::move(msg)), file(std::move(file)), line(line) {}
  std::string file;
  std::int64_t line;
};

struct TrainingFailure : Error {
  TrainingFailure(std::string msg, std::int64_t last_good_iteration)
      : Error(Code::training_failure, std::move(msg)),
        last_good_iteration(last_good_iteration) {}
  std::int64_t last_good_iteration;
};

struct IoError : Error {
  explicit IoError(std::string msg) : Error(Code::io, std::move(msg)) {}
};

}  // namespace seqembed

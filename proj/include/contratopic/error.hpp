#pragma once

#include <stdexcept>
#include <string>

namespace contratopic {

/// Process exit codes used by the command line tool.
enum class ExitCode : int {
  ok = 0,
  failure = 1,
  usage = 2,
  artifact_mismatch = 3,
  numerical = 4,
};

/// Base of every error raised by the library. Carries the exit code the CLI
/// should report when the error escapes a command.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ExitCode code = ExitCode::usage)
      : std::runtime_error(what), code_(code) {}

  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Invalid input data, configuration or arguments.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(what, ExitCode::usage) {}
};

/// Two artifacts that should agree (vocabulary, config, corpus) do not.
class ArtifactMismatch : public Error {
 public:
  explicit ArtifactMismatch(const std::string& what)
      : Error(what, ExitCode::artifact_mismatch) {}
};

/// Non-finite values or other numerical breakdowns.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(what, ExitCode::numerical) {}
};

/// Tensor shape disagreement inside the differentiable engine.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(what, ExitCode::failure) {}
};

}  // namespace contratopic

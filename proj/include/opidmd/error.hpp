#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace opidmd {

enum class ErrorCode {
  SeriesTooShort,
  ShapeMismatch,
  SplitOutOfRange,
  IoError,
  ParseError,
  CflViolated,
  StabilityViolated,
  InvalidConfig,
  NotSquare,
  SvdFailure,
  StepUnderflow,
  Diverged,
  IllConditioned,
  RankDeficient,
  Singular,
  EigFailure,
  DegenerateTruth,
};

std::string_view to_string(ErrorCode code);

// Every failure in the library is reported through this type. ParseError
// additionally carries the 1-based line number of the offending input line.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Error(ErrorCode code, const std::string& what, std::size_t line)
      : std::runtime_error(std::string(to_string(code)) + " (line " + std::to_string(line) +
                           "): " + what),
        code_(code),
        line_(line) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

  // True for failures that come from the numerics rather than from the inputs.
  bool is_numerical() const noexcept;

 private:
  ErrorCode code_;
  std::optional<std::size_t> line_;
};

}  // namespace opidmd

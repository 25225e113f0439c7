#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pointvox {

enum class ErrorCode {
  InvalidArgument,
  EmptyGrid,
  InvalidCount,
  OutOfBounds,
  NoNeighbors,
  ShapeMismatch,
  EmptyBatch,
  PlacementFailure,
  Io,
  Config,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library is an Error carrying a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pointvox

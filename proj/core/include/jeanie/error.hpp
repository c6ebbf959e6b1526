#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace jeanie {

enum class ErrorKind {
  Argument,
  Config,
  Layout,
  Geometry,
  Shape,
  SequenceTooShort,
  Encoder,
  Ambiguity,
  OracleScope,
  Normalization,
  Numeric,
  Training,
  Parse,
  Io,
  CheckpointMismatch,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` distinguishes the failure
/// class so callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace jeanie

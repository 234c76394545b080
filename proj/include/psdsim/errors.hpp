#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace psdsim {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Chain notation violated D S (I S)* D. Position is 1-based.
struct GrammarError : Error {
  GrammarError(std::size_t position_, const std::string& what_)
      : Error("grammar error at position " + std::to_string(position_) + ": " + what_),
        position(position_) {}
  std::size_t position;
};

// Scenario file is not syntactically readable (malformed JSON, bad quantity).
struct ParseError : Error {
  using Error::Error;
};

// Scenario file parsed but violates the schema or topology invariants.
struct ValidationError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct CapabilityMismatch : Error {
  using Error::Error;
};

struct NotACycle : Error {
  using Error::Error;
};

struct UnknownVariable : Error {
  using Error::Error;
};

struct BoundsViolation : Error {
  using Error::Error;
};

struct InsufficientHeralds : Error {
  using Error::Error;
};

struct BufferOccupied : Error {
  using Error::Error;
};

struct BufferEmpty : Error {
  using Error::Error;
};

}  // namespace psdsim

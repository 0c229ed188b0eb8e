#pragma once

#include <stdexcept>
#include <string>

namespace pgen {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad user-supplied settings: invalid schedule constants, insufficient data,
// unknown preset names, beam < 1 and the like.
struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

// Operand shapes incompatible with a tensor primitive.
struct ShapeError : Error {
  using Error::Error;
};

// A caller broke an API precondition (out-of-range id, non-scalar root, ...).
struct ContractError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

// Token id outside vocab + source-OOV range during detokenization.
struct DecodeError : Error {
  using Error::Error;
};

// Checkpoint magic/version mismatch or truncated file.
struct FormatError : Error {
  using Error::Error;
};

}  // namespace pgen

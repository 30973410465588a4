#pragma once

#include <stdexcept>
#include <string>

namespace eta {

// Dataset/JSON schema violations; message carries line number and field.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Semantic constraint violations (duplicate ids, bad spans, bad specs).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Matrix/vector dimension mismatches.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Bad run configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dataset/checkpoint incompatibilities (CLI exit code 3).
struct DataMismatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A required artifact (checkpoint, alpha field, ...) is absent (exit code 4).
struct MissingArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite training loss (exit code 5).
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input sequence exceeds the encoder maximum length.
struct LengthError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace eta

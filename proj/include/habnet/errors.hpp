#pragma once

#include <stdexcept>
#include <string>

namespace habnet {

// Error taxonomy. Everything thrown by the library derives from Error so the
// CLI boundary can catch the whole family and map it to an exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes (matmul inner extents, concat rows, ...).
struct ShapeError : Error {
  using Error::Error;
};

// Non-finite values, out-of-range labels, malformed numeric input.
struct ValueError : Error {
  using Error::Error;
};

// A softmax slice with no unmasked entry. Always indicates a masking bug
// upstream, so it is never silently papered over.
struct DegenerateSliceError : Error {
  using Error::Error;
};

// API misuse: backward on a non-scalar, metric preconditions violated, ...
struct ContractError : Error {
  using Error::Error;
};

// Inconsistent run configuration (variant/width mismatch, bad split counts).
struct ConfigError : Error {
  using Error::Error;
};

// Malformed files: checkpoints, embedding tables, CSV.
struct FormatError : Error {
  using Error::Error;
};

// Corpus schema violations, reported with paper id and reason.
struct IngestError : Error {
  using Error::Error;
};

}  // namespace habnet

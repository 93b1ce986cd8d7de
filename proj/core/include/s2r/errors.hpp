#pragma once

#include <stdexcept>
#include <string>

namespace s2r {

// Error taxonomy. The CLI maps these onto process exit codes:
// config errors -> 2, data/format errors -> 3, runtime/numeric errors -> 4.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/raster shape disagreement between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value (bad field, out-of-range knob).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// API contract violation (wrong latent kind, foreign style code, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed file content (bad magic, truncated payload, bad bit depth).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Filesystem-level failure (missing file, unreadable, unwritable).
class IoError : public Error {
 public:
  using Error::Error;
};

// A masked reduction was asked to average over zero elements.
class EmptySupportError : public Error {
 public:
  using Error::Error;
};

// Manifest inconsistencies (empty domain, id mismatch between sets).
class ManifestError : public Error {
 public:
  using Error::Error;
};

// Non-finite value where the training protocol requires a finite one.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace s2r

#pragma once

#include <stdexcept>
#include <string>

namespace kfminset {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration is syntactically valid but semantically unusable
/// (bad ranges, unknown keys, missing required fields, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// ─── geometry ────────────────────────────────────────────────────────────

/// Rotation angle too close to pi for a well-conditioned logarithm.
class NearPiRotation : public Error {
 public:
  using Error::Error;
};

/// Point set is collinear or coincident; rigid alignment is not unique.
class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

/// Fewer poses than the operation requires.
class TooFewPoses : public Error {
 public:
  using Error::Error;
};

// ─── descriptors ─────────────────────────────────────────────────────────

/// Vector norm below tolerance where a direction is required.
class ZeroVector : public Error {
 public:
  using Error::Error;
};

/// Operands have different dimensions.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// ─── sampling ────────────────────────────────────────────────────────────

/// Window longer than the exhaustive enumerator supports.
class WindowTooLarge : public Error {
 public:
  using Error::Error;
};

/// Consecutive poses too close for a finite difference quotient.
class CoincidentPoses : public Error {
 public:
  using Error::Error;
};

/// Keyframe lacks a channel the sampler needs (spaciousness / entropy).
class MissingChannel : public Error {
 public:
  using Error::Error;
};

// ─── loop closure ────────────────────────────────────────────────────────

/// Keyframe id already present in the database.
class DuplicateId : public Error {
 public:
  using Error::Error;
};

/// Ground-truth pose missing for a queried id.
class MissingGroundTruth : public Error {
 public:
  using Error::Error;
};

// ─── pose graph ──────────────────────────────────────────────────────────

/// Normal equations not solvable: disconnected graph or broken gauge.
class SingularSystem : public Error {
 public:
  using Error::Error;
};

// ─── evaluation ──────────────────────────────────────────────────────────

/// Relative improvement undefined because the baseline is zero.
class ZeroBaseline : public Error {
 public:
  using Error::Error;
};

// ─── file formats ────────────────────────────────────────────────────────

/// Malformed text input; carries a 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_ = 0;
};

/// Binary payload shorter or longer than its header promises.
class CountMismatch : public Error {
 public:
  using Error::Error;
};

/// Leading magic bytes of a binary file do not match.
class BadMagic : public Error {
 public:
  using Error::Error;
};

}  // namespace kfminset

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace replayq {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition or schema. CLI exit code 1.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Filesystem failure. CLI exit code 2.
class IoError : public Error {
public:
  using Error::Error;
};

/// Problems found while decoding an FMX1 feature file.
class FeatureFileError : public ValidationError {
public:
  enum class Kind { MalformedHeader, DimensionOverflow, NonFinite, IdCountMismatch, BadSidecar };

  FeatureFileError(Kind kind, const std::string &what) : ValidationError(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

private:
  Kind kind_;
};

/// More columns than dimensions: the Gram determinant is exactly zero.
class RankDeficientError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

/// Cholesky failed at every jitter level.
class NearSingularError : public ValidationError {
public:
  NearSingularError(const std::string &what, std::vector<double> attempted)
      : ValidationError(what), attempted_(std::move(attempted)) {}

  const std::vector<double> &attempted_jitters() const noexcept { return attempted_; }

private:
  std::vector<double> attempted_;
};

} // namespace replayq

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedhybrid {

/// Base of every error raised by the library. Callers that only need to
/// report failures can catch this; the subclasses exist so tests and the CLI
/// can tell the failure modes apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A non-positive pivot was met while factorizing a matrix declared SPD.
class NotSPD : public Error {
 public:
  using Error::Error;
};

class NotStronglyConvex : public Error {
 public:
  using Error::Error;
};

/// CSV ingestion failure; the message carries row and column.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row, std::string column)
      : Error(what), row_(row), column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

class EmptyDataset : public Error {
 public:
  using Error::Error;
};

class SizeMismatch : public Error {
 public:
  using Error::Error;
};

class InfeasibleSkew : public Error {
 public:
  using Error::Error;
};

/// The inner augmented-Lagrangian minimization missed its tolerance.
class InnerSolveFailure : public Error {
 public:
  using Error::Error;
};

/// The centralized optimum solver missed its tolerance.
class SolverFailure : public Error {
 public:
  using Error::Error;
};

/// A per-client update raised; `client()` is the client's id.
class ClientStepError : public Error {
 public:
  ClientStepError(const std::string& what, std::size_t client)
      : Error(what), client_(client) {}
  std::size_t client() const noexcept { return client_; }

 private:
  std::size_t client_;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Bad experiment configuration; `key()` names the offending entry.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::string key)
      : Error(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace fedhybrid

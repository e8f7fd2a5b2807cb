#pragma once

#include <stdexcept>
#include <string>

namespace lpcvae {

/// Broad failure categories. The CLI maps each one onto a process exit code.
enum class ErrorKind {
  kDimension,      // tensor shapes disagree
  kConfig,         // invalid configuration value
  kContract,       // API misuse (non-scalar loss, unordered batch, ...)
  kNumericDomain,  // log/div outside the domain, non-finite loss
  kIngestion,      // malformed input data
  kEvaluation,     // metrics cannot be computed
  kCompatibility,  // checkpoint does not match the requested run
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& w) : Error(ErrorKind::kDimension, w) {}
};
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& w) : Error(ErrorKind::kConfig, w) {}
};
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& w) : Error(ErrorKind::kContract, w) {}
};
class NumericDomainError : public Error {
 public:
  explicit NumericDomainError(const std::string& w) : Error(ErrorKind::kNumericDomain, w) {}
};
class IngestionError : public Error {
 public:
  explicit IngestionError(const std::string& w) : Error(ErrorKind::kIngestion, w) {}
};
class EvaluationError : public Error {
 public:
  explicit EvaluationError(const std::string& w) : Error(ErrorKind::kEvaluation, w) {}
};
class CompatibilityError : public Error {
 public:
  explicit CompatibilityError(const std::string& w) : Error(ErrorKind::kCompatibility, w) {}
};

}  // namespace lpcvae

#pragma once

#include <stdexcept>
#include <string>

namespace distcox {

// Error families map onto the CLI exit-code contract:
//   2 = did not converge (not an exception), 3 = protocol, 4 = numeric, 5 = config/input.
enum class ErrorClass { Config = 5, Numeric = 4, Protocol = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what)
      : std::runtime_error(what), class_(cls) {}
  ErrorClass error_class() const { return class_; }

 private:
  ErrorClass class_;
};

struct MissingColumn : Error {
  explicit MissingColumn(const std::string& name)
      : Error(ErrorClass::Config, "missing column: " + name) {}
};

struct EmptyDataset : Error {
  explicit EmptyDataset(const std::string& what)
      : Error(ErrorClass::Config, "empty dataset: " + what) {}
};

struct NonPositiveTime : Error {
  explicit NonPositiveTime(const std::string& what)
      : Error(ErrorClass::Config, "non-positive event time: " + what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what)
      : Error(ErrorClass::Config, what) {}
};

struct SizeMismatch : Error {
  explicit SizeMismatch(const std::string& what)
      : Error(ErrorClass::Config, what) {}
};

struct NonFiniteIntermediate : Error {
  explicit NonFiniteIntermediate(const std::string& what)
      : Error(ErrorClass::Numeric, what) {}
};

struct NonFiniteLikelihood : Error {
  explicit NonFiniteLikelihood(const std::string& what)
      : Error(ErrorClass::Numeric, what) {}
};

struct SingularHessian : Error {
  explicit SingularHessian(const std::string& what)
      : Error(ErrorClass::Numeric, what) {}
};

struct NotSymmetric : Error {
  explicit NotSymmetric(const std::string& what)
      : Error(ErrorClass::Numeric, what) {}
};

struct DegenerateRiskSet : Error {
  explicit DegenerateRiskSet(const std::string& what)
      : Error(ErrorClass::Numeric, what) {}
};

struct NonPositiveVariance : Error {
  explicit NonPositiveVariance(const std::string& what)
      : Error(ErrorClass::Numeric, what) {}
};

struct MissingPartnerPayload : Error {
  explicit MissingPartnerPayload(const std::string& what)
      : Error(ErrorClass::Protocol, what) {}
};

struct GridMismatch : Error {
  explicit GridMismatch(const std::string& what)
      : Error(ErrorClass::Protocol, what) {}
};

struct MailboxCollision : Error {
  explicit MailboxCollision(const std::string& what)
      : Error(ErrorClass::Protocol, what) {}
};

struct IoFailure : Error {
  explicit IoFailure(const std::string& what)
      : Error(ErrorClass::Protocol, what) {}
};

struct Timeout : Error {
  explicit Timeout(const std::string& what)
      : Error(ErrorClass::Protocol, what) {}
};

struct MalformedPayload : Error {
  explicit MalformedPayload(const std::string& what)
      : Error(ErrorClass::Protocol, what) {}
};

// A data partner reported a failure; the class mirrors the remote error so the
// center process can exit with the matching code.
struct RemotePartnerError : Error {
  RemotePartnerError(ErrorClass cls, const std::string& what)
      : Error(cls, what) {}
};

}  // namespace distcox

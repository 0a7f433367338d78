#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rrag {

enum class ErrorKind {
  kParse,
  kIntegrity,
  kValidation,
  kReferential,
  kArgument,
  kStatistics,
  kSampling,
  kConfiguration,
  kTransport,
  kEndpoint,
};

std::string_view to_string(ErrorKind kind);

/// Base of every error raised by the library. The kind drives CLI exit codes:
/// transport and endpoint failures are runtime errors, everything else is a
/// validation error.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  bool is_runtime() const noexcept {
    return kind_ == ErrorKind::kTransport || kind_ == ErrorKind::kEndpoint;
  }

 private:
  ErrorKind kind_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(ErrorKind::kParse, source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

#define RRAG_DEFINE_ERROR(Name, Kind)                                   \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& message) : Error(Kind, message) {} \
  };

RRAG_DEFINE_ERROR(IntegrityError, ErrorKind::kIntegrity)
RRAG_DEFINE_ERROR(ValidationError, ErrorKind::kValidation)
RRAG_DEFINE_ERROR(ReferentialError, ErrorKind::kReferential)
RRAG_DEFINE_ERROR(ArgumentError, ErrorKind::kArgument)
RRAG_DEFINE_ERROR(StatisticsError, ErrorKind::kStatistics)
RRAG_DEFINE_ERROR(SamplingError, ErrorKind::kSampling)
RRAG_DEFINE_ERROR(ConfigurationError, ErrorKind::kConfiguration)
RRAG_DEFINE_ERROR(TransportError, ErrorKind::kTransport)

#undef RRAG_DEFINE_ERROR

/// Non-success protocol status from an endpoint.
class EndpointError : public Error {
 public:
  EndpointError(int status, const std::string& message)
      : Error(ErrorKind::kEndpoint, message), status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace rrag

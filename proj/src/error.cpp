#include "rrag/error.hpp"

namespace rrag {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kIntegrity: return "integrity";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kReferential: return "referential";
    case ErrorKind::kArgument: return "argument";
    case ErrorKind::kStatistics: return "statistics";
    case ErrorKind::kSampling: return "sampling";
    case ErrorKind::kConfiguration: return "configuration";
    case ErrorKind::kTransport: return "transport";
    case ErrorKind::kEndpoint: return "endpoint";
  }
  return "unknown";
}

}  // namespace rrag

#include "ckg/error.hpp"

namespace ckg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidEdge: return "InvalidEdge";
    case ErrorCode::DuplicateEdge: return "DuplicateEdge";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::EmptySupport: return "EmptySupport";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::NonScalarLoss: return "NonScalarLoss";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::WidthMismatch: return "WidthMismatch";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownField: return "UnknownField";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace ckg

#pragma once

#include <stdexcept>
#include <string>

namespace mcpf {

enum class ErrorCode {
    ZeroResistance,
    DimensionMismatch,
    NonFiniteState,
    IncompatibleCase,
    UnknownElement,
    ElementOutOfService,
    PostOutageInfeasible,
    SyntaxError,
    SchemaError,
};

/// Exception carrying a machine-readable code alongside the message.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::ZeroResistance: return "ZeroResistance";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NonFiniteState: return "NonFiniteState";
        case ErrorCode::IncompatibleCase: return "IncompatibleCase";
        case ErrorCode::UnknownElement: return "UnknownElement";
        case ErrorCode::ElementOutOfService: return "ElementOutOfService";
        case ErrorCode::PostOutageInfeasible: return "PostOutageInfeasible";
        case ErrorCode::SyntaxError: return "SyntaxError";
        case ErrorCode::SchemaError: return "SchemaError";
    }
    return "Unknown";
}

} // namespace mcpf

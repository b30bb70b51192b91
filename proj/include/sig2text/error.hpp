#pragma once

#include <stdexcept>
#include <string>

namespace sig2text {

enum class ErrorCode {
    InvalidSpec,
    UnknownSubtype,
    Aliasing,
    InvalidArgument,
    OutOfRange,
    ShapeMismatch,
    NonFinite,
    Io,
    Format,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidSpec: return "invalid_spec";
        case ErrorCode::UnknownSubtype: return "unknown_subtype";
        case ErrorCode::Aliasing: return "aliasing";
        case ErrorCode::InvalidArgument: return "invalid_argument";
        case ErrorCode::OutOfRange: return "out_of_range";
        case ErrorCode::ShapeMismatch: return "shape_mismatch";
        case ErrorCode::NonFinite: return "non_finite";
        case ErrorCode::Io: return "io";
        case ErrorCode::Format: return "format";
    }
    return "unknown";
}

/// Every failure the library reports carries a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace sig2text

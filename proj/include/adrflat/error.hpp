#pragma once

#include <stdexcept>
#include <string>

namespace adrflat {

enum class ErrorCode {
    NotControllable,
    NotHurwitz,
    InsufficientDerivatives,
    DimensionMismatch,
    UnsupportedDimension,
    SingularChannel,
    QTooSmall,
    UnstableRun,
    StepTooLarge,
    EmptyWindow,
    InvalidArgument,
    ConfigError,
};

[[nodiscard]] inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::NotControllable: return "NotControllable";
        case ErrorCode::NotHurwitz: return "NotHurwitz";
        case ErrorCode::InsufficientDerivatives: return "InsufficientDerivatives";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::UnsupportedDimension: return "UnsupportedDimension";
        case ErrorCode::SingularChannel: return "SingularChannel";
        case ErrorCode::QTooSmall: return "QTooSmall";
        case ErrorCode::UnstableRun: return "UnstableRun";
        case ErrorCode::StepTooLarge: return "StepTooLarge";
        case ErrorCode::EmptyWindow: return "EmptyWindow";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

// Every failure raised by the library carries one of the codes above so
// callers (and tests) can dispatch on the kind without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace adrflat

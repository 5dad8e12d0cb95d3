#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nullstrap {

enum class ErrorCode {
    DimensionMismatch,
    NegativeCount,
    NonIntegerCount,
    DuplicateId,
    UnknownCondition,
    TooFewSamples,
    NoReferenceGene,
    ModeError,
    CovariatesUnsupported,
    Empty,
    Parse,
    InvalidArgument,
    Internal,
};

std::string_view to_string(ErrorCode code);

// One problem found in user data; row/column are 1-based file coordinates
// (0 when not applicable).
struct Diagnostic {
    ErrorCode code;
    std::size_t row = 0;
    std::size_t column = 0;
    std::string message;

    std::string format() const;
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Raised when user-supplied data or settings are unusable. Carries every
// diagnostic collected before giving up, not just the first.
class InputError : public Error {
public:
    explicit InputError(std::vector<Diagnostic> diagnostics);
    InputError(ErrorCode code, const std::string& message);

    const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

private:
    std::vector<Diagnostic> diagnostics_;
};

} // namespace nullstrap

#include "nullstrap/errors.hpp"

#include <fmt/format.h>

namespace nullstrap {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::DimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::NegativeCount: return "NEGATIVE_COUNT";
    case ErrorCode::NonIntegerCount: return "NON_INTEGER_COUNT";
    case ErrorCode::DuplicateId: return "DUPLICATE_ID";
    case ErrorCode::UnknownCondition: return "UNKNOWN_CONDITION";
    case ErrorCode::TooFewSamples: return "TOO_FEW_SAMPLES";
    case ErrorCode::NoReferenceGene: return "NO_REFERENCE_GENE";
    case ErrorCode::ModeError: return "MODE_ERROR";
    case ErrorCode::CovariatesUnsupported: return "COVARIATES_UNSUPPORTED";
    case ErrorCode::Empty: return "EMPTY";
    case ErrorCode::Parse: return "PARSE_ERROR";
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::Internal: return "INTERNAL";
    }
    return "UNKNOWN";
}

std::string Diagnostic::format() const {
    std::string where;
    if (row > 0 && column > 0) {
        where = fmt::format(" at (row {}, column {})", row, column);
    } else if (row > 0) {
        where = fmt::format(" at row {}", row);
    } else if (column > 0) {
        where = fmt::format(" at column {}", column);
    }
    return fmt::format("{}{}: {}", to_string(code), where, message);
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(message), code_(code) {}

namespace {

std::string join_diagnostics(const std::vector<Diagnostic>& diagnostics) {
    std::string out;
    for (const auto& d : diagnostics) {
        if (!out.empty()) {
            out += '\n';
        }
        out += d.format();
    }
    return out;
}

} // namespace

InputError::InputError(std::vector<Diagnostic> diagnostics)
    : Error(diagnostics.empty() ? ErrorCode::Internal : diagnostics.front().code,
            join_diagnostics(diagnostics)),
      diagnostics_(std::move(diagnostics)) {}

InputError::InputError(ErrorCode code, const std::string& message)
    : InputError(std::vector<Diagnostic>{Diagnostic{code, 0, 0, message}}) {}

} // namespace nullstrap

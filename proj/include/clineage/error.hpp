#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace clineage {

enum class ErrorCode {
    FileUnreadable,
    SchemaViolation,
    DuplicateAddress,
    MissingCreation,
    MultipleCreations,
    DestructNotLast,
    LexError,
    ParseFatal,
    EmptyCorpus,
    DegenerateConfig,
    EmptyDocument,
    ZeroVector,
    DimensionMismatch,
    NumericalDivergence,
    BadModelFile,
    NoPairs,
    BadFraction,
    UnknownCard,
    UnknownCategory,
    PhaseViolation,
    EmptyReason,
    EmptyTitle,
    DuplicateTitle,
    SessionComplete,
    SessionIncomplete,
    UnresolvedCards,
    SessionLocked,
    UnknownAddress,
    UnknownCommand,
    StaleUpstream,
    InvalidArgument,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::FileUnreadable: return "FileUnreadable";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::DuplicateAddress: return "DuplicateAddress";
    case ErrorCode::MissingCreation: return "MissingCreation";
    case ErrorCode::MultipleCreations: return "MultipleCreations";
    case ErrorCode::DestructNotLast: return "DestructNotLast";
    case ErrorCode::LexError: return "LexError";
    case ErrorCode::ParseFatal: return "ParseFatal";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::DegenerateConfig: return "DegenerateConfig";
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NumericalDivergence: return "NumericalDivergence";
    case ErrorCode::BadModelFile: return "BadModelFile";
    case ErrorCode::NoPairs: return "NoPairs";
    case ErrorCode::BadFraction: return "BadFraction";
    case ErrorCode::UnknownCard: return "UnknownCard";
    case ErrorCode::UnknownCategory: return "UnknownCategory";
    case ErrorCode::PhaseViolation: return "PhaseViolation";
    case ErrorCode::EmptyReason: return "EmptyReason";
    case ErrorCode::EmptyTitle: return "EmptyTitle";
    case ErrorCode::DuplicateTitle: return "DuplicateTitle";
    case ErrorCode::SessionComplete: return "SessionComplete";
    case ErrorCode::SessionIncomplete: return "SessionIncomplete";
    case ErrorCode::UnresolvedCards: return "UnresolvedCards";
    case ErrorCode::SessionLocked: return "SessionLocked";
    case ErrorCode::UnknownAddress: return "UnknownAddress";
    case ErrorCode::UnknownCommand: return "UnknownCommand";
    case ErrorCode::StaleUpstream: return "StaleUpstream";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI, the HTTP service) can map it to an exit or status code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace clineage

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gridflex {

enum class ErrorCode {
    InvalidArgument,
    NonConvergence,
    InvalidPerturbation,
    OracleFailure,
    Underdetermined,
    RankDeficient,
    UnknownNode,
    MissingVariable,
    NumericalFailure,
    InconsistentScenario,
    SolveFailed,
    InvalidThreshold,
    InvalidDirection,
    Infeasible,
    MismatchedScenario,
    UnknownScheme,
    ParseError,
    CrossRefError,
    ValidationError,
    IoError,
};

constexpr std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::InvalidPerturbation: return "InvalidPerturbation";
    case ErrorCode::OracleFailure: return "OracleFailure";
    case ErrorCode::Underdetermined: return "Underdetermined";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::MissingVariable: return "MissingVariable";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::InconsistentScenario: return "InconsistentScenario";
    case ErrorCode::SolveFailed: return "SolveFailed";
    case ErrorCode::InvalidThreshold: return "InvalidThreshold";
    case ErrorCode::InvalidDirection: return "InvalidDirection";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::MismatchedScenario: return "MismatchedScenario";
    case ErrorCode::UnknownScheme: return "UnknownScheme";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::CrossRefError: return "CrossRefError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace gridflex

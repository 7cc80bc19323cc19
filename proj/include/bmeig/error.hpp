#pragma once

#include <stdexcept>
#include <string>

namespace bmeig {

enum class ErrorKind {
    InvalidParameter,
    DomainEmpty,
    DomainDisconnected,
    GridMismatch,
    PotentialNotConvex,
    SolverDiverged,
    ZeroTrialFunction,
    InteriorityViolation,
    ResidualUnreliable,
    CoreEmpty,
    DomainNotConvex,
    PreconditionViolated,
    Config,
    Io,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::DomainEmpty: return "DomainEmpty";
    case ErrorKind::DomainDisconnected: return "DomainDisconnected";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::PotentialNotConvex: return "PotentialNotConvex";
    case ErrorKind::SolverDiverged: return "SolverDiverged";
    case ErrorKind::ZeroTrialFunction: return "ZeroTrialFunction";
    case ErrorKind::InteriorityViolation: return "InteriorityViolation";
    case ErrorKind::ResidualUnreliable: return "ResidualUnreliable";
    case ErrorKind::CoreEmpty: return "CoreEmpty";
    case ErrorKind::DomainNotConvex: return "DomainNotConvex";
    case ErrorKind::PreconditionViolated: return "PreconditionViolated";
    case ErrorKind::Config: return "Config";
    case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

/// Every failure raised by the library. `value()` carries a numeric payload
/// where one is meaningful (last residual for SolverDiverged, line number for
/// Config errors), otherwise 0.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what, double value = 0.0)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), value_(value), message_(what) {}

    ErrorKind kind() const noexcept { return kind_; }
    /// The message without the kind prefix.
    const std::string& message() const noexcept { return message_; }
    double value() const noexcept { return value_; }

private:
    ErrorKind kind_;
    double value_;
    std::string message_;
};

/// Process exit codes used by the command line front-end.
namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config = 2;
inline constexpr int solver = 3;
inline constexpr int assertion = 4;
inline constexpr int io = 5;
} // namespace exit_code

inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::SolverDiverged:
    case ErrorKind::ZeroTrialFunction:
    case ErrorKind::ResidualUnreliable:
    case ErrorKind::CoreEmpty:
        return exit_code::solver;
    case ErrorKind::InteriorityViolation:
        return exit_code::assertion;
    case ErrorKind::Io:
        return exit_code::io;
    default:
        return exit_code::config;
    }
}

inline void require(bool ok, ErrorKind kind, const std::string& what) {
    if (!ok) throw Error(kind, what);
}

} // namespace bmeig

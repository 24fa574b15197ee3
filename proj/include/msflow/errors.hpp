#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace msflow {

enum class ErrorCode {
    // input problems
    Schema,
    DuplicateBus,
    MissingEndpoint,
    NoSlackBus,
    NonpositiveBase,
    ZeroImpedance,
    DimensionMismatch,
    InvalidSlack,
    InvalidDirection,
    // numerical failures
    MaxIterations,
    StepFloor,
    SingularJacobian,
    NotMarginal,
    BaseCaseInfeasible,
    NoProgressBeforeFloor,
    RefinementDiverged,
    NotLossless,
    SlackRatioUndefined,
};

/// Base of every exception thrown by the library. `is_input_error()` separates
/// bad case data / arguments from solver failures so the CLI can map them to
/// distinct exit codes.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

    bool is_input_error() const noexcept {
        switch (code_) {
        case ErrorCode::Schema:
        case ErrorCode::DuplicateBus:
        case ErrorCode::MissingEndpoint:
        case ErrorCode::NoSlackBus:
        case ErrorCode::NonpositiveBase:
        case ErrorCode::ZeroImpedance:
        case ErrorCode::DimensionMismatch:
        case ErrorCode::InvalidSlack:
        case ErrorCode::InvalidDirection:
        case ErrorCode::NotLossless:
            return true;
        default:
            return false;
        }
    }

  private:
    ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::Schema: return "schema violation";
    case ErrorCode::DuplicateBus: return "duplicate bus id";
    case ErrorCode::MissingEndpoint: return "branch endpoint missing";
    case ErrorCode::NoSlackBus: return "no slack bus";
    case ErrorCode::NonpositiveBase: return "nonpositive base";
    case ErrorCode::ZeroImpedance: return "zero-impedance branch";
    case ErrorCode::DimensionMismatch: return "dimension mismatch";
    case ErrorCode::InvalidSlack: return "invalid slack model";
    case ErrorCode::InvalidDirection: return "invalid direction";
    case ErrorCode::MaxIterations: return "maximum iterations exceeded";
    case ErrorCode::StepFloor: return "step-halving floor reached";
    case ErrorCode::SingularJacobian: return "singular load-flow Jacobian";
    case ErrorCode::NotMarginal: return "state is not marginal";
    case ErrorCode::BaseCaseInfeasible: return "base case infeasible";
    case ErrorCode::NoProgressBeforeFloor: return "no progress before step floor";
    case ErrorCode::RefinementDiverged: return "point-of-collapse refinement diverged";
    case ErrorCode::NotLossless: return "network is not lossless";
    case ErrorCode::SlackRatioUndefined: return "slack change ratio undefined";
    }
    return "unknown error";
}

}  // namespace msflow

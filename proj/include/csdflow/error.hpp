#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace csdflow {

enum class ErrorCode {
    InvalidArgument,
    IndexOutOfRange,
    NonManifoldEdge,
    NonManifoldVertex,
    InconsistentOrientation,
    DegenerateFace,
    ResolutionTooLow,
    DenominatorVanishing,
    UnboundedTimeFunction,
    StepTooSmall,
    LinearSolveFailure,
    NanDetected,
    StepBelowDtMin,
    CutoffTooNarrow,
    RhoOutOfRange,
    InsufficientSamples,
    ConfigInvalid,
    IoError,
};

inline std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::NonManifoldEdge: return "NonManifoldEdge";
    case ErrorCode::NonManifoldVertex: return "NonManifoldVertex";
    case ErrorCode::InconsistentOrientation: return "InconsistentOrientation";
    case ErrorCode::DegenerateFace: return "DegenerateFace";
    case ErrorCode::ResolutionTooLow: return "ResolutionTooLow";
    case ErrorCode::DenominatorVanishing: return "DenominatorVanishing";
    case ErrorCode::UnboundedTimeFunction: return "UnboundedTimeFunction";
    case ErrorCode::StepTooSmall: return "StepTooSmall";
    case ErrorCode::LinearSolveFailure: return "LinearSolveFailure";
    case ErrorCode::NanDetected: return "NanDetected";
    case ErrorCode::StepBelowDtMin: return "StepBelowDtMin";
    case ErrorCode::CutoffTooNarrow: return "CutoffTooNarrow";
    case ErrorCode::RhoOutOfRange: return "RhoOutOfRange";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

/// Every recoverable failure in the library is reported as an Error carrying a code, so callers
/// (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error
{
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what)
        , m_code(code)
    {}

    ErrorCode code() const noexcept { return m_code; }

private:
    ErrorCode m_code;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what)
{
    throw Error(code, what);
}

} // namespace csdflow

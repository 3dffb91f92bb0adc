#pragma once

#include <stdexcept>
#include <string>

namespace jdc {

enum class ErrorCode {
    DivergentTail,
    MarginalUnavailable,
    AssumptionViolated,
    NotUniformlyElliptic,
    CurvatureUnbounded,
    FeasibilitySearchFailed,
    SchemeIncompatible,
    PathExploded,
    DegenerateFit,
    SizeMismatch,
    EmptyFeasibleSet,
    Unbounded,
    NonConvergent,
    ConfigError,
    InvalidArgument,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace jdc

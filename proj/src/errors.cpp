#include "jdc/errors.hpp"

namespace jdc {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DivergentTail: return "DivergentTail";
        case ErrorCode::MarginalUnavailable: return "MarginalUnavailable";
        case ErrorCode::AssumptionViolated: return "AssumptionViolated";
        case ErrorCode::NotUniformlyElliptic: return "NotUniformlyElliptic";
        case ErrorCode::CurvatureUnbounded: return "CurvatureUnbounded";
        case ErrorCode::FeasibilitySearchFailed: return "FeasibilitySearchFailed";
        case ErrorCode::SchemeIncompatible: return "SchemeIncompatible";
        case ErrorCode::PathExploded: return "PathExploded";
        case ErrorCode::DegenerateFit: return "DegenerateFit";
        case ErrorCode::SizeMismatch: return "SizeMismatch";
        case ErrorCode::EmptyFeasibleSet: return "EmptyFeasibleSet";
        case ErrorCode::Unbounded: return "Unbounded";
        case ErrorCode::NonConvergent: return "NonConvergent";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

}  // namespace jdc

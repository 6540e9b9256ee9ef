#pragma once

#include <stdexcept>
#include <string>

namespace volstop {

// Machine-readable failure reasons. The CLI maps these to exit code 2
// (validation) or 3 (convergence); tests match on the code, not the text.
enum class ErrorCode {
    EmptyStates,
    BadGenerator,
    NotTridiagonal,
    NotSkipFree,
    StartOrderViolated,
    HorizonExceeded,
    RangeExceeded,
    NonpositiveSample,
    SchemeBreakdown,
    DeltaOutOfRange,
    BadParameter,
    NoConvergence,
    GridTooCoarse,
    NoContact,
    RegressionSingular,
    RuleStopsAtNegativeGain,
    BadConfig,
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::EmptyStates: return "EmptyStates";
        case ErrorCode::BadGenerator: return "BadGenerator";
        case ErrorCode::NotTridiagonal: return "NotTridiagonal";
        case ErrorCode::NotSkipFree: return "NotSkipFree";
        case ErrorCode::StartOrderViolated: return "StartOrderViolated";
        case ErrorCode::HorizonExceeded: return "HorizonExceeded";
        case ErrorCode::RangeExceeded: return "RangeExceeded";
        case ErrorCode::NonpositiveSample: return "NonpositiveSample";
        case ErrorCode::SchemeBreakdown: return "SchemeBreakdown";
        case ErrorCode::DeltaOutOfRange: return "DeltaOutOfRange";
        case ErrorCode::BadParameter: return "BadParameter";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::GridTooCoarse: return "GridTooCoarse";
        case ErrorCode::NoContact: return "NoContact";
        case ErrorCode::RegressionSingular: return "RegressionSingular";
        case ErrorCode::RuleStopsAtNegativeGain: return "RuleStopsAtNegativeGain";
        case ErrorCode::BadConfig: return "BadConfig";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

    // Variant carrying an offending index pair, e.g. NotTridiagonal(i, j).
    Error(ErrorCode code, const std::string& what, long i, long j)
        : Error(code, what) {
        index_i_ = i;
        index_j_ = j;
    }

    ErrorCode code() const noexcept { return code_; }
    long index_i() const noexcept { return index_i_; }
    long index_j() const noexcept { return index_j_; }

private:
    ErrorCode code_;
    long index_i_ = -1;
    long index_j_ = -1;
};

}  // namespace volstop

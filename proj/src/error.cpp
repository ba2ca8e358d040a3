#include "hmfg/error.hpp"

namespace hmfg {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::NonDivisibleDomain: return "NonDivisibleDomain";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NegativeProbability: return "NegativeProbability";
        case ErrorCode::EmptyControlGrid: return "EmptyControlGrid";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::NonFiniteEvaluation: return "NonFiniteEvaluation";
        case ErrorCode::InvalidParams: return "InvalidParams";
        case ErrorCode::OutOfHorizon: return "OutOfHorizon";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace hmfg

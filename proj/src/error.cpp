#include "extinct/error.hpp"

namespace extinct {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::NonrealSpectrum: return "NonrealSpectrum";
        case ErrorKind::NonpositiveEigenvalue: return "NonpositiveEigenvalue";
        case ErrorKind::NotDiagonalizable: return "NotDiagonalizable";
        case ErrorKind::UnknownEigenvalue: return "UnknownEigenvalue";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::ZeroVector: return "ZeroVector";
        case ErrorKind::NonfiniteValue: return "NonfiniteValue";
        case ErrorKind::NotHomogeneous: return "NotHomogeneous";
        case ErrorKind::NonpositiveValue: return "NonpositiveValue";
        case ErrorKind::SingularMatrix: return "SingularMatrix";
        case ErrorKind::StepSizeUnderflow: return "StepSizeUnderflow";
        case ErrorKind::NonfiniteState: return "NonfiniteState";
        case ErrorKind::TailEstimateDiverged: return "TailEstimateDiverged";
        case ErrorKind::MissingBoundConstants: return "MissingBoundConstants";
        case ErrorKind::BeyondExtinction: return "BeyondExtinction";
        case ErrorKind::QuadratureNotConverged: return "QuadratureNotConverged";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::InsufficientSamples: return "InsufficientSamples";
        case ErrorKind::FrameMismatch: return "FrameMismatch";
        case ErrorKind::AmbiguousEigenvalue: return "AmbiguousEigenvalue";
        case ErrorKind::NotConverged: return "NotConverged";
        case ErrorKind::InsufficientRange: return "InsufficientRange";
        case ErrorKind::NonpositiveValues: return "NonpositiveValues";
        case ErrorKind::DegenerateProjection: return "DegenerateProjection";
        case ErrorKind::FitRejected: return "FitRejected";
        case ErrorKind::ConfigInvalid: return "ConfigInvalid";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace extinct

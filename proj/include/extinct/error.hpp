#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace extinct {

enum class ErrorKind {
    NonrealSpectrum,
    NonpositiveEigenvalue,
    NotDiagonalizable,
    UnknownEigenvalue,
    DimensionMismatch,
    ZeroVector,
    NonfiniteValue,
    NotHomogeneous,
    NonpositiveValue,
    SingularMatrix,
    StepSizeUnderflow,
    NonfiniteState,
    TailEstimateDiverged,
    MissingBoundConstants,
    BeyondExtinction,
    QuadratureNotConverged,
    NoConvergence,
    InsufficientSamples,
    FrameMismatch,
    AmbiguousEigenvalue,
    NotConverged,
    InsufficientRange,
    NonpositiveValues,
    DegenerateProjection,
    FitRejected,
    ConfigInvalid,
    ParseError,
    IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace extinct

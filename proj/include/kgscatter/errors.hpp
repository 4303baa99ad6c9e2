#pragma once

#include <stdexcept>
#include <string>

namespace kgs {

enum class ErrorKind {
    LineIntersectsObstacle,
    RadiusTooSmall,
    ConvexHullViolation,
    InvalidGeometry,
    LinkingNotInteger,
    DomainError,
    EvaluationTooCloseToDisk,
    QuadratureNonConvergent,
    NonConvergent,
    FluxMismatch,
    ClassValidation,
    SlowDecay,
    NoRepresentative,
    ClassCrossing,
    ConfigNotFieldFree,
    SupportViolation,
    StabilityViolation,
    PacketEscaped,
    InsufficientOverlap,
    UnwrapAmbiguity,
    InsufficientAngles,
    PlaneBlocked,
    MomentInversionIllposed,
    ModeMismatch,
    BCorrectionNonConvergent,
    InvalidArgument,
    Config,
    Io
};

const char* to_string(ErrorKind k);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind)
    {
    }
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace kgs
